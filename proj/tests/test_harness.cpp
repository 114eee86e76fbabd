#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "lorel/errors.hpp"
#include "lorel/harness.hpp"

using namespace lorel;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

harness::EvalReport synthetic_report() {
  harness::EvalReport r;
  r.kind = "eval";
  for (sim::TaskId id : sim::kAllTasks) r.tasks.push_back(sim::task_name(id));
  r.rows.push_back({"a", 0, {1, 2, 0, 2, 1, 2}, 2});
  r.rows.push_back({"a", 1, {2, 2, 2, 2, 2, 2}, 2});
  r.rows.push_back({"b", 0, {0, 0, 0, 0, 0, 0}, 2});
  r.provenance["dataset/full"] = "feed";
  r.config_text = harness::config_text(harness::RunConfig{});
  r.wall_seconds = 1.5;
  return r;
}

}  // namespace

TEST_CASE("run config text round trips through the parser") {
  harness::RunConfig def;
  CHECK(harness::parse_config(harness::config_text(def)) == def);

  harness::RunConfig cfg;
  cfg.out_dir = "elsewhere/run7";
  cfg.episodes = 123;
  cfg.horizon = 7;
  cfg.data_seed = 99;
  cfg.encoder_mode = lang::EncoderMode::kHashOnly;
  cfg.lang_seed = 5;
  cfg.reward_steps = 10;
  cfg.reward_alpha = 0.125;
  cfg.dynamics_steps = 20;
  cfg.bc_steps = 30;
  cfg.q_max_steps = 40;
  cfg.plan_samples = 11;
  cfg.plan_horizon = 9;
  cfg.cem_iters = 4;
  cfg.elite_frac = 0.5;
  cfg.seeds = {4, 5, 6, 7};
  cfg.trials = 3;
  cfg.gen_trials = 2;
  cfg.methods = {"oracle", "random"};
  cfg.threads = 2;
  CHECK(harness::parse_config(harness::config_text(cfg)) == cfg);

  plan::PlanConfig pc = cfg.plan_config();
  CHECK(pc.samples == 11);
  CHECK(pc.horizon == 9);
  CHECK(pc.cem_iters == 4);
  CHECK(pc.elite_frac == 0.5);
  CHECK(pc.mode == plan::PlanMode::kOpenLoop);
  CHECK(pc.episode_T == 9);
}

TEST_CASE("config parser tolerates comments and spacing") {
  std::string text =
      "# experiment\n"
      "\n"
      "schema_version = 1\n"
      "  trials=4  \n"
      "seeds = 1 , 2,3\n"
      "methods = oracle\n";
  harness::RunConfig cfg = harness::parse_config(text);
  CHECK(cfg.trials == 4);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(cfg.methods == std::vector<std::string>{"oracle"});
  CHECK(cfg.episodes == harness::RunConfig{}.episodes);
}

TEST_CASE("config parser rejects malformed input") {
  CHECK_THROWS_AS(harness::parse_config("trials = 4\n"), ConfigError);  // no version
  CHECK_THROWS_AS(harness::parse_config("schema_version = 2\n"), ConfigError);
  CHECK_THROWS_AS(harness::parse_config("schema_version = 1\nbogus_knob = 3\n"), ConfigError);
  CHECK_THROWS_AS(harness::parse_config("schema_version = 1\ntrials = soon\n"), ConfigError);
  CHECK_THROWS_AS(harness::parse_config("schema_version = 1\ntrials = 4extra\n"), ConfigError);
  CHECK_THROWS_AS(harness::parse_config("schema_version = 1\njust a line\n"), ConfigError);
  CHECK_THROWS_AS(harness::parse_config("schema_version = 1\ntrials = 0\n"), ConfigError);
  CHECK_THROWS_AS(harness::parse_config("schema_version = 1\nelite_frac = 0\n"), ConfigError);
  CHECK_THROWS_AS(harness::parse_config("schema_version = 1\nelite_frac = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(harness::parse_config("schema_version = 1\nencoder_mode = psychic\n"),
                  ConfigError);
  CHECK_THROWS_AS(harness::parse_config("schema_version = 1\nmethods = lorel,telepathy\n"),
                  ConfigError);
  CHECK_THROWS_AS(harness::parse_config("schema_version = 1\nmethods = ,\n"), ConfigError);
  CHECK_THROWS_AS(harness::parse_config("schema_version = 1\nseeds = ,\n"), ConfigError);
  CHECK_THROWS_AS(harness::load_config("/tmp/lorel_no_such_config.cfg"), ConfigError);
}

TEST_CASE("sha digests match known vectors") {
  CHECK(harness::sha256_hex("", 0) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  std::string abc = "abc";
  CHECK(harness::sha256_hex(abc.data(), abc.size()) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

  std::string path = "/tmp/lorel_test_digest.bin";
  std::string payload(200000, 'x');
  payload[70000] = 'y';  // spans multiple streaming chunks
  {
    std::ofstream f(path, std::ios::binary);
    f << payload;
  }
  CHECK(harness::sha256_file(path) == harness::sha256_hex(payload.data(), payload.size()));
  CHECK_THROWS_AS(harness::sha256_file("/tmp/lorel_no_such_file.bin"), ConfigError);
}

TEST_CASE("trial seeds separate seeds, tasks, and trials") {
  CHECK(harness::trial_seed(0, 0, 0) == harness::trial_seed(0, 0, 0));
  std::vector<std::uint64_t> seen = {
      harness::trial_seed(0, 0, 0), harness::trial_seed(0, 0, 1),
      harness::trial_seed(0, 1, 0), harness::trial_seed(1, 0, 0)};
  for (std::size_t i = 0; i < seen.size(); ++i)
    for (std::size_t j = i + 1; j < seen.size(); ++j) CHECK(seen[i] != seen[j]);
}

TEST_CASE("instruction sets load and validate") {
  std::string base = std::string(LOREL_ASSET_DIR) + "/instructions/";
  harness::InstructionSet original = harness::load_instruction_set(base + "original.txt");
  CHECK(original.size() == sim::kAllTasks.size());
  for (sim::TaskId id : sim::kAllTasks) {
    REQUIRE(original.count(sim::task_name(id)) == 1);
    CHECK(original.at(sim::task_name(id)) ==
          std::vector<std::string>{sim::canonical_instruction(id)});
  }

  for (const char* name : {"unseen_verb", "unseen_noun", "unseen_verb_noun", "freeform"}) {
    harness::InstructionSet set = harness::load_instruction_set(base + name + std::string(".txt"));
    CHECK(set.size() == sim::kAllTasks.size());
    for (const auto& [task, phrasings] : set) CHECK(!phrasings.empty());
  }
  harness::InstructionSet freeform = harness::load_instruction_set(base + "freeform.txt");
  for (const auto& [task, phrasings] : freeform) CHECK(phrasings.size() == 3);

  std::string bad = "/tmp/lorel_test_instructions.txt";
  auto write = [&](const std::string& text) {
    std::ofstream f(bad);
    f << text;
  };
  write("close-drawer no pipe\n");
  CHECK_THROWS_AS(harness::load_instruction_set(bad), ConfigError);
  write("warp-core|engage\n");
  CHECK_THROWS_AS(harness::load_instruction_set(bad), ConfigError);
  write("close-drawer|\n");
  CHECK_THROWS_AS(harness::load_instruction_set(bad), ConfigError);
  write("close-drawer|close drawer\n");  // other five tasks missing
  CHECK_THROWS_AS(harness::load_instruction_set(bad), ConfigError);
  CHECK_THROWS_AS(harness::load_instruction_set("/tmp/lorel_no_such_set.txt"), ConfigError);
}

TEST_CASE("reports aggregate rates and round trip through disk") {
  harness::EvalReport r = synthetic_report();

  CHECK(r.row_labels() == std::vector<std::string>{"a", "b"});
  CHECK(r.rate("a", 0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(r.rate("a", 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.rate("b", 3) == 0.0);
  CHECK_THROWS_AS(r.rate("zebra", 0), DataError);

  // Per-seed averages for "a" are 8/12 and 12/12.
  CHECK(r.mean_average("a") == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(r.stderr_average("a") == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(r.mean_average("b") == 0.0);
  CHECK(r.stderr_average("b") == 0.0);  // one seed: no spread estimate

  std::string dir = "/tmp/lorel_test_report";
  fs::remove_all(dir);
  harness::emit_report(r, dir);
  harness::EvalReport back = harness::load_report(dir + "/report.json");
  CHECK(back.kind == r.kind);
  CHECK(back.tasks == r.tasks);
  CHECK(back.provenance == r.provenance);
  CHECK(back.config_text == r.config_text);
  CHECK(back.wall_seconds == r.wall_seconds);
  REQUIRE(back.rows.size() == r.rows.size());
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    CHECK(back.rows[i].row == r.rows[i].row);
    CHECK(back.rows[i].seed == r.rows[i].seed);
    CHECK(back.rows[i].successes == r.rows[i].successes);
    CHECK(back.rows[i].trials == r.rows[i].trials);
  }

  std::vector<std::string> csv = lines_of(slurp(dir + "/summary.csv"));
  REQUIRE(csv.size() == 3);
  CHECK(csv[0] ==
        "row,close-drawer,open-drawer,faucet-left,faucet-right,black-mug-right,white-mug-down,"
        "average");
  CHECK(csv[1] == "a,0.750000,1.000000,0.500000,1.000000,0.750000,1.000000,0.833333");
  CHECK(csv[2] == "b,0.000000,0.000000,0.000000,0.000000,0.000000,0.000000,0.000000");

  CHECK_THROWS_AS(harness::load_report("/tmp/lorel_no_such_report.json"), ConfigError);
  std::string mangled = "/tmp/lorel_test_report_bad.json";
  {
    std::ofstream f(mangled);
    f << "{\"schema_version\": 1}";
  }
  CHECK_THROWS_AS(harness::load_report(mangled), ConfigError);
}

namespace {

harness::EvalReport banded_report(const std::string& kind,
                                  const std::vector<std::pair<std::string, int>>& labels,
                                  int trials) {
  harness::EvalReport r;
  r.kind = kind;
  for (sim::TaskId id : sim::kAllTasks) r.tasks.push_back(sim::task_name(id));
  for (const auto& [label, wins] : labels)
    r.rows.push_back({label, 0, std::vector<int>(6, wins), trials});
  return r;
}

}  // namespace

TEST_CASE("band checks flag each ordering violation") {
  // Healthy eval: oracle 1.0, lorel 0.6, cloning 0.3, q 0.2, goal 0.2, random 0.1.
  harness::EvalReport good = banded_report("eval",
                                           {{"oracle", 10},
                                            {"lorel", 6},
                                            {"lcbc", 3},
                                            {"lcrl", 2},
                                            {"goal", 2},
                                            {"random", 1}},
                                           10);
  CHECK(harness::check_bands(good).empty());

  CHECK(harness::check_bands(banded_report("eval", {{"oracle", 8}}, 10)).size() == 1);
  CHECK(harness::check_bands(banded_report("eval", {{"oracle", 9}, {"lcbc", 10}}, 10)).size() ==
        1);
  // lorel under every comparison bar at once: three violations.
  CHECK(harness::check_bands(
            banded_report("eval", {{"lorel", 3}, {"lcbc", 3}, {"random", 3}, {"goal", 3}}, 10))
            .size() == 3);
  // Rows the report lacks are out of reach: nothing to check.
  CHECK(harness::check_bands(banded_report("eval", {{"random", 1}}, 10)).empty());

  harness::EvalReport gen_good = banded_report(
      "generalization",
      {{"lexicon/original", 6}, {"lexicon/unseen_verb_noun", 5},
       {"hash-only/original", 6}, {"hash-only/unseen_verb_noun", 1}},
      10);
  CHECK(harness::check_bands(gen_good).empty());
  harness::EvalReport gen_bad = banded_report(
      "generalization",
      {{"lexicon/original", 6}, {"lexicon/unseen_verb_noun", 3},
       {"hash-only/original", 6}, {"hash-only/unseen_verb_noun", 5}},
      10);
  CHECK(harness::check_bands(gen_bad).size() == 2);

  harness::EvalReport abl_good =
      banded_report("ablation", {{"full", 6}, {"no_cross", 2}, {"no_flipped", 6}}, 10);
  CHECK(harness::check_bands(abl_good).empty());
  harness::EvalReport abl_bad =
      banded_report("ablation", {{"full", 6}, {"no_cross", 5}, {"no_flipped", 2}}, 10);
  CHECK(harness::check_bands(abl_bad).size() == 2);
}

TEST_CASE("checkpoint layout separates seeds and encoder modes") {
  harness::RunConfig cfg;
  cfg.out_dir = "exp";
  harness::CheckpointPaths p = harness::checkpoint_paths(cfg, 4);
  CHECK(p.dynamics == "exp/models/seed4/dynamics.ckpt");
  CHECK(p.reward == "exp/models/seed4/lexicon/reward.ckpt");
  CHECK(p.bc == "exp/models/seed4/lexicon/bc.ckpt");
  CHECK(p.q == "exp/models/seed4/lexicon/q.ckpt");
  cfg.encoder_mode = lang::EncoderMode::kHashOnly;
  CHECK(harness::checkpoint_paths(cfg, 4).reward == "exp/models/seed4/hash-only/reward.ckpt");
  CHECK(harness::checkpoint_paths(cfg, 4).dynamics == p.dynamics);  // mode-independent
}

TEST_CASE("trials expose their trajectories for rendering") {
  harness::RunConfig cfg;
  cfg.plan_samples = 24;
  cfg.plan_horizon = 6;
  cfg.cem_iters = 2;
  harness::Artifacts none;

  std::vector<sim::SceneState> planned;
  harness::run_trial("oracle", none, sim::task_spec(sim::TaskId::kOpenDrawer), "open drawer",
                     cfg, 42, &planned);
  CHECK(planned.size() == std::size_t(cfg.plan_horizon) + 1);
  CHECK(planned.front() == sim::reset(42));

  std::vector<sim::SceneState> walked;
  bool ok = harness::run_trial("random", none, sim::task_spec(sim::TaskId::kOpenDrawer),
                               "open drawer", cfg, 42, &walked);
  CHECK(walked.size() == std::size_t(cfg.plan_horizon) + 1);
  CHECK(walked.front() == sim::reset(42));
  bool any = false;
  for (const sim::SceneState& s : walked)
    any = any || sim::success(sim::task_spec(sim::TaskId::kOpenDrawer), walked.front(), s);
  CHECK(ok == any);
}

TEST_CASE("episode sketches are deterministic and track the scene") {
  std::string fixtures_only = harness::render_episode_svg({});
  CHECK(fixtures_only.find("<svg") != std::string::npos);
  CHECK(fixtures_only.find("</svg>") != std::string::npos);
  CHECK(fixtures_only.find("#8a7a66") != std::string::npos);   // drawer slot
  CHECK(fixtures_only.find("#5a7d9a") != std::string::npos);   // faucet base
  CHECK(fixtures_only.find("#303030") == std::string::npos);   // no mugs
  CHECK(fixtures_only.find("#e53e3e") == std::string::npos);   // no path

  sim::SceneState s = sim::reset(5);
  s.drawer_ext = 0.12;
  std::vector<sim::SceneState> traj = {s};
  for (int t = 0; t < 6; ++t) traj.push_back(sim::step(traj.back(), {{0.03, 0.01}}));

  std::string svg = harness::render_episode_svg(traj);
  CHECK(svg == harness::render_episode_svg(traj));
  CHECK(svg.find("#303030") != std::string::npos);
  CHECK(svg.find("#fafafa") != std::string::npos);
  CHECK(svg.find("#2b6cb0") != std::string::npos);
  CHECK(svg.find("#e53e3e") != std::string::npos);
  // Drawer body height scales with extension: 0.12 -> 120 canvas units.
  CHECK(svg.find("width=\"140.0000\" height=\"120.0000\"") != std::string::npos);

  std::string path = "/tmp/lorel_test_sketch.svg";
  harness::render_episode(traj, path);
  CHECK(slurp(path) == svg);
}

TEST_CASE("experiment pipeline reuses artifacts and reports deterministically") {
  std::string dir = "/tmp/lorel_test_pipeline";
  fs::remove_all(dir);

  harness::RunConfig cfg;
  cfg.out_dir = dir;
  cfg.episodes = 80;
  cfg.horizon = 10;
  cfg.data_seed = 7;
  cfg.reward_steps = 150;
  cfg.dynamics_steps = 150;
  cfg.bc_steps = 150;
  cfg.q_max_steps = 150;
  cfg.plan_samples = 24;
  cfg.plan_horizon = 6;
  cfg.cem_iters = 2;
  cfg.elite_frac = 0.25;
  cfg.seeds = {3};
  cfg.trials = 2;
  cfg.gen_trials = 1;

  harness::EvalReport eval = harness::run_eval(cfg);
  CHECK(eval.kind == "eval");
  CHECK(eval.rows.size() == cfg.methods.size());
  CHECK(eval.row_labels() == cfg.methods);
  for (const harness::RowResult& row : eval.rows) {
    CHECK(row.trials == 2);
    REQUIRE(row.successes.size() == 6);
    for (int s : row.successes) {
      CHECK(s >= 0);
      CHECK(s <= row.trials);
    }
  }
  CHECK(harness::parse_config(eval.config_text) == cfg);
  for (const char* key : {"dataset/full", "dataset/filtered", "seed3/reward", "seed3/dynamics",
                          "seed3/bc", "seed3/q", "config", "build"}) {
    REQUIRE_MESSAGE(eval.provenance.count(key) == 1, key);
  }
  CHECK(eval.provenance.at("seed3/reward").size() == 64);
  CHECK(eval.wall_seconds > 0.0);

  for (const char* ckpt : {"/models/seed3/dynamics.ckpt", "/models/seed3/lexicon/reward.ckpt",
                           "/models/seed3/lexicon/bc.ckpt", "/models/seed3/lexicon/q.ckpt"}) {
    CHECK_MESSAGE(fs::exists(dir + ckpt), ckpt);
  }

  // A second run finds every checkpoint on disk and replays identically.
  harness::EvalReport again = harness::run_eval(cfg);
  eval.wall_seconds = 0.0;
  again.wall_seconds = 0.0;
  harness::emit_report(eval, dir + "/eval_a");
  harness::emit_report(again, dir + "/eval_b");
  CHECK(slurp(dir + "/eval_a/report.json") == slurp(dir + "/eval_b/report.json"));
  CHECK(slurp(dir + "/eval_a/summary.csv") == slurp(dir + "/eval_b/summary.csv"));

  harness::EvalReport gen = harness::run_generalization(cfg);
  CHECK(gen.kind == "generalization");
  std::vector<std::string> expected_labels;
  for (const char* mode : {"lexicon", "hash-only"})
    for (const char* set : {"original", "unseen_verb", "unseen_noun", "unseen_verb_noun",
                            "freeform"})
      expected_labels.push_back(std::string(mode) + "/" + set);
  CHECK(gen.row_labels() == expected_labels);
  CHECK(gen.rows.size() == expected_labels.size() * cfg.seeds.size());
  for (const harness::RowResult& row : gen.rows) CHECK(row.trials == cfg.gen_trials);
  CHECK(fs::exists(dir + "/models/seed3/hash-only/reward.ckpt"));

  harness::EvalReport abl = harness::run_ablations(cfg);
  CHECK(abl.kind == "ablation");
  CHECK(abl.row_labels() ==
        std::vector<std::string>{"full", "no_cross", "no_flipped", "no_filter", "alpha0"});
  for (const char* variant : {"no_cross", "no_flipped", "no_filter", "alpha0"}) {
    CHECK_MESSAGE(
        fs::exists(dir + "/models/seed3/lexicon/reward_" + std::string(variant) + ".ckpt"),
        variant);
  }

  // The standard-recipe row and the benchmark's own row share checkpoints
  // and trial seeds, so their outcomes agree exactly.
  const harness::RowResult* lorel_row = nullptr;
  const harness::RowResult* full_row = nullptr;
  for (const harness::RowResult& row : eval.rows)
    if (row.row == "lorel") lorel_row = &row;
  for (const harness::RowResult& row : abl.rows)
    if (row.row == "full") full_row = &row;
  REQUIRE(lorel_row != nullptr);
  REQUIRE(full_row != nullptr);
  CHECK(lorel_row->successes == full_row->successes);
}
