#include "lorel/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "lorel/errors.hpp"

namespace fs = std::filesystem;

namespace lorel::harness {

namespace {

constexpr std::uint64_t kTrialRngSalt = 0xE9151;
constexpr std::uint64_t kFreeformSalt = 0xF0F00;

const std::vector<std::string> kKnownMethods = {"lorel", "lcbc",   "lcrl",
                                                "goal",  "oracle", "random"};
const std::vector<std::string> kInstructionSets = {
    "original", "unseen_verb", "unseen_noun", "unseen_verb_noun", "freeform"};
const std::vector<std::string> kAblationVariants = {"full", "no_cross", "no_flipped",
                                                    "no_filter", "alpha0"};

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void validate(const RunConfig& c) {
  if (c.episodes < 1 || c.horizon < 1) throw ConfigError("config: corpus sizes must be positive");
  if (c.reward_steps < 0 || c.dynamics_steps < 0 || c.bc_steps < 0 || c.q_max_steps < 0)
    throw ConfigError("config: training steps must be non-negative");
  if (c.plan_samples < 1 || c.plan_horizon < 1 || c.cem_iters < 1)
    throw ConfigError("config: planner sizes must be positive");
  if (c.elite_frac <= 0.0 || c.elite_frac > 1.0)
    throw ConfigError("config: elite_frac must be in (0, 1]");
  if (c.seeds.empty()) throw ConfigError("config: seeds must be non-empty");
  if (c.trials < 1 || c.gen_trials < 1) throw ConfigError("config: trials must be positive");
  if (c.threads < 1) throw ConfigError("config: threads must be positive");
  if (c.methods.empty()) throw ConfigError("config: methods must be non-empty");
  for (const std::string& m : c.methods)
    if (std::find(kKnownMethods.begin(), kKnownMethods.end(), m) == kKnownMethods.end())
      throw ConfigError("config: unknown method '" + m + "'");
}

bool wants(const RunConfig& c, const std::string& m) {
  return std::find(c.methods.begin(), c.methods.end(), m) != c.methods.end();
}

std::string asset_path(const std::string& rel) {
  return std::string(LOREL_ASSET_DIR) + "/" + rel;
}

void write_file(const std::string& path, const std::string& bytes) {
  fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream f(path, std::ios::binary);
  f << bytes;
  if (!f) throw ConfigError("cannot write " + path);
}

}  // namespace

plan::PlanConfig RunConfig::plan_config() const {
  plan::PlanConfig pc;
  pc.samples = plan_samples;
  pc.horizon = plan_horizon;
  pc.cem_iters = cem_iters;
  pc.elite_frac = elite_frac;
  pc.mode = plan::PlanMode::kOpenLoop;
  pc.episode_T = plan_horizon;
  pc.replan_every = 0;
  return pc;
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  bool saw_version = false;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));

    if (key == "schema_version") {
      if (parse_int(key, value) != kConfigSchemaVersion)
        throw ConfigError("config: unsupported schema_version " + value);
      saw_version = true;
    } else if (key == "out_dir") {
      cfg.out_dir = value;
    } else if (key == "episodes") {
      cfg.episodes = static_cast<int>(parse_int(key, value));
    } else if (key == "horizon") {
      cfg.horizon = static_cast<int>(parse_int(key, value));
    } else if (key == "data_seed") {
      cfg.data_seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "encoder_mode") {
      cfg.encoder_mode = lang::encoder_mode_from_name(value);
    } else if (key == "lang_seed") {
      cfg.lang_seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else if (key == "reward_steps") {
      cfg.reward_steps = static_cast<int>(parse_int(key, value));
    } else if (key == "reward_alpha") {
      cfg.reward_alpha = parse_double(key, value);
    } else if (key == "dynamics_steps") {
      cfg.dynamics_steps = static_cast<int>(parse_int(key, value));
    } else if (key == "bc_steps") {
      cfg.bc_steps = static_cast<int>(parse_int(key, value));
    } else if (key == "q_max_steps") {
      cfg.q_max_steps = static_cast<int>(parse_int(key, value));
    } else if (key == "plan_samples") {
      cfg.plan_samples = static_cast<int>(parse_int(key, value));
    } else if (key == "plan_horizon") {
      cfg.plan_horizon = static_cast<int>(parse_int(key, value));
    } else if (key == "cem_iters") {
      cfg.cem_iters = static_cast<int>(parse_int(key, value));
    } else if (key == "elite_frac") {
      cfg.elite_frac = parse_double(key, value);
    } else if (key == "seeds") {
      cfg.seeds.clear();
      for (const std::string& s2 : split_list(value))
        cfg.seeds.push_back(static_cast<std::uint64_t>(parse_int(key, s2)));
    } else if (key == "trials") {
      cfg.trials = static_cast<int>(parse_int(key, value));
    } else if (key == "gen_trials") {
      cfg.gen_trials = static_cast<int>(parse_int(key, value));
    } else if (key == "methods") {
      cfg.methods = split_list(value);
    } else if (key == "threads") {
      cfg.threads = static_cast<int>(parse_int(key, value));
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  if (!saw_version) throw ConfigError("config: missing schema_version");
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string config_text(const RunConfig& c) {
  std::ostringstream out;
  out << "schema_version = " << kConfigSchemaVersion << "\n";
  out << "out_dir = " << c.out_dir << "\n";
  out << "episodes = " << c.episodes << "\n";
  out << "horizon = " << c.horizon << "\n";
  out << "data_seed = " << c.data_seed << "\n";
  out << "encoder_mode = " << lang::encoder_mode_name(c.encoder_mode) << "\n";
  out << "lang_seed = " << c.lang_seed << "\n";
  out << "reward_steps = " << c.reward_steps << "\n";
  out << "reward_alpha = " << c.reward_alpha << "\n";
  out << "dynamics_steps = " << c.dynamics_steps << "\n";
  out << "bc_steps = " << c.bc_steps << "\n";
  out << "q_max_steps = " << c.q_max_steps << "\n";
  out << "plan_samples = " << c.plan_samples << "\n";
  out << "plan_horizon = " << c.plan_horizon << "\n";
  out << "cem_iters = " << c.cem_iters << "\n";
  out << "elite_frac = " << c.elite_frac << "\n";
  out << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) out << (i ? "," : "") << c.seeds[i];
  out << "\n";
  out << "trials = " << c.trials << "\n";
  out << "gen_trials = " << c.gen_trials << "\n";
  out << "methods = ";
  for (std::size_t i = 0; i < c.methods.size(); ++i) out << (i ? "," : "") << c.methods[i];
  out << "\n";
  out << "threads = " << c.threads << "\n";
  return out.str();
}

std::string sha256_hex(const void* data, std::size_t n) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, n, digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out(2 * len, '0');
  for (unsigned int i = 0; i < len; ++i) {
    out[2 * i] = hex[digest[i] >> 4];
    out[2 * i + 1] = hex[digest[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("sha256: cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (f.read(buf, sizeof buf) || f.gcount() > 0)
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(f.gcount()));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out(2 * len, '0');
  for (unsigned int i = 0; i < len; ++i) {
    out[2 * i] = hex[digest[i] >> 4];
    out[2 * i + 1] = hex[digest[i] & 0xf];
  }
  return out;
}

CorpusPaths ensure_corpus(const RunConfig& cfg) {
  CorpusPaths p;
  p.full = cfg.out_dir + "/data/full.jsonl";
  p.filtered = cfg.out_dir + "/data/filtered.jsonl";
  if (!fs::exists(p.full) || !fs::exists(p.filtered)) {
    fs::create_directories(cfg.out_dir + "/data");
    data::Dataset full = data::collect(cfg.episodes, cfg.horizon, cfg.data_seed);
    data::save_dataset(full, p.full);
    data::save_dataset(data::filter_dataset(full), p.filtered);
  }
  p.full_hash = sha256_file(p.full);
  p.filtered_hash = sha256_file(p.filtered);
  return p;
}

namespace {

std::string model_dir(const RunConfig& cfg, std::uint64_t seed) {
  return cfg.out_dir + "/models/seed" + std::to_string(seed);
}

std::string mode_dir(const RunConfig& cfg, std::uint64_t seed) {
  return model_dir(cfg, seed) + "/" + lang::encoder_mode_name(cfg.encoder_mode);
}

bool checkpoint_exists(const std::string& path) {
  return fs::exists(path) && fs::exists(path + ".json");
}

reward::TrainConfig reward_cfg_for(const RunConfig& cfg, const std::string& hash) {
  reward::TrainConfig tc;
  tc.alpha = cfg.reward_alpha;
  tc.steps = cfg.reward_steps;
  tc.encoder_mode = cfg.encoder_mode;
  tc.lang_seed = cfg.lang_seed;
  tc.dataset_hash = hash;
  return tc;
}

}  // namespace

CheckpointPaths checkpoint_paths(const RunConfig& cfg, std::uint64_t seed) {
  CheckpointPaths p;
  p.dynamics = model_dir(cfg, seed) + "/dynamics.ckpt";
  p.reward = mode_dir(cfg, seed) + "/reward.ckpt";
  p.bc = mode_dir(cfg, seed) + "/bc.ckpt";
  p.q = mode_dir(cfg, seed) + "/q.ckpt";
  return p;
}

dyn::DynamicsModel ensure_dynamics(const RunConfig& cfg, std::uint64_t seed) {
  std::string path = checkpoint_paths(cfg, seed).dynamics;
  if (!checkpoint_exists(path)) {
    CorpusPaths corpus = ensure_corpus(cfg);
    dyn::TrainConfig tc;
    tc.steps = cfg.dynamics_steps;
    tc.dataset_hash = corpus.full_hash;
    dyn::TrainResult r = dyn::train(data::load_dataset(corpus.full), tc, seed);
    fs::create_directories(model_dir(cfg, seed));
    dyn::save_model(r.model, path);
  }
  return dyn::load_model(path);
}

reward::RewardModel ensure_reward(const RunConfig& cfg, std::uint64_t seed) {
  std::string path = checkpoint_paths(cfg, seed).reward;
  if (!checkpoint_exists(path)) {
    CorpusPaths corpus = ensure_corpus(cfg);
    reward::TrainResult r = reward::train(data::load_dataset(corpus.filtered),
                                          reward_cfg_for(cfg, corpus.filtered_hash), seed);
    fs::create_directories(mode_dir(cfg, seed));
    reward::save_model(r.model, path);
  }
  return reward::load_model(path);
}

base::BCPolicy ensure_bc(const RunConfig& cfg, std::uint64_t seed) {
  std::string path = checkpoint_paths(cfg, seed).bc;
  if (!checkpoint_exists(path)) {
    CorpusPaths corpus = ensure_corpus(cfg);
    base::BCTrainConfig tc;
    tc.steps = cfg.bc_steps;
    tc.encoder_mode = cfg.encoder_mode;
    tc.lang_seed = cfg.lang_seed;
    tc.dataset_hash = corpus.filtered_hash;
    base::BCTrainResult r = base::train_lcbc(data::load_dataset(corpus.filtered), tc, seed);
    fs::create_directories(mode_dir(cfg, seed));
    base::save_bc(r.policy, path);
  }
  return base::load_bc(path);
}

base::QModel ensure_q(const RunConfig& cfg, std::uint64_t seed) {
  std::string path = checkpoint_paths(cfg, seed).q;
  if (!checkpoint_exists(path)) {
    CorpusPaths corpus = ensure_corpus(cfg);
    base::QTrainConfig tc;
    tc.max_steps = cfg.q_max_steps;
    tc.encoder_mode = cfg.encoder_mode;
    tc.lang_seed = cfg.lang_seed;
    tc.dataset_hash = corpus.filtered_hash;
    base::QTrainResult r = base::train_lcrl(data::load_dataset(corpus.filtered), tc, seed);
    fs::create_directories(mode_dir(cfg, seed));
    base::save_q(r.model, path);
  }
  return base::load_q(path);
}

Artifacts ensure_artifacts(const RunConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Artifacts art;
  bool needs_models =
      wants(cfg, "lorel") || wants(cfg, "goal") || wants(cfg, "lcbc") || wants(cfg, "lcrl");
  if (!needs_models) return art;  // oracle/random never touch the corpus

  CorpusPaths corpus = ensure_corpus(cfg);
  art.hashes["dataset/full"] = corpus.full_hash;
  art.hashes["dataset/filtered"] = corpus.filtered_hash;

  CheckpointPaths paths = checkpoint_paths(cfg, seed);
  std::string tag = "seed" + std::to_string(seed) + "/";

  if (wants(cfg, "lorel") || wants(cfg, "goal")) {
    art.dynamics = ensure_dynamics(cfg, seed);
    art.hashes[tag + "dynamics"] = sha256_file(paths.dynamics);
  }
  if (wants(cfg, "lorel")) {
    art.reward = ensure_reward(cfg, seed);
    art.hashes[tag + "reward"] = sha256_file(paths.reward);
  }
  if (wants(cfg, "lcbc")) {
    art.bc = ensure_bc(cfg, seed);
    art.hashes[tag + "bc"] = sha256_file(paths.bc);
  }
  if (wants(cfg, "lcrl")) {
    art.q = ensure_q(cfg, seed);
    art.hashes[tag + "q"] = sha256_file(paths.q);
  }
  return art;
}

std::uint64_t trial_seed(std::uint64_t seed, std::size_t task_index, int trial) {
  return mix_seed(mix_seed(seed, task_index), static_cast<std::uint64_t>(trial));
}

bool run_trial(const std::string& method, const Artifacts& art, const sim::TaskSpec& task,
               const std::string& instruction, const RunConfig& cfg, std::uint64_t tseed,
               std::vector<sim::SceneState>* trajectory) {
  sim::SceneState s0 = sim::reset(tseed);
  plan::PlanConfig pc = cfg.plan_config();
  Rng rng(mix_seed(tseed, kTrialRngSalt));

  if (method == "lorel" || method == "goal" || method == "oracle") {
    plan::EpisodeResult res;
    if (method == "lorel") {
      lang::Encoder enc = reward::make_encoder(art.reward);
      Eigen::VectorXd emb = enc.encode(instruction);
      const reward::RewardModel& model = art.reward;
      plan::RewardFn fn = [&model, &emb](const sim::StateVec& v0, const Eigen::MatrixXd& finals) {
        return reward::reward_batch(model, v0, finals, emb);
      };
      dyn::LearnedStepper stepper(art.dynamics);
      res = plan::run_episode(task, s0, pc, stepper, fn, rng);
    } else if (method == "goal") {
      dyn::LearnedStepper stepper(art.dynamics);
      plan::RewardFn fn = base::goal_state_cost(base::make_goal_state(task, s0));
      res = plan::run_episode(task, s0, pc, stepper, fn, rng);
    } else {
      dyn::GroundTruthStepper stepper;
      plan::RewardFn fn = base::shaped_oracle_reward(task);
      res = plan::run_episode(task, s0, pc, stepper, fn, rng);
    }
    if (trajectory) *trajectory = res.trajectory;
    return res.success;
  }

  // Reactive policies step the real simulator directly.
  Eigen::VectorXd emb;
  if (method == "lcbc") {
    lang::Encoder enc(art.bc.encoder_mode, lang::Lexicon::builtin(), art.bc.lang_seed);
    emb = enc.encode(instruction);
  } else if (method == "lcrl") {
    lang::Encoder enc(art.q.encoder_mode, lang::Lexicon::builtin(), art.q.lang_seed);
    emb = enc.encode(instruction);
  } else if (method != "random") {
    throw ConfigError("unknown method '" + method + "'");
  }
  sim::StateVec v0 = sim::state_vector(s0);
  sim::SceneState s = s0;
  if (trajectory) {
    trajectory->clear();
    trajectory->push_back(s);
  }
  bool ok = false;
  for (int t = 0; t < pc.episode_T; ++t) {
    sim::Action a;
    if (method == "lcbc")
      a = base::bc_act(art.bc, sim::state_vector(s), emb);
    else if (method == "lcrl")
      a = base::lcrl_act(art.q, v0, sim::state_vector(s), emb, rng);
    else
      a = base::random_policy(rng);
    s = sim::step(s, a);
    ok = ok || sim::success(task, s0, s);
    if (trajectory) trajectory->push_back(s);
  }
  return ok;
}

namespace {

struct Job {
  std::size_t row_index;   // into the report's rows
  std::size_t task_index;  // column
  std::string method;
  std::string instruction;
  const Artifacts* art;
  std::uint64_t tseed;
};

void execute_jobs(const RunConfig& cfg, const std::vector<Job>& jobs, EvalReport& report) {
  std::vector<char> outcomes(jobs.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
      const Job& j = jobs[i];
      outcomes[i] = run_trial(j.method, *j.art, sim::task_spec(sim::kAllTasks[j.task_index]),
                              j.instruction, cfg, j.tseed)
                        ? 1
                        : 0;
    }
  };
  if (cfg.threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < cfg.threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  // Deterministic reduction in job order, independent of scheduling.
  for (std::size_t i = 0; i < jobs.size(); ++i)
    report.rows[jobs[i].row_index].successes[jobs[i].task_index] += outcomes[i];
}

EvalReport blank_report(const RunConfig& cfg, const std::string& kind) {
  EvalReport r;
  r.kind = kind;
  for (sim::TaskId id : sim::kAllTasks) r.tasks.push_back(sim::task_name(id));
  r.config_text = harness::config_text(cfg);
  r.provenance["config"] = sha256_hex(r.config_text.data(), r.config_text.size());
  r.provenance["build"] = LOREL_BUILD_SHA;
  return r;
}

std::size_t add_row(EvalReport& r, const std::string& label, std::uint64_t seed, int trials) {
  RowResult row;
  row.row = label;
  row.seed = seed;
  row.successes.assign(r.tasks.size(), 0);
  row.trials = trials;
  r.rows.push_back(row);
  return r.rows.size() - 1;
}

}  // namespace

EvalReport run_eval(const RunConfig& cfg) {
  validate(cfg);
  auto t0 = std::chrono::steady_clock::now();
  EvalReport report = blank_report(cfg, "eval");

  std::vector<Artifacts> arts;
  for (std::uint64_t seed : cfg.seeds) {
    arts.push_back(ensure_artifacts(cfg, seed));
    for (const auto& [k, v] : arts.back().hashes) report.provenance[k] = v;
  }

  std::vector<Job> jobs;
  for (const std::string& method : cfg.methods) {
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
      std::size_t row = add_row(report, method, cfg.seeds[si], cfg.trials);
      for (std::size_t ti = 0; ti < sim::kAllTasks.size(); ++ti) {
        std::string instruction = sim::canonical_instruction(sim::kAllTasks[ti]);
        for (int tr = 0; tr < cfg.trials; ++tr)
          jobs.push_back({row, ti, method, instruction, &arts[si],
                          trial_seed(cfg.seeds[si], ti, tr)});
      }
    }
  }
  execute_jobs(cfg, jobs, report);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

InstructionSet load_instruction_set(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("instruction set: cannot open " + path);
  InstructionSet set;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    auto bar = s.find('|');
    if (bar == std::string::npos)
      throw ConfigError("instruction set " + path + " line " + std::to_string(lineno) +
                        ": expected task|instruction");
    std::string task = trim(s.substr(0, bar));
    std::string instr = trim(s.substr(bar + 1));
    try {
      sim::task_from_name(task);
    } catch (const std::invalid_argument&) {
      throw ConfigError("instruction set " + path + " line " + std::to_string(lineno) +
                        ": unknown task '" + task + "'");
    }
    if (instr.empty())
      throw ConfigError("instruction set " + path + " line " + std::to_string(lineno) +
                        ": empty instruction");
    set[task].push_back(instr);
  }
  if (set.size() != sim::kAllTasks.size())
    throw ConfigError("instruction set " + path + ": needs every task");
  return set;
}

EvalReport run_generalization(const RunConfig& cfg) {
  validate(cfg);
  auto t0 = std::chrono::steady_clock::now();
  EvalReport report = blank_report(cfg, "generalization");

  std::vector<std::pair<std::string, InstructionSet>> sets;
  for (const std::string& name : kInstructionSets)
    sets.emplace_back(name, load_instruction_set(asset_path("instructions/" + name + ".txt")));

  std::vector<Job> jobs;
  std::vector<Artifacts> arts;  // stable addresses: reserved up front
  arts.reserve(2 * cfg.seeds.size());
  for (lang::EncoderMode mode : {lang::EncoderMode::kLexicon, lang::EncoderMode::kHashOnly}) {
    RunConfig mode_cfg = cfg;
    mode_cfg.encoder_mode = mode;
    mode_cfg.methods = {"lorel"};
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
      arts.push_back(ensure_artifacts(mode_cfg, cfg.seeds[si]));
      const Artifacts* art = &arts.back();
      for (const auto& [k, v] : art->hashes)
        report.provenance[lang::encoder_mode_name(mode) + "/" + k] = v;
      for (const auto& [set_name, set] : sets) {
        std::string label = lang::encoder_mode_name(mode) + "/" + set_name;
        std::size_t row = add_row(report, label, cfg.seeds[si], cfg.gen_trials);
        for (std::size_t ti = 0; ti < sim::kAllTasks.size(); ++ti) {
          const std::vector<std::string>& phrasings =
              set.at(sim::task_name(sim::kAllTasks[ti]));
          for (int tr = 0; tr < cfg.gen_trials; ++tr) {
            std::uint64_t ts = trial_seed(cfg.seeds[si], ti, tr);
            Rng pick(mix_seed(ts, kFreeformSalt));
            const std::string& instr = phrasings[pick.uniform_int(phrasings.size())];
            jobs.push_back({row, ti, "lorel", instr, art, ts});
          }
        }
      }
    }
  }
  execute_jobs(cfg, jobs, report);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

EvalReport run_ablations(const RunConfig& cfg) {
  validate(cfg);
  auto t0 = std::chrono::steady_clock::now();
  EvalReport report = blank_report(cfg, "ablation");
  CorpusPaths corpus = ensure_corpus(cfg);
  report.provenance["dataset/full"] = corpus.full_hash;
  report.provenance["dataset/filtered"] = corpus.filtered_hash;

  data::Dataset filtered = data::load_dataset(corpus.filtered);
  data::Dataset full = data::load_dataset(corpus.full);

  RunConfig lorel_cfg = cfg;
  lorel_cfg.methods = {"lorel"};

  std::vector<Job> jobs;
  std::vector<Artifacts> arts;
  arts.reserve(kAblationVariants.size() * cfg.seeds.size());
  for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
    std::uint64_t seed = cfg.seeds[si];
    // The full variant is the standard checkpoint; dynamics is shared.
    Artifacts base_art = ensure_artifacts(lorel_cfg, seed);
    for (const std::string& variant : kAblationVariants) {
      Artifacts art = base_art;
      if (variant != "full") {
        std::string path = mode_dir(cfg, seed) + "/reward_" + variant + ".ckpt";
        if (!checkpoint_exists(path)) {
          reward::TrainConfig tc = reward_cfg_for(cfg, corpus.filtered_hash);
          const data::Dataset* train_set = &filtered;
          if (variant == "no_cross") tc.use_cross_negatives = false;
          if (variant == "no_flipped") tc.use_flipped_negatives = false;
          if (variant == "alpha0") tc.noisy_positives = false;
          if (variant == "no_filter") {
            train_set = &full;
            tc.dataset_hash = corpus.full_hash;
          }
          reward::TrainResult r = reward::train(*train_set, tc, seed);
          fs::create_directories(mode_dir(cfg, seed));
          reward::save_model(r.model, path);
        }
        art.reward = reward::load_model(path);
        art.hashes["seed" + std::to_string(seed) + "/reward_" + variant] = sha256_file(path);
      }
      for (const auto& [k, v] : art.hashes) report.provenance[k] = v;
      arts.push_back(std::move(art));
      const Artifacts* ap = &arts.back();

      std::size_t row = add_row(report, variant, seed, cfg.trials);
      for (std::size_t ti = 0; ti < sim::kAllTasks.size(); ++ti) {
        std::string instruction = sim::canonical_instruction(sim::kAllTasks[ti]);
        for (int tr = 0; tr < cfg.trials; ++tr)
          jobs.push_back({row, ti, "lorel", instruction, ap, trial_seed(seed, ti, tr)});
      }
    }
  }
  execute_jobs(cfg, jobs, report);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::vector<std::string> EvalReport::row_labels() const {
  std::vector<std::string> labels;
  for (const RowResult& r : rows)
    if (std::find(labels.begin(), labels.end(), r.row) == labels.end()) labels.push_back(r.row);
  return labels;
}

double EvalReport::rate(const std::string& row, std::size_t task_col) const {
  long long wins = 0, total = 0;
  for (const RowResult& r : rows) {
    if (r.row != row) continue;
    wins += r.successes.at(task_col);
    total += r.trials;
  }
  if (total == 0) throw DataError("report: no rows labeled '" + row + "'");
  return static_cast<double>(wins) / static_cast<double>(total);
}

namespace {

std::vector<double> per_seed_averages(const EvalReport& rep, const std::string& row) {
  std::vector<double> avgs;
  for (const RowResult& r : rep.rows) {
    if (r.row != row || r.trials == 0) continue;
    double s = 0.0;
    for (int w : r.successes) s += static_cast<double>(w) / r.trials;
    avgs.push_back(s / static_cast<double>(r.successes.size()));
  }
  if (avgs.empty()) throw DataError("report: no rows labeled '" + row + "'");
  return avgs;
}

}  // namespace

double EvalReport::mean_average(const std::string& row) const {
  std::vector<double> a = per_seed_averages(*this, row);
  double m = 0.0;
  for (double v : a) m += v;
  return m / static_cast<double>(a.size());
}

double EvalReport::stderr_average(const std::string& row) const {
  std::vector<double> a = per_seed_averages(*this, row);
  if (a.size() < 2) return 0.0;
  double m = mean_average(row);
  double ss = 0.0;
  for (double v : a) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(a.size() - 1)) /
         std::sqrt(static_cast<double>(a.size()));
}

std::vector<std::string> check_bands(const EvalReport& r) {
  std::vector<std::string> bad;
  auto have = [&r](const std::string& label) {
    for (const RowResult& row : r.rows)
      if (row.row == label) return true;
    return false;
  };
  auto flag = [&bad](const char* fmt, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, fmt, a, b);
    bad.emplace_back(buf);
  };

  if (r.kind == "eval") {
    if (have("oracle")) {
      double o = r.mean_average("oracle");
      if (o < 0.90) flag("oracle average %.3f below %.3f", o, 0.90);
      for (const char* m : {"lorel", "lcbc", "lcrl", "goal"}) {
        if (have(m) && r.mean_average(m) > o)
          flag((std::string(m) + " average %.3f exceeds oracle %.3f").c_str(),
               r.mean_average(m), o);
      }
    }
    if (have("lorel")) {
      double lo = r.mean_average("lorel");
      if (have("lcbc") && lo < r.mean_average("lcbc") + 0.15)
        flag("lorel average %.3f not 0.15 above cloning %.3f", lo, r.mean_average("lcbc"));
      if (have("random") && lo < r.mean_average("random") + 0.30)
        flag("lorel average %.3f not 0.30 above random %.3f", lo, r.mean_average("random"));
      if (have("goal") && r.mean_average("goal") > lo - 0.15)
        flag("goal-state average %.3f not 0.15 below lorel %.3f", r.mean_average("goal"), lo);
    }
  } else if (r.kind == "generalization") {
    if (have("lexicon/original") && have("lexicon/unseen_verb_noun")) {
      double drop =
          r.mean_average("lexicon/original") - r.mean_average("lexicon/unseen_verb_noun");
      if (drop > 0.15) flag("lexicon verb+noun drop %.3f above %.3f", drop, 0.15);
    }
    if (have("hash-only/original") && have("hash-only/unseen_verb_noun")) {
      double drop =
          r.mean_average("hash-only/original") - r.mean_average("hash-only/unseen_verb_noun");
      if (drop < 0.20) flag("hash-only verb+noun drop %.3f below %.3f", drop, 0.20);
    }
  } else if (r.kind == "ablation") {
    if (have("full") && have("no_cross")) {
      double drop = r.mean_average("full") - r.mean_average("no_cross");
      if (drop < 0.20) flag("no_cross drop %.3f below %.3f", drop, 0.20);
    }
    if (have("full") && have("no_flipped")) {
      double delta = std::abs(r.mean_average("full") - r.mean_average("no_flipped"));
      if (delta > 0.10) flag("no_flipped delta %.3f above %.3f", delta, 0.10);
    }
  }
  return bad;
}

void emit_report(const EvalReport& r, const std::string& dir) {
  nlohmann::json j;
  j["schema_version"] = r.schema_version;
  j["kind"] = r.kind;
  j["tasks"] = r.tasks;
  j["rows"] = nlohmann::json::array();
  for (const RowResult& row : r.rows) {
    nlohmann::json jr;
    jr["row"] = row.row;
    jr["seed"] = row.seed;
    jr["trials"] = row.trials;
    jr["successes"] = row.successes;
    j["rows"].push_back(jr);
  }
  nlohmann::json summary = nlohmann::json::object();
  for (const std::string& label : r.row_labels())
    summary[label] = {{"mean_average", r.mean_average(label)},
                      {"stderr_average", r.stderr_average(label)}};
  j["summary"] = summary;
  j["provenance"] = r.provenance;
  j["config"] = r.config_text;
  j["wall_seconds"] = r.wall_seconds;
  write_file(dir + "/report.json", j.dump(2) + "\n");

  std::ostringstream csv;
  csv << "row";
  for (const std::string& t : r.tasks) csv << "," << t;
  csv << ",average\n";
  char cell[32];
  for (const std::string& label : r.row_labels()) {
    csv << label;
    double sum = 0.0;
    for (std::size_t c = 0; c < r.tasks.size(); ++c) {
      double v = r.rate(label, c);
      sum += v;
      std::snprintf(cell, sizeof cell, ",%.6f", v);
      csv << cell;
    }
    std::snprintf(cell, sizeof cell, ",%.6f", sum / static_cast<double>(r.tasks.size()));
    csv << cell << "\n";
  }
  write_file(dir + "/summary.csv", csv.str());
}

EvalReport load_report(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("report: cannot open " + path);
  EvalReport r;
  try {
    nlohmann::json j;
    f >> j;
    if (j.at("schema_version").get<int>() != kReportSchemaVersion)
      throw ConfigError("report: unsupported schema_version");
    r.kind = j.at("kind").get<std::string>();
    r.tasks = j.at("tasks").get<std::vector<std::string>>();
    for (const nlohmann::json& jr : j.at("rows")) {
      RowResult row;
      row.row = jr.at("row").get<std::string>();
      row.seed = jr.at("seed").get<std::uint64_t>();
      row.trials = jr.at("trials").get<int>();
      row.successes = jr.at("successes").get<std::vector<int>>();
      r.rows.push_back(row);
    }
    r.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
    r.config_text = j.at("config").get<std::string>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report: ") + e.what());
  }
  return r;
}

namespace {

// Table frame: 1 unit = 1000 px, y axis flipped so +y points up the canvas.
double sx(double x) { return 1000.0 * x; }
double sy(double y) { return 600.0 - 1000.0 * y; }

void svg_line(std::string& out, double x1, double y1, double x2, double y2,
              const std::string& style) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<line x1=\"%.4f\" y1=\"%.4f\" x2=\"%.4f\" y2=\"%.4f\" %s/>\n", x1, y1, x2, y2,
                style.c_str());
  out += buf;
}

void svg_circle(std::string& out, double cx, double cy, double rad, const std::string& style) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "<circle cx=\"%.4f\" cy=\"%.4f\" r=\"%.4f\" %s/>\n", cx, cy, rad,
                style.c_str());
  out += buf;
}

void svg_rect(std::string& out, double x, double y, double w, double h, const std::string& style) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "<rect x=\"%.4f\" y=\"%.4f\" width=\"%.4f\" height=\"%.4f\" %s/>\n",
                x, y, w, h, style.c_str());
  out += buf;
}

std::string lerp_color(double t) {
  int r = static_cast<int>(std::lround(43 + t * (229 - 43)));
  int g = static_cast<int>(std::lround(108 + t * (62 - 108)));
  int b = static_cast<int>(std::lround(176 + t * (62 - 176)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string render_episode_svg(const std::vector<sim::SceneState>& trajectory) {
  std::string out =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1000 600\">\n"
      "<rect x=\"0\" y=\"0\" width=\"1000\" height=\"600\" fill=\"#f7f5f0\" "
      "stroke=\"#444444\" stroke-width=\"3\"/>\n";

  // Fixtures at their anchors; articulated parts only with a state to draw.
  double slot_w = 140.0;
  svg_rect(out, sx(sim::kDrawerAnchor.x) - slot_w / 2, sy(sim::kDrawerAnchor.y) - 10.0, slot_w,
           10.0, "fill=\"#8a7a66\"");
  svg_circle(out, sx(sim::kFaucetBase.x), sy(sim::kFaucetBase.y), 14.0, "fill=\"#5a7d9a\"");

  if (!trajectory.empty()) {
    const sim::SceneState& last = trajectory.back();

    // Drawer body: length grows with extension, sliding out toward -y.
    double ext_px = 1000.0 * last.drawer_ext;
    svg_rect(out, sx(sim::kDrawerAnchor.x) - slot_w / 2, sy(sim::kDrawerAnchor.y), slot_w, ext_px,
             "fill=\"#c9b59b\" stroke=\"#6b5b48\" stroke-width=\"2\"");

    // Faucet lever from the base to the handle tip.
    sim::Vec2 handle = sim::faucet_handle(last);
    svg_line(out, sx(sim::kFaucetBase.x), sy(sim::kFaucetBase.y), sx(handle.x), sy(handle.y),
             "stroke=\"#2f4858\" stroke-width=\"6\"");
    svg_circle(out, sx(handle.x), sy(handle.y), 8.0, "fill=\"#2f4858\"");

    svg_circle(out, sx(last.black_mug.x), sy(last.black_mug.y), 1000.0 * sim::kMugRadius,
               "fill=\"#303030\"");
    svg_circle(out, sx(last.white_mug.x), sy(last.white_mug.y), 1000.0 * sim::kMugRadius,
               "fill=\"#fafafa\" stroke=\"#888888\" stroke-width=\"2\"");

    // End-effector path, early steps blue shading to red at the end.
    for (std::size_t i = 0; i + 1 < trajectory.size(); ++i) {
      double t = trajectory.size() > 2 ? static_cast<double>(i) / (trajectory.size() - 2) : 0.0;
      svg_line(out, sx(trajectory[i].ee.x), sy(trajectory[i].ee.y), sx(trajectory[i + 1].ee.x),
               sy(trajectory[i + 1].ee.y),
               "stroke=\"" + lerp_color(t) + "\" stroke-width=\"3\"");
    }
    svg_circle(out, sx(trajectory.front().ee.x), sy(trajectory.front().ee.y), 7.0,
               "fill=\"none\" stroke=\"#2b6cb0\" stroke-width=\"3\"");
    svg_circle(out, sx(last.ee.x), sy(last.ee.y), 7.0, "fill=\"#e53e3e\"");
  }

  out += "</svg>\n";
  return out;
}

void render_episode(const std::vector<sim::SceneState>& trajectory, const std::string& path) {
  write_file(path, render_episode_svg(trajectory));
}

}  // namespace lorel::harness
