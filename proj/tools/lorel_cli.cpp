#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lorel/harness.hpp"

using namespace lorel;

namespace {

harness::RunConfig effective_config(const std::string& path,
                                    const std::vector<std::string>& sets) {
  harness::RunConfig cfg = path.empty() ? harness::RunConfig{} : harness::load_config(path);
  if (sets.empty()) return cfg;
  // Re-parse with the overrides appended; later lines win.
  std::string text = harness::config_text(cfg);
  for (const std::string& s : sets) text += s + "\n";
  return harness::parse_config(text);
}

void print_report(const harness::EvalReport& r) {
  std::size_t label_w = 5;
  for (const std::string& label : r.row_labels()) label_w = std::max(label_w, label.size());

  std::printf("%-*s", int(label_w), "row");
  for (const std::string& t : r.tasks) std::printf("  %15s", t.c_str());
  std::printf("  %7s\n", "average");
  for (const std::string& label : r.row_labels()) {
    std::printf("%-*s", int(label_w), label.c_str());
    for (std::size_t c = 0; c < r.tasks.size(); ++c) std::printf("  %15.3f", r.rate(label, c));
    std::printf("  %.3f +/- %.3f\n", r.mean_average(label), r.stderr_average(label));
  }
  if (r.wall_seconds > 0.0) std::printf("wall: %.1f s\n", r.wall_seconds);
}

int apply_check(const harness::EvalReport& r, bool check) {
  if (!check) return 0;
  std::vector<std::string> failures = harness::check_bands(r);
  for (const std::string& f : failures) std::printf("BAND FAIL: %s\n", f.c_str());
  if (failures.empty()) std::printf("all bands pass\n");
  return failures.empty() ? 0 : 1;
}

int run_study(harness::EvalReport (*study)(const harness::RunConfig&),
              const harness::RunConfig& cfg, const std::string& report_dir, bool check) {
  harness::EvalReport r = study(cfg);
  harness::emit_report(r, cfg.out_dir + "/reports/" + report_dir);
  print_report(r);
  std::printf("report: %s/reports/%s/report.json\n", cfg.out_dir.c_str(), report_dir.c_str());
  return apply_check(r, check);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale language-conditioned manipulation benchmark"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "Run configuration file (key = value lines)");
  app.add_option("--set", overrides, "Override a config field, e.g. --set trials=100");

  std::vector<std::uint64_t> seed_args;
  bool check = false;
  bool full_protocol = false;

  CLI::App* collect = app.add_subcommand("collect", "Collect and annotate the offline corpus");
  CLI::App* train_reward =
      app.add_subcommand("train-reward", "Train the language-conditioned reward classifier");
  CLI::App* train_dynamics = app.add_subcommand("train-dynamics", "Train the dynamics model");
  CLI::App* train_bc = app.add_subcommand("train-bc", "Train the behavior-cloning policy");
  CLI::App* train_q = app.add_subcommand("train-q", "Train the offline Q-learning baseline");
  for (CLI::App* sub : {train_reward, train_dynamics, train_bc, train_q})
    sub->add_option("--seed", seed_args, "Training seed (repeatable; default: config seeds)");

  CLI::App* eval = app.add_subcommand("eval", "Run every configured method on every task");
  eval->add_flag("--full", full_protocol, "Use 100 trials per task instead of the config value");
  CLI::App* generalize =
      app.add_subcommand("generalize", "Evaluate rephrased instruction sets, both encoder modes");
  CLI::App* ablate = app.add_subcommand("ablate", "Evaluate reward-training ablation variants");
  for (CLI::App* sub : {eval, generalize, ablate})
    sub->add_flag("--check", check, "Exit non-zero unless the report clears its bands");

  std::string report_path;
  CLI::App* report = app.add_subcommand("report", "Pretty-print a stored report");
  report->add_option("path", report_path, "Path to report.json")->required();
  report->add_flag("--check", check, "Exit non-zero unless the report clears its bands");

  std::string render_method = "oracle";
  std::string render_task;
  std::string render_instruction;
  std::string render_out;
  std::uint64_t render_seed = 0;
  int render_trial = 0;
  bool render_seed_given = false;
  CLI::App* render = app.add_subcommand("render", "Run one episode and draw it as SVG");
  render->add_option("--task", render_task, "Task name, e.g. open-drawer")->required();
  render->add_option("--method", render_method, "Method to run")->capture_default_str();
  render->add_option("--instruction", render_instruction, "Override the canonical instruction");
  render->add_option("--train-seed", render_seed, "Training seed (default: first config seed)")
      ->each([&](const std::string&) { render_seed_given = true; });
  render->add_option("--trial", render_trial, "Trial index")->capture_default_str();
  render->add_option("-o,--out", render_out, "Output SVG path");

  CLI11_PARSE(app, argc, argv);

  try {
    harness::RunConfig cfg = effective_config(config_path, overrides);
    if (full_protocol) cfg.trials = 100;

    if (*collect) {
      harness::CorpusPaths p = harness::ensure_corpus(cfg);
      data::Dataset full = data::load_dataset(p.full);
      data::Dataset filtered = data::load_dataset(p.filtered);
      std::printf("%s  %zu episodes  sha256 %s\n", p.full.c_str(), full.episodes.size(),
                  p.full_hash.c_str());
      std::printf("%s  %zu episodes  sha256 %s\n", p.filtered.c_str(), filtered.episodes.size(),
                  p.filtered_hash.c_str());
      return 0;
    }

    if (*train_reward || *train_dynamics || *train_bc || *train_q) {
      std::vector<std::uint64_t> seeds = seed_args.empty() ? cfg.seeds : seed_args;
      for (std::uint64_t seed : seeds) {
        harness::CheckpointPaths paths = harness::checkpoint_paths(cfg, seed);
        std::string path;
        if (*train_reward) {
          harness::ensure_reward(cfg, seed);
          path = paths.reward;
        } else if (*train_dynamics) {
          harness::ensure_dynamics(cfg, seed);
          path = paths.dynamics;
        } else if (*train_bc) {
          harness::ensure_bc(cfg, seed);
          path = paths.bc;
        } else {
          harness::ensure_q(cfg, seed);
          path = paths.q;
        }
        std::printf("%s  sha256 %s\n", path.c_str(), harness::sha256_file(path).c_str());
      }
      return 0;
    }

    if (*eval) return run_study(harness::run_eval, cfg, "eval", check);
    if (*generalize) return run_study(harness::run_generalization, cfg, "generalization", check);
    if (*ablate) return run_study(harness::run_ablations, cfg, "ablation", check);

    if (*report) {
      harness::EvalReport r = harness::load_report(report_path);
      print_report(r);
      return apply_check(r, check);
    }

    if (*render) {
      sim::TaskId id = sim::task_from_name(render_task);
      std::size_t task_index = 0;
      while (sim::kAllTasks[task_index] != id) ++task_index;
      if (render_instruction.empty()) render_instruction = sim::canonical_instruction(id);
      std::uint64_t seed = render_seed_given ? render_seed : cfg.seeds.front();

      harness::RunConfig narrowed = cfg;
      narrowed.methods = {render_method};
      harness::Artifacts art = harness::ensure_artifacts(narrowed, seed);

      if (render_out.empty())
        render_out = cfg.out_dir + "/renders/" + render_task + "-" + render_method + "-s" +
                     std::to_string(seed) + "-t" + std::to_string(render_trial) + ".svg";
      std::vector<sim::SceneState> trajectory;
      bool ok = harness::run_trial(render_method, art, sim::task_spec(id), render_instruction,
                                   cfg, harness::trial_seed(seed, task_index, render_trial),
                                   &trajectory);
      harness::render_episode(trajectory, render_out);
      std::printf("%s  \"%s\"  %s\n", render_out.c_str(), render_instruction.c_str(),
                  ok ? "success" : "failure");
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
