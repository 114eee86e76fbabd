#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lorel/baselines.hpp"
#include "lorel/datagen.hpp"
#include "lorel/dynamics.hpp"
#include "lorel/lang.hpp"
#include "lorel/planner.hpp"
#include "lorel/reward.hpp"
#include "lorel/rng.hpp"
#include "lorel/tablesim.hpp"

namespace lorel::harness {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

// Flat experiment configuration, loadable from "key = value" text.
struct RunConfig {
  std::string out_dir = "run";

  // Corpus.
  int episodes = 5000;
  int horizon = 20;
  std::uint64_t data_seed = 11;

  // Language.
  lang::EncoderMode encoder_mode = lang::EncoderMode::kLexicon;
  std::uint64_t lang_seed = lang::kDefaultLangSeed;

  // Per-model training knobs; everything else rides on the module defaults.
  int reward_steps = 50000;
  double reward_alpha = 0.25;
  int dynamics_steps = 96000;
  int bc_steps = 20000;
  int q_max_steps = 12000;

  // Planner used by every planning method.
  int plan_samples = 200;
  int plan_horizon = 20;
  int cem_iters = 10;
  double elite_frac = 0.1;

  // Evaluation protocol.
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  int trials = 50;
  int gen_trials = 15;  // per task for the instruction-generalization study
  std::vector<std::string> methods = {"lorel", "lcbc",   "lcrl",
                                      "goal",  "oracle", "random"};
  int threads = 1;

  plan::PlanConfig plan_config() const;

  bool operator==(const RunConfig&) const = default;
};

// Parse "key = value" lines ('#' comments, blank lines ignored). The file
// must carry schema_version = 1; unknown keys and malformed values throw
// ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string config_text(const RunConfig& cfg);

// SHA-256 of a file or buffer, lowercase hex.
std::string sha256_hex(const void* data, std::size_t n);
std::string sha256_file(const std::string& path);

// Collect the corpus once per config: the full set (dynamics) plus the
// filtered set (language-conditioned models) at out_dir/data/. Returns
// paths and the filtered file's hash; reuses files that already exist.
struct CorpusPaths {
  std::string full;
  std::string filtered;
  std::string full_hash;
  std::string filtered_hash;
};
CorpusPaths ensure_corpus(const RunConfig& cfg);

// Where one seed's checkpoints live under out_dir. The dynamics model never
// sees language, so it sits outside the encoder-mode directory and is shared
// by both modes. Each checkpoint carries a .json manifest sidecar.
struct CheckpointPaths {
  std::string dynamics;  // models/seed<N>/dynamics.ckpt
  std::string reward;    // models/seed<N>/<mode>/reward.ckpt
  std::string bc;
  std::string q;
};
CheckpointPaths checkpoint_paths(const RunConfig& cfg, std::uint64_t seed);

// Reload a model from its checkpoint, training and saving it first when the
// file is not there yet. Training draws on the corpus from ensure_corpus.
reward::RewardModel ensure_reward(const RunConfig& cfg, std::uint64_t seed);
dyn::DynamicsModel ensure_dynamics(const RunConfig& cfg, std::uint64_t seed);
base::BCPolicy ensure_bc(const RunConfig& cfg, std::uint64_t seed);
base::QModel ensure_q(const RunConfig& cfg, std::uint64_t seed);

// Everything one training seed needs to answer every method's queries.
struct Artifacts {
  reward::RewardModel reward;
  dyn::DynamicsModel dynamics;
  base::BCPolicy bc;
  base::QModel q;
  std::map<std::string, std::string> hashes;  // checkpoint name -> sha256
};

// Train (or reload from out_dir/models/seed<N>/) the four models for one
// seed. Which models are trained follows cfg.methods.
Artifacts ensure_artifacts(const RunConfig& cfg, std::uint64_t seed);

// One evaluation episode. Resets the scene from trial_seed, runs the method
// to the episode horizon, and scores success with the simulator's oracle
// over every visited state. When trajectory is given it receives the
// visited states (episode_T + 1 entries).
bool run_trial(const std::string& method, const Artifacts& art, const sim::TaskSpec& task,
               const std::string& instruction, const RunConfig& cfg, std::uint64_t trial_seed,
               std::vector<sim::SceneState>* trajectory = nullptr);

// trial_seed = mix(mix(seed, task_index), trial): every (seed, task, trial)
// triple is distinct, and all methods see identical resets.
std::uint64_t trial_seed(std::uint64_t seed, std::size_t task_index, int trial);

// A named row of per-task success counts for one seed.
struct RowResult {
  std::string row;   // method, ablation variant, or instruction set
  std::uint64_t seed = 0;
  std::vector<int> successes;  // per task
  int trials = 0;
};

struct EvalReport {
  int schema_version = kReportSchemaVersion;
  std::string kind;                 // "eval" | "generalization" | "ablation"
  std::vector<std::string> tasks;   // column order
  std::vector<RowResult> rows;      // one per (row label, seed)
  std::map<std::string, std::string> provenance;  // hashes, build id
  std::string config_text;
  double wall_seconds = 0.0;

  // Pooled success rate across seeds for one row label and task column.
  double rate(const std::string& row, std::size_t task_col) const;
  // Mean and standard error of the per-seed 6-task averages.
  double mean_average(const std::string& row) const;
  double stderr_average(const std::string& row) const;
  std::vector<std::string> row_labels() const;  // unique, in first-seen order
};

// The benchmark: every configured method on every task.
EvalReport run_eval(const RunConfig& cfg);

// Instruction-set study: rows "<mode>/<set>" for both encoder modes over the
// sets bundled under assets/instructions (original, unseen_verb,
// unseen_noun, unseen_verb_noun, freeform). Planning runs with the
// language-conditioned reward method only.
EvalReport run_generalization(const RunConfig& cfg);

// Reward-composition study: rows full, no_cross, no_flipped, no_filter,
// alpha0; only the reward model is retrained per variant.
EvalReport run_ablations(const RunConfig& cfg);

// report.json (full structure, loadable) + summary.csv (row x task rate
// matrix with a trailing average column).
void emit_report(const EvalReport& r, const std::string& dir);
EvalReport load_report(const std::string& path);

// The quantitative bands each report kind is expected to clear, applied to
// whichever rows are present: eval reports check the method ordering
// (oracle >= 0.90 and >= every learned method; language-reward planning
// >= cloning + 0.15, >= random + 0.30, >= goal-state + 0.15), generalization
// reports check the unseen verb+noun drop (lexicon <= 0.15, hash-only
// >= 0.20), ablation reports check the negative-mining deltas (no_cross
// drop >= 0.20, |no_flipped delta| <= 0.10). Returns one line per violated
// band; empty means everything in reach passed.
std::vector<std::string> check_bands(const EvalReport& r);

// One instruction set: task -> candidate phrasings (freeform has several;
// the trial index picks one deterministically).
using InstructionSet = std::map<std::string, std::vector<std::string>>;
InstructionSet load_instruction_set(const std::string& path);

// Top-down SVG of a trajectory: table, drawer box sized by extension,
// faucet dial with lever, mugs, and the end-effector path on a time
// gradient. Deterministic bytes; empty trajectories draw the fixtures only.
std::string render_episode_svg(const std::vector<sim::SceneState>& trajectory);
void render_episode(const std::vector<sim::SceneState>& trajectory, const std::string& path);

}  // namespace lorel::harness
