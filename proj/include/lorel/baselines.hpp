#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "lorel/datagen.hpp"
#include "lorel/lang.hpp"
#include "lorel/nncore.hpp"
#include "lorel/planner.hpp"
#include "lorel/rng.hpp"
#include "lorel/tablesim.hpp"

namespace lorel::base {

inline constexpr int kStateDim = 9;
inline constexpr int kActionDim = 2;

// ---------------------------------------------------------------------------
// Language-conditioned behavior cloning: [s | l] -> action, trained with MSE
// against the dataset actions. Queries never see s0.

struct BCPolicy {
  nn::MLPParams net;
  lang::EncoderMode encoder_mode = lang::EncoderMode::kLexicon;
  std::uint64_t lang_seed = lang::kDefaultLangSeed;
  std::string dataset_hash;
};

struct BCTrainConfig {
  int steps = 20000;
  int batch_size = 32;
  double learning_rate = 1e-4;
  double state_noise_sigma = 0.005;  // no embedding noise for cloning
  int eval_every = 500;
  lang::EncoderMode encoder_mode = lang::EncoderMode::kLexicon;
  std::uint64_t lang_seed = lang::kDefaultLangSeed;
  std::string dataset_hash;
};

struct BCCurvePoint {
  int step;
  double train_mse;
  double heldout_mse;
};

struct BCTrainResult {
  BCPolicy policy;
  std::vector<BCCurvePoint> curves;
  int best_step = 0;
  double best_heldout_mse = 0.0;
};

// [kStateDim + embed, 128, 128, 128, kActionDim], linear output.
nn::MLPSpec bc_net_spec();

// MSE over every (s_t, a_t, instruction) triple, 90/10 episode split, best
// held-out checkpoint.
BCTrainResult train_lcbc(const data::Dataset& d, const BCTrainConfig& cfg, std::uint64_t seed);

// Deterministic policy query, clipped to the action bounds.
sim::Action bc_act(const BCPolicy& p, const sim::StateVec& s, const Eigen::VectorXd& emb);
sim::Action bc_act(const BCPolicy& p, const sim::StateVec& s, const std::string& instruction);

void save_bc(const BCPolicy& p, const std::string& path);
BCPolicy load_bc(const std::string& path);

// ---------------------------------------------------------------------------
// Language-conditioned offline Q-learning: Q(s0, s, l, a) in (0, 1), trained
// on balanced batches of terminal positives (target exactly 1) and earlier
// transitions bootstrapped through a periodically refreshed target network.

struct QModel {
  nn::MLPParams net;
  double gamma = 0.9;
  int action_samples = 100;  // candidate actions for max / argmax
  lang::EncoderMode encoder_mode = lang::EncoderMode::kLexicon;
  std::uint64_t lang_seed = lang::kDefaultLangSeed;
  std::string dataset_hash;
};

struct QTrainConfig {
  int max_steps = 12000;
  int batch_size = 8;  // half terminal, half earlier
  double learning_rate = 1e-4;
  double gamma = 0.9;
  int action_samples = 100;
  int target_refresh = 500;
  // Stop once the windowed Bellman loss changes by less than this fraction
  // between consecutive windows (after min_steps).
  int window = 500;
  double plateau_rel_change = 0.01;
  int min_steps = 2000;
  lang::EncoderMode encoder_mode = lang::EncoderMode::kLexicon;
  std::uint64_t lang_seed = lang::kDefaultLangSeed;
  std::string dataset_hash;
};

struct QCurvePoint {
  int step;
  double bellman_mse;  // mean over the window
};

struct QTrainResult {
  QModel model;
  std::vector<QCurvePoint> curves;
  int steps_run = 0;
  bool plateaued = false;
};

// [2*kStateDim + embed + kActionDim, 128, 128, 128, 1], sigmoid output.
nn::MLPSpec q_net_spec();

struct QBatch {
  Eigen::MatrixXd x;        // rows: [s0 | s | emb | a]
  Eigen::VectorXd targets;  // 1 for terminal rows, gamma * max target-Q else
};

// Half terminal transitions (target 1, no bootstrap), half earlier ones
// (target gamma * max over action_samples target-net queries at s_{t+1}).
QBatch build_q_batch(const data::Dataset& d, const Eigen::MatrixXd& episode_embs,
                     const QTrainConfig& cfg, const nn::MLPParams& target_net, Rng& rng);

QTrainResult train_lcrl(const data::Dataset& d, const QTrainConfig& cfg, std::uint64_t seed);

// Argmax of Q over action_samples uniform candidate actions (first maximum).
sim::Action lcrl_act(const QModel& q, const sim::StateVec& s0, const sim::StateVec& s,
                     const Eigen::VectorXd& emb, Rng& rng);
sim::Action lcrl_act(const QModel& q, const sim::StateVec& s0, const sim::StateVec& s,
                     const std::string& instruction, Rng& rng);

void save_q(const QModel& q, const std::string& path);
QModel load_q(const std::string& path);

// ---------------------------------------------------------------------------
// Planner-pluggable rewards.

// Negative squared L2 distance of the full 9-vector to the goal state. The ee
// coordinates count too: matching the arm position is part of the cost, which
// is exactly the over-specification failure this baseline demonstrates.
plan::RewardFn goal_state_cost(const sim::SceneState& goal);

// The task's object displaced from s0 by twice the success threshold in the
// task direction (clipped to legal ranges); everything else, ee included,
// kept at its s0 value.
sim::SceneState make_goal_state(const sim::TaskSpec& task, const sim::SceneState& s0);

// Signed progress of the task's object coordinate relative to s0; zero at s0.
plan::RewardFn oracle_reward(const sim::TaskSpec& task);

// oracle_reward minus approach_weight times the final ee distance to the
// task's engagement point (the handle, or the mug's push side). The shaping
// gives CEM a gradient before first contact.
plan::RewardFn shaped_oracle_reward(const sim::TaskSpec& task, double approach_weight = 0.05);

sim::Action random_policy(Rng& rng);

}  // namespace lorel::base
