#pragma once

#include <Eigen/Core>
#include <array>
#include <functional>
#include <vector>

#include "lorel/dynamics.hpp"
#include "lorel/rng.hpp"
#include "lorel/tablesim.hpp"

namespace lorel::plan {

// Scores a batch of candidate final states (rows) against the episode's
// initial state. The instruction, if any, is bound when the function is made.
using RewardFn = std::function<Eigen::VectorXd(const sim::StateVec& s0,
                                               const Eigen::MatrixXd& finals)>;

enum class PlanMode { kOpenLoop, kMpc };

struct PlanConfig {
  int samples = 200;
  int horizon = 20;
  int cem_iters = 3;
  double elite_frac = 0.1;
  PlanMode mode = PlanMode::kOpenLoop;
  int episode_T = 20;
  int replan_every = 0;  // mpc: actions executed per plan; 0 means the full horizon

  static PlanConfig sim_defaults() { return {}; }
  static PlanConfig robot_defaults() {
    PlanConfig cfg;
    cfg.samples = 48;
    cfg.horizon = 5;
    cfg.mode = PlanMode::kMpc;
    cfg.episode_T = 30;
    return cfg;
  }
};

inline constexpr double kCemInitStd = 0.025;  // half the per-axis action bound
inline constexpr double kCemStdFloor = 1e-3;

// Roll every candidate row out from rollout_start and score only the final
// state against reward_s0. The two anchors coincide except under MPC, where
// planning restarts mid-episode but the reward stays conditioned on the
// episode's first state.
Eigen::VectorXd score_sequences(const sim::StateVec& rollout_start, const sim::StateVec& reward_s0,
                                const Eigen::MatrixXd& candidates, const dyn::Stepper& stepper,
                                const RewardFn& reward_fn);

struct CEMResult {
  std::vector<std::array<double, 2>> actions;
  double score = 0.0;
  std::vector<double> iter_best;  // best score seen so far, after each iteration
};

// Gaussian CEM: mean 0 / std kCemInitStd per action cell, samples clipped to
// the action bounds, top ceil(elite_frac * M) refit mean and std (floored),
// best-scoring sequence across all iterations wins.
CEMResult cem_plan(const sim::StateVec& rollout_start, const sim::StateVec& reward_s0,
                   const dyn::Stepper& stepper, const RewardFn& reward_fn, const PlanConfig& cfg,
                   Rng& rng);

struct EpisodeResult {
  std::vector<sim::SceneState> trajectory;       // episode_T + 1 states
  std::vector<std::array<double, 2>> actions;    // episode_T actions
  bool success = false;                          // task oracle over any state
  int plan_calls = 0;
};

// Open-loop: one plan over the whole episode horizon, then execute it in the
// real simulator. MPC: plan cfg.horizon, execute replan_every, repeat; every
// reward query stays conditioned on the episode's initial state.
EpisodeResult run_episode(const sim::TaskSpec& task, const sim::SceneState& s0,
                          const PlanConfig& cfg, const dyn::Stepper& stepper,
                          const RewardFn& reward_fn, Rng& rng);

}  // namespace lorel::plan
