#include "lorel/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lorel/errors.hpp"

namespace lorel::plan {

namespace {

void validate(const PlanConfig& cfg) {
  if (cfg.samples < 1) throw ConfigError("planner: samples must be positive");
  if (cfg.horizon < 0) throw ConfigError("planner: horizon must be non-negative");
  if (cfg.cem_iters < 1) throw ConfigError("planner: cem_iters must be positive");
  if (cfg.elite_frac <= 0.0 || cfg.elite_frac > 1.0)
    throw ConfigError("planner: elite_frac must be in (0, 1]");
  if (cfg.episode_T < 0) throw ConfigError("planner: episode_T must be non-negative");
  if (cfg.replan_every < 0) throw ConfigError("planner: replan_every must be non-negative");
}

}  // namespace

Eigen::VectorXd score_sequences(const sim::StateVec& rollout_start, const sim::StateVec& reward_s0,
                                const Eigen::MatrixXd& candidates, const dyn::Stepper& stepper,
                                const RewardFn& reward_fn) {
  return reward_fn(reward_s0, stepper.finals(rollout_start, candidates));
}

CEMResult cem_plan(const sim::StateVec& rollout_start, const sim::StateVec& reward_s0,
                   const dyn::Stepper& stepper, const RewardFn& reward_fn, const PlanConfig& cfg,
                   Rng& rng) {
  validate(cfg);
  const int M = cfg.samples;
  const int H = cfg.horizon;
  const int n_elite = static_cast<int>(std::ceil(cfg.elite_frac * M));

  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(H, 2);
  Eigen::MatrixXd stdev = Eigen::MatrixXd::Constant(H, 2, kCemInitStd);

  CEMResult best;
  best.score = -std::numeric_limits<double>::infinity();

  Eigen::MatrixXd cand(M, 2 * H);
  for (int iter = 0; iter < cfg.cem_iters; ++iter) {
    for (int m = 0; m < M; ++m)
      for (int t = 0; t < H; ++t)
        for (int k = 0; k < 2; ++k)
          cand(m, 2 * t + k) = std::clamp(mean(t, k) + stdev(t, k) * rng.normal(),
                                          -sim::kActionBound, sim::kActionBound);

    Eigen::VectorXd scores = score_sequences(rollout_start, reward_s0, cand, stepper, reward_fn);
    std::vector<int> order(static_cast<std::size_t>(M));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores(a) > scores(b); });

    if (scores(order[0]) > best.score) {
      best.score = scores(order[0]);
      best.actions.assign(static_cast<std::size_t>(H), {0.0, 0.0});
      for (int t = 0; t < H; ++t)
        best.actions[static_cast<std::size_t>(t)] = {cand(order[0], 2 * t),
                                                     cand(order[0], 2 * t + 1)};
    }
    best.iter_best.push_back(best.score);

    for (int t = 0; t < H; ++t) {
      for (int k = 0; k < 2; ++k) {
        double m1 = 0.0, m2 = 0.0;
        for (int e = 0; e < n_elite; ++e) {
          double v = cand(order[static_cast<std::size_t>(e)], 2 * t + k);
          m1 += v;
          m2 += v * v;
        }
        m1 /= n_elite;
        m2 /= n_elite;
        mean(t, k) = m1;
        stdev(t, k) = std::max(kCemStdFloor, std::sqrt(std::max(0.0, m2 - m1 * m1)));
      }
    }
  }
  if (H == 0) best.actions.clear();
  return best;
}

EpisodeResult run_episode(const sim::TaskSpec& task, const sim::SceneState& s0,
                          const PlanConfig& cfg, const dyn::Stepper& stepper,
                          const RewardFn& reward_fn, Rng& rng) {
  validate(cfg);
  if (cfg.horizon > cfg.episode_T) throw ConfigError("planner: horizon exceeds episode length");

  EpisodeResult out;
  out.trajectory.reserve(static_cast<std::size_t>(cfg.episode_T) + 1);
  out.trajectory.push_back(s0);
  sim::StateVec v0 = sim::state_vector(s0);
  sim::SceneState cur = s0;

  auto execute = [&](const std::array<double, 2>& a) {
    cur = sim::step(cur, {{a[0], a[1]}});
    out.trajectory.push_back(cur);
    out.actions.push_back(a);
  };

  if (cfg.mode == PlanMode::kOpenLoop) {
    PlanConfig pc = cfg;
    pc.horizon = cfg.episode_T;
    CEMResult planned = cem_plan(v0, v0, stepper, reward_fn, pc, rng);
    out.plan_calls = 1;
    for (const auto& a : planned.actions) execute(a);
  } else {
    if (cfg.horizon < 1 && cfg.episode_T > 0)
      throw ConfigError("planner: mpc needs a positive horizon");
    int chunk = cfg.replan_every > 0 ? cfg.replan_every : cfg.horizon;
    if (chunk > cfg.horizon) throw ConfigError("planner: replan_every exceeds horizon");
    int executed = 0;
    while (executed < cfg.episode_T) {
      PlanConfig pc = cfg;
      pc.horizon = std::min(cfg.horizon, cfg.episode_T - executed);
      CEMResult planned = cem_plan(sim::state_vector(cur), v0, stepper, reward_fn, pc, rng);
      out.plan_calls += 1;
      int todo = std::min(static_cast<int>(planned.actions.size()),
                          std::min(chunk, cfg.episode_T - executed));
      for (int i = 0; i < todo; ++i) execute(planned.actions[static_cast<std::size_t>(i)]);
      executed += todo;
    }
  }

  for (const auto& s : out.trajectory) {
    if (sim::success(task, s0, s)) {
      out.success = true;
      break;
    }
  }
  return out;
}

}  // namespace lorel::plan
