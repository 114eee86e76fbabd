#include "lorel/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "json.hpp"
#include "lorel/errors.hpp"

namespace lorel::base {

namespace {

Eigen::RowVectorXd as_row(const sim::StateVec& v) {
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(), kStateDim);
}

// One embedding row per episode, under the given encoder settings.
Eigen::MatrixXd episode_embeddings(const data::Dataset& d, lang::EncoderMode mode,
                                   std::uint64_t seed) {
  lang::Encoder enc(mode, lang::Lexicon::builtin(), seed);
  Eigen::MatrixXd embs(static_cast<Eigen::Index>(d.episodes.size()), lang::kEmbedDim);
  for (std::size_t e = 0; e < d.episodes.size(); ++e)
    embs.row(static_cast<Eigen::Index>(e)) = enc.encode(d.episodes[e].instruction).transpose();
  return embs;
}

void split_episodes(std::size_t n, std::uint64_t seed, std::vector<std::size_t>& train,
                    std::vector<std::size_t>& held) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
  std::size_t n_held = std::max<std::size_t>(1, n / 10);
  train.assign(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(n_held));
  held.assign(idx.end() - static_cast<std::ptrdiff_t>(n_held), idx.end());
}

// Every (s_t, a_t) pair of the chosen episodes as [s | emb] -> a matrices.
void flatten_bc(const data::Dataset& d, const Eigen::MatrixXd& embs,
                const std::vector<std::size_t>& eps, Eigen::MatrixXd& X, Eigen::MatrixXd& A) {
  std::size_t n = 0;
  for (std::size_t e : eps) n += d.episodes[e].actions.size();
  X.resize(static_cast<Eigen::Index>(n), kStateDim + lang::kEmbedDim);
  A.resize(static_cast<Eigen::Index>(n), kActionDim);
  Eigen::Index row = 0;
  for (std::size_t e : eps) {
    const data::Episode& ep = d.episodes[e];
    for (std::size_t t = 0; t < ep.actions.size(); ++t, ++row) {
      X.row(row).head(kStateDim) = as_row(ep.states[t]);
      X.row(row).tail(lang::kEmbedDim) = embs.row(static_cast<Eigen::Index>(e));
      A(row, 0) = ep.actions[t][0];
      A(row, 1) = ep.actions[t][1];
    }
  }
}

double mse_of(const nn::MLPParams& net, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  return (nn::forward(net, X) - Y).squaredNorm() / static_cast<double>(Y.size());
}

}  // namespace

nn::MLPSpec bc_net_spec() {
  return nn::mlp_spec({kStateDim + lang::kEmbedDim, 128, 128, 128, kActionDim}, nn::Act::kLinear);
}

BCTrainResult train_lcbc(const data::Dataset& d, const BCTrainConfig& cfg, std::uint64_t seed) {
  if (cfg.steps < 0 || cfg.batch_size < 1 || cfg.eval_every < 1)
    throw ConfigError("lcbc: bad training configuration");
  if (d.episodes.size() < 2) throw DataError("lcbc: need at least two episodes");

  Eigen::MatrixXd embs = episode_embeddings(d, cfg.encoder_mode, cfg.lang_seed);
  std::vector<std::size_t> train_eps, held_eps;
  split_episodes(d.episodes.size(), mix_seed(seed, 0xBC001), train_eps, held_eps);
  Eigen::MatrixXd Xtr, Atr, Xhe, Ahe;
  flatten_bc(d, embs, train_eps, Xtr, Atr);
  flatten_bc(d, embs, held_eps, Xhe, Ahe);
  if (Xtr.rows() == 0 || Xhe.rows() == 0) throw DataError("lcbc: a split has no transitions");

  Rng init_rng(mix_seed(seed, 0xBC002));
  nn::MLPParams params = nn::init_params(bc_net_spec(), init_rng);
  nn::AdamState opt = nn::init_adam(params, cfg.learning_rate);
  Rng batch_rng(mix_seed(seed, 0xBC003));

  BCTrainResult result;
  nn::MLPParams best = params;
  result.best_heldout_mse = mse_of(params, Xhe, Ahe);

  Eigen::MatrixXd xb(cfg.batch_size, Xtr.cols());
  Eigen::MatrixXd yb(cfg.batch_size, kActionDim);
  double loss_acc = 0.0;
  int loss_n = 0;
  for (int t = 1; t <= cfg.steps; ++t) {
    for (int k = 0; k < cfg.batch_size; ++k) {
      Eigen::Index r = static_cast<Eigen::Index>(
          batch_rng.uniform_int(static_cast<std::uint64_t>(Xtr.rows())));
      xb.row(k) = Xtr.row(r);
      for (int i = 0; i < kStateDim; ++i)
        xb(k, i) += batch_rng.normal(0.0, cfg.state_noise_sigma);
      yb.row(k) = Atr.row(r);
    }
    nn::ForwardCache cache;
    Eigen::MatrixXd err = nn::forward(params, xb, false, nullptr, &cache) - yb;
    nn::Grads grads = nn::backward(params, cache, 2.0 * err / static_cast<double>(yb.size()));
    nn::adam_step(params, grads, opt);
    loss_acc += err.squaredNorm() / static_cast<double>(yb.size());
    loss_n += 1;
    if (t % cfg.eval_every == 0 || t == cfg.steps) {
      BCCurvePoint pt{t, loss_acc / loss_n, mse_of(params, Xhe, Ahe)};
      result.curves.push_back(pt);
      loss_acc = 0.0;
      loss_n = 0;
      if (pt.heldout_mse <= result.best_heldout_mse) {
        result.best_heldout_mse = pt.heldout_mse;
        result.best_step = t;
        best = params;
      }
    }
  }

  result.policy.net = std::move(best);
  result.policy.encoder_mode = cfg.encoder_mode;
  result.policy.lang_seed = cfg.lang_seed;
  result.policy.dataset_hash = cfg.dataset_hash;
  return result;
}

sim::Action bc_act(const BCPolicy& p, const sim::StateVec& s, const Eigen::VectorXd& emb) {
  Eigen::MatrixXd x(1, kStateDim + lang::kEmbedDim);
  x.row(0).head(kStateDim) = as_row(s);
  x.row(0).tail(lang::kEmbedDim) = emb.transpose();
  Eigen::MatrixXd out = nn::forward(p.net, x);
  return {{std::clamp(out(0, 0), -sim::kActionBound, sim::kActionBound),
           std::clamp(out(0, 1), -sim::kActionBound, sim::kActionBound)}};
}

sim::Action bc_act(const BCPolicy& p, const sim::StateVec& s, const std::string& instruction) {
  lang::Encoder enc(p.encoder_mode, lang::Lexicon::builtin(), p.lang_seed);
  return bc_act(p, s, enc.encode(instruction));
}

void save_bc(const BCPolicy& p, const std::string& path) {
  nn::save_params(p.net, path);
  nlohmann::json j;
  j["encoder_mode"] = lang::encoder_mode_name(p.encoder_mode);
  j["lang_seed"] = p.lang_seed;
  j["dataset_hash"] = p.dataset_hash;
  std::ofstream f(path + ".json", std::ios::binary);
  f << j.dump(2) << '\n';
  if (!f) throw CheckpointError("lcbc manifest: write failed on " + path + ".json");
}

BCPolicy load_bc(const std::string& path) {
  BCPolicy p;
  p.net = nn::load_params(path);
  std::ifstream f(path + ".json", std::ios::binary);
  if (!f) throw CheckpointError("lcbc manifest: cannot open " + path + ".json");
  try {
    nlohmann::json j;
    f >> j;
    p.encoder_mode = lang::encoder_mode_from_name(j.at("encoder_mode").get<std::string>());
    p.lang_seed = j.at("lang_seed").get<std::uint64_t>();
    p.dataset_hash = j.at("dataset_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("lcbc manifest: ") + e.what());
  }
  return p;
}

nn::MLPSpec q_net_spec() {
  return nn::mlp_spec({2 * kStateDim + lang::kEmbedDim + kActionDim, 128, 128, 128, 1},
                      nn::Act::kSigmoid);
}

QBatch build_q_batch(const data::Dataset& d, const Eigen::MatrixXd& episode_embs,
                     const QTrainConfig& cfg, const nn::MLPParams& target_net, Rng& rng) {
  if (cfg.batch_size < 2 || cfg.batch_size % 2 != 0)
    throw ConfigError("lcrl: batch_size must be a positive multiple of 2");
  if (d.episodes.empty()) throw DataError("lcrl: empty dataset");
  bool any_long = std::any_of(d.episodes.begin(), d.episodes.end(),
                              [](const data::Episode& e) { return e.actions.size() >= 2; });
  if (!any_long) throw DataError("lcrl: no episode long enough for bootstrapped targets");

  const int in_dim = 2 * kStateDim + lang::kEmbedDim + kActionDim;
  const int n_term = cfg.batch_size / 2;
  QBatch b;
  b.x.resize(cfg.batch_size, in_dim);
  b.targets.resize(cfg.batch_size);

  auto fill_row = [&](int row, std::size_t e, std::size_t t) {
    const data::Episode& ep = d.episodes[e];
    b.x.row(row).segment(0, kStateDim) = as_row(ep.states.front());
    b.x.row(row).segment(kStateDim, kStateDim) = as_row(ep.states[t]);
    b.x.row(row).segment(2 * kStateDim, lang::kEmbedDim) =
        episode_embs.row(static_cast<Eigen::Index>(e));
    b.x(row, in_dim - 2) = ep.actions[t][0];
    b.x(row, in_dim - 1) = ep.actions[t][1];
  };

  for (int k = 0; k < n_term; ++k) {
    std::size_t e = rng.uniform_int(d.episodes.size());
    fill_row(k, e, d.episodes[e].actions.size() - 1);
    b.targets(k) = 1.0;  // entering the annotated final state
  }

  Eigen::MatrixXd boot(cfg.action_samples, in_dim);
  for (int k = n_term; k < cfg.batch_size; ++k) {
    std::size_t e;
    do {
      e = rng.uniform_int(d.episodes.size());
    } while (d.episodes[e].actions.size() < 2);
    const data::Episode& ep = d.episodes[e];
    std::size_t t = rng.uniform_int(ep.actions.size() - 1);  // 0..T-2
    fill_row(k, e, t);

    boot.leftCols(kStateDim).rowwise() = as_row(ep.states.front());
    boot.middleCols(kStateDim, kStateDim).rowwise() = as_row(ep.states[t + 1]);
    boot.middleCols(2 * kStateDim, lang::kEmbedDim).rowwise() =
        episode_embs.row(static_cast<Eigen::Index>(e));
    for (int m = 0; m < cfg.action_samples; ++m) {
      boot(m, in_dim - 2) = rng.uniform(-sim::kActionBound, sim::kActionBound);
      boot(m, in_dim - 1) = rng.uniform(-sim::kActionBound, sim::kActionBound);
    }
    b.targets(k) = cfg.gamma * nn::forward(target_net, boot).maxCoeff();
  }
  return b;
}

QTrainResult train_lcrl(const data::Dataset& d, const QTrainConfig& cfg, std::uint64_t seed) {
  if (cfg.max_steps < 0 || cfg.action_samples < 1 || cfg.target_refresh < 1 || cfg.window < 1)
    throw ConfigError("lcrl: bad training configuration");
  if (cfg.gamma < 0.0 || cfg.gamma >= 1.0) throw ConfigError("lcrl: gamma must be in [0, 1)");

  Eigen::MatrixXd embs = episode_embeddings(d, cfg.encoder_mode, cfg.lang_seed);
  Rng init_rng(mix_seed(seed, 0x9C001));
  nn::MLPParams params = nn::init_params(q_net_spec(), init_rng);
  nn::MLPParams target = params;
  nn::AdamState opt = nn::init_adam(params, cfg.learning_rate);
  Rng batch_rng(mix_seed(seed, 0x9C002));

  QTrainResult result;
  double prev_window = -1.0;
  double loss_acc = 0.0;
  int loss_n = 0;
  for (int t = 1; t <= cfg.max_steps; ++t) {
    if ((t - 1) % cfg.target_refresh == 0) target = params;
    QBatch batch = build_q_batch(d, embs, cfg, target, batch_rng);
    nn::ForwardCache cache;
    Eigen::MatrixXd q = nn::forward(params, batch.x, false, nullptr, &cache);
    Eigen::MatrixXd err = q.col(0) - batch.targets;
    nn::Grads grads = nn::backward(params, cache, 2.0 * err / static_cast<double>(err.rows()));
    nn::adam_step(params, grads, opt);
    loss_acc += err.squaredNorm() / static_cast<double>(err.rows());
    loss_n += 1;
    result.steps_run = t;
    if (t % cfg.window == 0 || t == cfg.max_steps) {
      double mean = loss_acc / loss_n;
      result.curves.push_back({t, mean});
      loss_acc = 0.0;
      loss_n = 0;
      if (prev_window >= 0.0 && t >= cfg.min_steps &&
          std::abs(mean - prev_window) < cfg.plateau_rel_change * std::max(prev_window, 1e-12)) {
        result.plateaued = true;
        break;
      }
      prev_window = mean;
    }
  }

  result.model.net = std::move(params);
  result.model.gamma = cfg.gamma;
  result.model.action_samples = cfg.action_samples;
  result.model.encoder_mode = cfg.encoder_mode;
  result.model.lang_seed = cfg.lang_seed;
  result.model.dataset_hash = cfg.dataset_hash;
  return result;
}

sim::Action lcrl_act(const QModel& q, const sim::StateVec& s0, const sim::StateVec& s,
                     const Eigen::VectorXd& emb, Rng& rng) {
  const int in_dim = 2 * kStateDim + lang::kEmbedDim + kActionDim;
  Eigen::MatrixXd x(q.action_samples, in_dim);
  x.leftCols(kStateDim).rowwise() = as_row(s0);
  x.middleCols(kStateDim, kStateDim).rowwise() = as_row(s);
  x.middleCols(2 * kStateDim, lang::kEmbedDim).rowwise() = emb.transpose();
  for (int m = 0; m < q.action_samples; ++m) {
    x(m, in_dim - 2) = rng.uniform(-sim::kActionBound, sim::kActionBound);
    x(m, in_dim - 1) = rng.uniform(-sim::kActionBound, sim::kActionBound);
  }
  Eigen::Index best = 0;
  nn::forward(q.net, x).col(0).maxCoeff(&best);
  return {{x(best, in_dim - 2), x(best, in_dim - 1)}};
}

sim::Action lcrl_act(const QModel& q, const sim::StateVec& s0, const sim::StateVec& s,
                     const std::string& instruction, Rng& rng) {
  lang::Encoder enc(q.encoder_mode, lang::Lexicon::builtin(), q.lang_seed);
  return lcrl_act(q, s0, s, enc.encode(instruction), rng);
}

void save_q(const QModel& q, const std::string& path) {
  nn::save_params(q.net, path);
  nlohmann::json j;
  j["gamma"] = q.gamma;
  j["action_samples"] = q.action_samples;
  j["encoder_mode"] = lang::encoder_mode_name(q.encoder_mode);
  j["lang_seed"] = q.lang_seed;
  j["dataset_hash"] = q.dataset_hash;
  std::ofstream f(path + ".json", std::ios::binary);
  f << j.dump(2) << '\n';
  if (!f) throw CheckpointError("lcrl manifest: write failed on " + path + ".json");
}

QModel load_q(const std::string& path) {
  QModel q;
  q.net = nn::load_params(path);
  std::ifstream f(path + ".json", std::ios::binary);
  if (!f) throw CheckpointError("lcrl manifest: cannot open " + path + ".json");
  try {
    nlohmann::json j;
    f >> j;
    q.gamma = j.at("gamma").get<double>();
    q.action_samples = j.at("action_samples").get<int>();
    q.encoder_mode = lang::encoder_mode_from_name(j.at("encoder_mode").get<std::string>());
    q.lang_seed = j.at("lang_seed").get<std::uint64_t>();
    q.dataset_hash = j.at("dataset_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("lcrl manifest: ") + e.what());
  }
  return q;
}

plan::RewardFn goal_state_cost(const sim::SceneState& goal) {
  sim::StateVec g = sim::state_vector(goal);
  Eigen::RowVectorXd gr = as_row(g);
  return [gr](const sim::StateVec&, const Eigen::MatrixXd& finals) {
    return (-(finals.rowwise() - gr).rowwise().squaredNorm()).eval();
  };
}

sim::SceneState make_goal_state(const sim::TaskSpec& task, const sim::SceneState& s0) {
  sim::StateVec v = sim::state_vector(s0);
  double shift = 2.0 * task.threshold;
  switch (task.id) {
    case sim::TaskId::kCloseDrawer:   v[2] -= shift; break;
    case sim::TaskId::kOpenDrawer:    v[2] += shift; break;
    case sim::TaskId::kFaucetLeft:    v[3] += shift; break;
    case sim::TaskId::kFaucetRight:   v[3] -= shift; break;
    case sim::TaskId::kBlackMugRight: v[4] += shift; break;
    case sim::TaskId::kWhiteMugDown:  v[7] -= shift; break;
  }
  return sim::state_from_vector(sim::clip_state_vector(v));
}

namespace {

// (column, sign) of each task's progress coordinate.
std::pair<int, double> progress_axis(sim::TaskId id) {
  switch (id) {
    case sim::TaskId::kCloseDrawer:   return {2, -1.0};
    case sim::TaskId::kOpenDrawer:    return {2, +1.0};
    case sim::TaskId::kFaucetLeft:    return {3, +1.0};
    case sim::TaskId::kFaucetRight:   return {3, -1.0};
    case sim::TaskId::kBlackMugRight: return {4, +1.0};
    case sim::TaskId::kWhiteMugDown:  return {7, -1.0};
  }
  throw std::logic_error("progress_axis: bad task id");
}

// Where the ee must be to engage the task's object, given the final state.
void approach_point(sim::TaskId id, const Eigen::MatrixXd& finals, Eigen::ArrayXd& tx,
                    Eigen::ArrayXd& ty) {
  switch (id) {
    case sim::TaskId::kCloseDrawer:
    case sim::TaskId::kOpenDrawer:
      tx = Eigen::ArrayXd::Constant(finals.rows(), sim::kDrawerAnchor.x);
      ty = sim::kDrawerAnchor.y + sim::kDrawerAxisSign * finals.col(2).array();
      return;
    case sim::TaskId::kFaucetLeft:
    case sim::TaskId::kFaucetRight:
      tx = sim::kFaucetBase.x - sim::kFaucetLever * finals.col(3).array().sin();
      ty = sim::kFaucetBase.y + sim::kFaucetLever * finals.col(3).array().cos();
      return;
    case sim::TaskId::kBlackMugRight:  // push from the left
      tx = finals.col(4).array() - sim::kMugRadius;
      ty = finals.col(5).array();
      return;
    case sim::TaskId::kWhiteMugDown:  // push from above
      tx = finals.col(6).array();
      ty = finals.col(7).array() + sim::kMugRadius;
      return;
  }
  throw std::logic_error("approach_point: bad task id");
}

}  // namespace

plan::RewardFn oracle_reward(const sim::TaskSpec& task) {
  auto [col, sign] = progress_axis(task.id);
  return [col, sign](const sim::StateVec& s0, const Eigen::MatrixXd& finals) {
    return (sign * (finals.col(col).array() - s0[static_cast<std::size_t>(col)])).matrix().eval();
  };
}

plan::RewardFn shaped_oracle_reward(const sim::TaskSpec& task, double approach_weight) {
  auto [col, sign] = progress_axis(task.id);
  sim::TaskId id = task.id;
  return [col, sign, id, approach_weight](const sim::StateVec& s0,
                                          const Eigen::MatrixXd& finals) {
    Eigen::ArrayXd progress = sign * (finals.col(col).array() - s0[static_cast<std::size_t>(col)]);
    Eigen::ArrayXd tx, ty;
    approach_point(id, finals, tx, ty);
    Eigen::ArrayXd d =
        ((finals.col(0).array() - tx).square() + (finals.col(1).array() - ty).square()).sqrt();
    return (progress - approach_weight * d).matrix().eval();
  };
}

sim::Action random_policy(Rng& rng) { return sim::random_action(rng); }

}  // namespace lorel::base
