#include "lorel/dynamics.hpp"

#include <fstream>
#include <numeric>

#include "json.hpp"
#include "lorel/errors.hpp"

namespace lorel::dyn {

namespace {

void validate(const TrainConfig& cfg) {
  if (cfg.steps < 0) throw ConfigError("dynamics: steps must be non-negative");
  if (cfg.batch_size < 1) throw ConfigError("dynamics: batch_size must be positive");
  if (cfg.eval_every < 1) throw ConfigError("dynamics: eval_every must be positive");
  double prev = 0.0;
  for (const auto& [frac, mult] : cfg.lr_schedule) {
    if (frac < prev || frac > 1.0) throw ConfigError("dynamics: lr_schedule fractions must ascend within [0, 1]");
    if (mult <= 0.0) throw ConfigError("dynamics: lr_schedule multipliers must be positive");
    prev = frac;
  }
}

// All one-step transitions of the given episodes: X rows [s | a], Y rows the
// state residual s' - s.
void flatten(const std::vector<const data::Episode*>& eps, Eigen::MatrixXd& X,
             Eigen::MatrixXd& Y) {
  std::size_t n = 0;
  for (const auto* e : eps) n += e->actions.size();
  X.resize(static_cast<Eigen::Index>(n), kStateDim + kActionDim);
  Y.resize(static_cast<Eigen::Index>(n), kStateDim);
  Eigen::Index row = 0;
  for (const auto* e : eps) {
    for (std::size_t t = 0; t < e->actions.size(); ++t, ++row) {
      for (int i = 0; i < kStateDim; ++i) {
        X(row, i) = e->states[t][static_cast<std::size_t>(i)];
        Y(row, i) = e->states[t + 1][static_cast<std::size_t>(i)] -
                    e->states[t][static_cast<std::size_t>(i)];
      }
      X(row, kStateDim) = e->actions[t][0];
      X(row, kStateDim + 1) = e->actions[t][1];
    }
  }
}

double mse(const nn::MLPParams& net, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  return (nn::forward(net, X) - Y).squaredNorm() / static_cast<double>(Y.size());
}

}  // namespace

nn::MLPSpec dynamics_net_spec() {
  return nn::mlp_spec({kStateDim + kActionDim, 128, 128, 128, kStateDim}, nn::Act::kLinear);
}

TrainResult train(const data::Dataset& d, const TrainConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  if (d.episodes.size() < 2) throw DataError("dynamics train: need at least two episodes");

  std::vector<std::size_t> idx(d.episodes.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng split_rng(mix_seed(seed, 0xD54A1));
  for (std::size_t i = idx.size() - 1; i > 0; --i)
    std::swap(idx[i], idx[split_rng.uniform_int(i + 1)]);
  std::size_t n_held = std::max<std::size_t>(1, idx.size() / 10);

  std::vector<const data::Episode*> train_eps, held_eps;
  for (std::size_t k = 0; k < idx.size(); ++k)
    (k < idx.size() - n_held ? train_eps : held_eps).push_back(&d.episodes[idx[k]]);

  Eigen::MatrixXd Xtr, Ytr, Xhe, Yhe;
  flatten(train_eps, Xtr, Ytr);
  flatten(held_eps, Xhe, Yhe);
  if (Xtr.rows() == 0 || Xhe.rows() == 0)
    throw DataError("dynamics train: a split has no transitions");

  Rng init_rng(mix_seed(seed, 0xD54A2));
  nn::MLPParams params = nn::init_params(dynamics_net_spec(), init_rng);
  params.W.back().setZero();  // start exactly at the identity map
  params.b.back().setZero();
  nn::AdamState opt = nn::init_adam(params, cfg.learning_rate);
  Rng batch_rng(mix_seed(seed, 0xD54A3));

  TrainResult result;
  nn::MLPParams best = params;
  result.best_heldout_mse = mse(params, Xhe, Yhe);

  std::vector<std::pair<int, double>> lr_stages;  // (first step, learning rate)
  for (const auto& [frac, mult] : cfg.lr_schedule)
    lr_stages.emplace_back(static_cast<int>(frac * cfg.steps), cfg.learning_rate * mult);

  Eigen::MatrixXd xb(cfg.batch_size, kStateDim + kActionDim);
  Eigen::MatrixXd yb(cfg.batch_size, kStateDim);
  double loss_acc = 0.0;
  int loss_n = 0;
  std::size_t stage = 0;
  for (int t = 1; t <= cfg.steps; ++t) {
    while (stage < lr_stages.size() && t >= lr_stages[stage].first)
      opt.learning_rate = lr_stages[stage++].second;
    for (int k = 0; k < cfg.batch_size; ++k) {
      Eigen::Index r = static_cast<Eigen::Index>(
          batch_rng.uniform_int(static_cast<std::uint64_t>(Xtr.rows())));
      xb.row(k) = Xtr.row(r);
      yb.row(k) = Ytr.row(r);
    }
    nn::ForwardCache cache;
    Eigen::MatrixXd err = nn::forward(params, xb, false, nullptr, &cache) - yb;
    double loss = err.squaredNorm() / static_cast<double>(yb.size());
    nn::Grads grads = nn::backward(params, cache, 2.0 * err / static_cast<double>(yb.size()));
    nn::adam_step(params, grads, opt);
    loss_acc += loss;
    loss_n += 1;
    if (t % cfg.eval_every == 0 || t == cfg.steps) {
      CurvePoint pt{t, loss_acc / loss_n, mse(params, Xhe, Yhe)};
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

  result.model.net = std::move(best);
  result.model.dataset_hash = cfg.dataset_hash;
  return result;
}

Eigen::MatrixXd predict_step(const DynamicsModel& m, const Eigen::MatrixXd& states,
                             const Eigen::MatrixXd& actions) {
  if (states.cols() != kStateDim) throw ShapeError("predict_step: states must have 9 columns");
  if (actions.cols() != kActionDim || actions.rows() != states.rows())
    throw ShapeError("predict_step: actions must be rows x 2 matching states");
  Eigen::MatrixXd x(states.rows(), kStateDim + kActionDim);
  x.leftCols(kStateDim) = states;
  x.rightCols(kActionDim) = actions;
  Eigen::MatrixXd next = states + nn::forward(m.net, x);
  for (Eigen::Index r = 0; r < next.rows(); ++r) {
    sim::StateVec v;
    for (int i = 0; i < kStateDim; ++i) v[static_cast<std::size_t>(i)] = next(r, i);
    v = sim::clip_state_vector(v);
    for (int i = 0; i < kStateDim; ++i) next(r, i) = v[static_cast<std::size_t>(i)];
  }
  return next;
}

std::vector<sim::StateVec> rollout(const DynamicsModel& m, const sim::StateVec& s0,
                                   const std::vector<std::array<double, 2>>& actions) {
  std::vector<sim::StateVec> states;
  states.reserve(actions.size() + 1);
  states.push_back(s0);
  Eigen::MatrixXd s(1, kStateDim);
  for (int i = 0; i < kStateDim; ++i) s(0, i) = s0[static_cast<std::size_t>(i)];
  Eigen::MatrixXd a(1, kActionDim);
  for (const auto& act : actions) {
    a(0, 0) = act[0];
    a(0, 1) = act[1];
    s = predict_step(m, s, a);
    sim::StateVec v;
    for (int i = 0; i < kStateDim; ++i) v[static_cast<std::size_t>(i)] = s(0, i);
    states.push_back(v);
  }
  return states;
}

Eigen::MatrixXd LearnedStepper::finals(const sim::StateVec& s0,
                                       const Eigen::MatrixXd& candidates) const {
  if (candidates.cols() % 2 != 0)
    throw ShapeError("stepper: candidate rows must hold (x, y) action pairs");
  Eigen::Index M = candidates.rows();
  int H = static_cast<int>(candidates.cols() / 2);
  Eigen::MatrixXd s(M, kStateDim);
  s.rowwise() = Eigen::Map<const Eigen::RowVectorXd>(s0.data(), kStateDim);
  for (int t = 0; t < H; ++t) s = predict_step(*model_, s, candidates.middleCols(2 * t, 2));
  return s;
}

Eigen::MatrixXd GroundTruthStepper::finals(const sim::StateVec& s0,
                                           const Eigen::MatrixXd& candidates) const {
  if (candidates.cols() % 2 != 0)
    throw ShapeError("stepper: candidate rows must hold (x, y) action pairs");
  Eigen::Index M = candidates.rows();
  int H = static_cast<int>(candidates.cols() / 2);
  Eigen::MatrixXd out(M, kStateDim);
  for (Eigen::Index r = 0; r < M; ++r) {
    sim::SceneState s = sim::state_from_vector(s0);
    for (int t = 0; t < H; ++t)
      s = sim::step(s, {{candidates(r, 2 * t), candidates(r, 2 * t + 1)}});
    sim::StateVec v = sim::state_vector(s);
    for (int i = 0; i < kStateDim; ++i) out(r, i) = v[static_cast<std::size_t>(i)];
  }
  return out;
}

void save_model(const DynamicsModel& m, const std::string& path) {
  nn::save_params(m.net, path);
  nlohmann::json j;
  j["dataset_hash"] = m.dataset_hash;
  std::ofstream f(path + ".json", std::ios::binary);
  f << j.dump(2) << '\n';
  if (!f) throw CheckpointError("dynamics manifest: write failed on " + path + ".json");
}

DynamicsModel load_model(const std::string& path) {
  DynamicsModel m;
  m.net = nn::load_params(path);
  std::ifstream f(path + ".json", std::ios::binary);
  if (!f) throw CheckpointError("dynamics manifest: cannot open " + path + ".json");
  try {
    nlohmann::json j;
    f >> j;
    m.dataset_hash = j.at("dataset_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("dynamics manifest: ") + e.what());
  }
  return m;
}

}  // namespace lorel::dyn
