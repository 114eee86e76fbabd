#include "lorel/reward.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "lorel/errors.hpp"

namespace lorel::reward {

namespace {

constexpr double kClamp = 1e-7;

void validate(const TrainConfig& cfg) {
  if (cfg.alpha < 0.0 || cfg.alpha >= 0.5) throw ConfigError("reward: alpha must be in [0, 0.5)");
  if (cfg.batch_size < 4 || cfg.batch_size % 4 != 0)
    throw ConfigError("reward: batch_size must be a positive multiple of 4");
  if (cfg.probe_size < 4 || cfg.probe_size % 4 != 0)
    throw ConfigError("reward: probe_size must be a positive multiple of 4");
  if (cfg.steps < 0) throw ConfigError("reward: steps must be non-negative");
  if (cfg.eval_every < 1) throw ConfigError("reward: eval_every must be positive");
  if (cfg.state_noise_sigma < 0.0 || cfg.lang_noise_scale < 0.0)
    throw ConfigError("reward: noise scales must be non-negative");
}

Eigen::RowVectorXd as_row(const sim::StateVec& v) {
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(), kStateDim);
}

}  // namespace

nn::MLPSpec reward_net_spec() {
  return nn::mlp_spec({kInputDim, 128, 128, 128, 1}, nn::Act::kSigmoid, 0.2);
}

lang::Encoder make_encoder(const RewardModel& m) {
  return lang::Encoder(m.encoder_mode, lang::Lexicon::builtin(), m.lang_seed);
}

Example sample_positive(const data::Dataset& d, double alpha, Rng& rng) {
  if (d.episodes.empty()) throw DataError("sample_positive: empty dataset");
  if (alpha < 0.0 || alpha >= 0.5) throw ConfigError("sample_positive: alpha must be in [0, 0.5)");
  const data::Episode& e = d.episodes[rng.uniform_int(d.episodes.size())];
  int T = static_cast<int>(e.actions.size());
  int i_max = static_cast<int>(std::floor(alpha * T + 1e-9));
  int j_min = static_cast<int>(std::ceil((1.0 - alpha) * T - 1e-9));
  int i = 0, j = 0;
  do {
    i = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i_max) + 1));
    j = j_min + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(T - j_min) + 1));
  } while (j <= i);
  return {e.states[static_cast<std::size_t>(i)], e.states[static_cast<std::size_t>(j)],
          e.instruction, 1.0};
}

Example sample_cross_negative(const data::Dataset& d, const std::string& l, Rng& rng) {
  if (d.episodes.empty()) throw DataError("sample_cross_negative: empty dataset");
  auto draw = [&]() -> const data::Episode& {
    return d.episodes[rng.uniform_int(d.episodes.size())];
  };
  for (int k = 0; k < 64; ++k) {
    const data::Episode& e = draw();
    if (e.instruction != l) return {e.states.front(), e.states.back(), l, 0.0};
  }
  // A long run of matches: make sure a differing instruction exists at all.
  bool any = std::any_of(d.episodes.begin(), d.episodes.end(),
                         [&](const data::Episode& e) { return e.instruction != l; });
  if (!any) throw DataError("sample_cross_negative: every instruction equals the query");
  while (true) {
    const data::Episode& e = draw();
    if (e.instruction != l) return {e.states.front(), e.states.back(), l, 0.0};
  }
}

Example flipped_negative(const Example& pos) {
  return {pos.s, pos.s0, pos.instruction, 0.0};
}

Batch build_batch(const data::Dataset& d, const lang::Encoder& enc, const TrainConfig& cfg,
                  Rng& rng) {
  validate(cfg);
  double alpha = cfg.noisy_positives ? cfg.alpha : 0.0;
  int n_pos = cfg.batch_size / 2;
  int n_cross = cfg.batch_size / 4;
  int n_flip = cfg.batch_size / 4;
  if (!cfg.use_cross_negatives && !cfg.use_flipped_negatives) {
    n_pos = cfg.batch_size;
    n_cross = n_flip = 0;
  } else if (!cfg.use_cross_negatives) {
    n_flip += n_cross;
    n_cross = 0;
  } else if (!cfg.use_flipped_negatives) {
    n_cross += n_flip;
    n_flip = 0;
  }

  std::vector<Example> examples;
  examples.reserve(static_cast<std::size_t>(cfg.batch_size));
  for (int k = 0; k < n_pos; ++k) examples.push_back(sample_positive(d, alpha, rng));
  for (int k = 0; k < n_cross; ++k) {
    const data::Episode& q = d.episodes[rng.uniform_int(d.episodes.size())];
    examples.push_back(sample_cross_negative(d, q.instruction, rng));
  }
  for (int k = 0; k < n_flip; ++k)
    examples.push_back(flipped_negative(sample_positive(d, alpha, rng)));

  Batch b;
  b.x.resize(cfg.batch_size, kInputDim);
  b.y.resize(cfg.batch_size);
  for (int k = 0; k < cfg.batch_size; ++k) {
    const Example& ex = examples[static_cast<std::size_t>(k)];
    for (int i = 0; i < kStateDim; ++i)
      b.x(k, i) = ex.s0[static_cast<std::size_t>(i)] + rng.normal(0.0, cfg.state_noise_sigma);
    for (int i = 0; i < kStateDim; ++i)
      b.x(k, kStateDim + i) =
          ex.s[static_cast<std::size_t>(i)] + rng.normal(0.0, cfg.state_noise_sigma);
    Eigen::VectorXd emb = lang::perturb(enc.encode(ex.instruction), rng, cfg.lang_noise_scale);
    b.x.row(k).segment(2 * kStateDim, lang::kEmbedDim) = emb.transpose();
    b.y(k) = ex.label;
  }
  return b;
}

LossResult bce_loss(const nn::MLPParams& net, const Batch& batch, bool train_mode, Rng* rng) {
  if (batch.x.rows() == 0) throw DataError("bce_loss: empty batch");
  nn::ForwardCache cache;
  Eigen::MatrixXd out = nn::forward(net, batch.x, train_mode, rng, &cache);
  double n = static_cast<double>(out.rows());
  double loss = 0.0;
  for (Eigen::Index k = 0; k < out.rows(); ++k) {
    double r = std::clamp(out(k, 0), kClamp, 1.0 - kClamp);
    double y = batch.y(k);
    loss -= y * std::log(r) + (1.0 - y) * std::log(1.0 - r);
  }
  loss /= n;
  Eigen::MatrixXd dz = (out.col(0) - batch.y) / n;
  nn::Grads grads = nn::backward(net, cache, dz, true);
  return {loss, grads};
}

double balanced_accuracy(const nn::MLPParams& net, const Batch& probe) {
  Eigen::MatrixXd out = nn::forward(net, probe.x);
  double tp = 0, pos = 0, tn = 0, neg = 0;
  for (Eigen::Index k = 0; k < out.rows(); ++k) {
    if (probe.y(k) > 0.5) {
      pos += 1;
      if (out(k, 0) > 0.5) tp += 1;
    } else {
      neg += 1;
      if (out(k, 0) <= 0.5) tn += 1;
    }
  }
  double sum = 0.0;
  int classes = 0;
  if (pos > 0) sum += tp / pos, ++classes;
  if (neg > 0) sum += tn / neg, ++classes;
  return classes ? sum / classes : 0.0;
}

TrainResult train(const data::Dataset& d, const TrainConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  if (d.episodes.size() < 2) throw DataError("reward train: need at least two episodes");

  std::vector<std::size_t> idx(d.episodes.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng split_rng(mix_seed(seed, 0x5711D));
  for (std::size_t i = idx.size() - 1; i > 0; --i)
    std::swap(idx[i], idx[split_rng.uniform_int(i + 1)]);
  std::size_t n_held = std::max<std::size_t>(1, idx.size() / 10);
  data::Dataset train_d{{}, d.horizon, d.format_version};
  data::Dataset held_d{{}, d.horizon, d.format_version};
  for (std::size_t k = 0; k < idx.size(); ++k)
    (k < idx.size() - n_held ? train_d : held_d).episodes.push_back(d.episodes[idx[k]]);

  lang::Encoder enc(cfg.encoder_mode, lang::Lexicon::builtin(), cfg.lang_seed);

  TrainConfig probe_cfg = cfg;
  probe_cfg.batch_size = cfg.probe_size;
  probe_cfg.state_noise_sigma = 0.0;
  probe_cfg.lang_noise_scale = 0.0;
  Rng probe_rng(mix_seed(seed, 0x9420B));
  Batch train_probe = build_batch(train_d, enc, probe_cfg, probe_rng);
  Batch held_probe = build_batch(held_d, enc, probe_cfg, probe_rng);

  Rng init_rng(mix_seed(seed, 0x17A17));
  nn::MLPParams params = nn::init_params(reward_net_spec(), init_rng);
  nn::AdamState opt = nn::init_adam(params, cfg.learning_rate);
  Rng train_rng(mix_seed(seed, 0xBA7C4));

  TrainResult result;
  nn::MLPParams best = params;
  result.best_heldout_bacc = balanced_accuracy(params, held_probe);

  double loss_acc = 0.0;
  int loss_n = 0;
  for (int t = 1; t <= cfg.steps; ++t) {
    Batch batch = build_batch(train_d, enc, cfg, train_rng);
    LossResult lr = bce_loss(params, batch, true, &train_rng);
    nn::adam_step(params, lr.grads, opt);
    loss_acc += lr.loss;
    loss_n += 1;
    if (t % cfg.eval_every == 0 || t == cfg.steps) {
      CurvePoint pt;
      pt.step = t;
      pt.train_loss = loss_acc / loss_n;
      pt.train_bacc = balanced_accuracy(params, train_probe);
      pt.heldout_bacc = balanced_accuracy(params, held_probe);
      result.curves.push_back(pt);
      loss_acc = 0.0;
      loss_n = 0;
      if (pt.heldout_bacc >= result.best_heldout_bacc) {
        result.best_heldout_bacc = pt.heldout_bacc;
        result.best_step = t;
        best = params;
      }
    }
  }

  result.model.net = std::move(best);
  result.model.encoder_mode = cfg.encoder_mode;
  result.model.lang_seed = cfg.lang_seed;
  result.model.alpha = cfg.alpha;
  result.model.use_cross_negatives = cfg.use_cross_negatives;
  result.model.use_flipped_negatives = cfg.use_flipped_negatives;
  result.model.noisy_positives = cfg.noisy_positives;
  result.model.dataset_hash = cfg.dataset_hash;
  return result;
}

double reward_value(const RewardModel& m, const sim::StateVec& s0, const sim::StateVec& s,
                    const std::string& l) {
  lang::Encoder enc = make_encoder(m);
  Eigen::MatrixXd x(1, kInputDim);
  x.row(0).segment(0, kStateDim) = as_row(s0);
  x.row(0).segment(kStateDim, kStateDim) = as_row(s);
  x.row(0).segment(2 * kStateDim, lang::kEmbedDim) = enc.encode(l).transpose();
  return nn::forward(m.net, x)(0, 0);
}

Eigen::VectorXd reward_batch(const RewardModel& m, const sim::StateVec& s0,
                             const Eigen::MatrixXd& finals, const Eigen::VectorXd& emb) {
  if (finals.cols() != kStateDim) throw ShapeError("reward_batch: finals must have 9 columns");
  Eigen::MatrixXd x(finals.rows(), kInputDim);
  x.leftCols(kStateDim).rowwise() = as_row(s0);
  x.middleCols(kStateDim, kStateDim) = finals;
  x.rightCols(lang::kEmbedDim).rowwise() = emb.transpose();
  return nn::forward(m.net, x).col(0);
}

void save_model(const RewardModel& m, const std::string& path) {
  nn::save_params(m.net, path);
  nlohmann::json j;
  j["encoder_mode"] = lang::encoder_mode_name(m.encoder_mode);
  j["embed_dim"] = lang::kEmbedDim;
  j["lang_seed"] = m.lang_seed;
  j["alpha"] = m.alpha;
  j["use_cross_negatives"] = m.use_cross_negatives;
  j["use_flipped_negatives"] = m.use_flipped_negatives;
  j["noisy_positives"] = m.noisy_positives;
  j["dataset_hash"] = m.dataset_hash;
  std::ofstream f(path + ".json", std::ios::binary);
  f << j.dump(2) << '\n';
  if (!f) throw CheckpointError("reward manifest: write failed on " + path + ".json");
}

RewardModel load_model(const std::string& path) {
  RewardModel m;
  m.net = nn::load_params(path);
  std::ifstream f(path + ".json", std::ios::binary);
  if (!f) throw CheckpointError("reward manifest: cannot open " + path + ".json");
  nlohmann::json j;
  try {
    f >> j;
    m.encoder_mode = lang::encoder_mode_from_name(j.at("encoder_mode").get<std::string>());
    m.lang_seed = j.at("lang_seed").get<std::uint64_t>();
    m.alpha = j.at("alpha").get<double>();
    m.use_cross_negatives = j.at("use_cross_negatives").get<bool>();
    m.use_flipped_negatives = j.at("use_flipped_negatives").get<bool>();
    m.noisy_positives = j.at("noisy_positives").get<bool>();
    m.dataset_hash = j.at("dataset_hash").get<std::string>();
    if (j.at("embed_dim").get<int>() != lang::kEmbedDim)
      throw CheckpointError("reward manifest: embedding dim mismatch");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("reward manifest: ") + e.what());
  }
  return m;
}

}  // namespace lorel::reward
