#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "lorel/datagen.hpp"
#include "lorel/lang.hpp"
#include "lorel/nncore.hpp"
#include "lorel/rng.hpp"
#include "lorel/tablesim.hpp"

namespace lorel::reward {

inline constexpr int kStateDim = 9;

// Classifier input is [s0 | s | instruction embedding].
inline constexpr int kInputDim = 2 * kStateDim + lang::kEmbedDim;

// P(instruction describes the change from s0 to s), a sigmoid MLP trained
// on endpoint pairs from the annotated corpus.
struct RewardModel {
  nn::MLPParams net;
  lang::EncoderMode encoder_mode = lang::EncoderMode::kLexicon;
  std::uint64_t lang_seed = lang::kDefaultLangSeed;
  double alpha = 0.25;
  bool use_cross_negatives = true;
  bool use_flipped_negatives = true;
  bool noisy_positives = true;
  std::string dataset_hash;  // provenance; set by whoever owns the file
};

struct TrainConfig {
  double alpha = 0.25;           // positives draw i <= alpha*T, j >= (1-alpha)*T
  int batch_size = 32;           // multiple of 4
  double learning_rate = 1e-5;
  int steps = 50000;
  double state_noise_sigma = 0.005;
  double lang_noise_scale = 0.1;
  bool use_cross_negatives = true;
  bool use_flipped_negatives = true;
  bool noisy_positives = true;   // off: positives are exact endpoints (alpha 0)
  int eval_every = 500;
  int probe_size = 256;          // fixed noise-free examples per split, multiple of 4
  lang::EncoderMode encoder_mode = lang::EncoderMode::kLexicon;
  std::uint64_t lang_seed = lang::kDefaultLangSeed;
  std::string dataset_hash;
};

struct Example {
  sim::StateVec s0;
  sim::StateVec s;
  std::string instruction;
  double label = 1.0;
};

struct Batch {
  Eigen::MatrixXd x;  // rows: [s0 | s | embedding]
  Eigen::VectorXd y;
};

struct CurvePoint {
  int step;
  double train_loss;    // mean over the steps since the previous point
  double train_bacc;    // balanced accuracy on the fixed train probe
  double heldout_bacc;  // balanced accuracy on the fixed held-out probe
};

struct TrainResult {
  RewardModel model;
  std::vector<CurvePoint> curves;
  int best_step = 0;
  double best_heldout_bacc = 0.0;
};

// [kInputDim, 128, 128, 128, 1], relu hidden, sigmoid out, dropout 0.2.
nn::MLPSpec reward_net_spec();

lang::Encoder make_encoder(const RewardModel& m);

// Uniform episode, then i in {0..floor(alpha*T)}, j in {ceil((1-alpha)*T)..T}
// with j > i; returns (states[i], states[j], instruction) labeled 1.
Example sample_positive(const data::Dataset& d, double alpha, Rng& rng);

// Endpoints of an episode whose instruction differs (string inequality) from
// l, paired with l and labeled 0. Throws DataError if no instruction differs.
Example sample_cross_negative(const data::Dataset& d, const std::string& l, Rng& rng);

// States swapped, label 0: temporal progress reversed.
Example flipped_negative(const Example& pos);

// batch_size/2 positives, batch_size/4 of each negative type; a disabled
// negative type hands its share to the other (both disabled: all positives).
// Every example gets Gaussian state noise on both states plus embedding
// perturbation.
Batch build_batch(const data::Dataset& d, const lang::Encoder& enc, const TrainConfig& cfg,
                  Rng& rng);

struct LossResult {
  double loss;
  nn::Grads grads;
};

// Mean binary cross entropy, outputs clamped to [1e-7, 1-1e-7]; gradients use
// the fused sigmoid form (r - y)/n against the final pre-activation.
LossResult bce_loss(const nn::MLPParams& net, const Batch& batch, bool train_mode = false,
                    Rng* rng = nullptr);

// (TPR + TNR)/2 at threshold 0.5; classes absent from the probe are skipped.
double balanced_accuracy(const nn::MLPParams& net, const Batch& probe);

// 90/10 episode split, Adam on sampled batches, accuracy curves on fixed
// noise-free probes every eval_every steps; returns the checkpoint with the
// best held-out balanced accuracy (latest among ties).
TrainResult train(const data::Dataset& d, const TrainConfig& cfg, std::uint64_t seed);

// Deterministic inference: no dropout, no noise.
double reward_value(const RewardModel& m, const sim::StateVec& s0, const sim::StateVec& s,
                    const std::string& l);

// Batched inference for the planner: one row per candidate final state, all
// sharing s0 and the precomputed instruction embedding.
Eigen::VectorXd reward_batch(const RewardModel& m, const sim::StateVec& s0,
                             const Eigen::MatrixXd& finals, const Eigen::VectorXd& emb);

// Net checkpoint at path plus a path.json manifest (encoder mode, embedding
// dim, sampling flags, dataset hash).
void save_model(const RewardModel& m, const std::string& path);
RewardModel load_model(const std::string& path);

}  // namespace lorel::reward
