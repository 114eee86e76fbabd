#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "lorel/rng.hpp"

namespace lorel::nn {

enum class Act { kLinear, kRelu, kSigmoid };

struct MLPSpec {
  std::vector<int> layer_sizes;   // [in, h1, ..., out]
  std::vector<Act> activations;   // one per weight layer
  double dropout_rate = 0.0;      // hidden layers only

  int num_layers() const { return static_cast<int>(activations.size()); }
  bool operator==(const MLPSpec&) const = default;
};

// Convenience builder: relu hidden layers, chosen output activation.
MLPSpec mlp_spec(const std::vector<int>& sizes, Act output, double dropout_rate = 0.0);

struct MLPParams {
  MLPSpec spec;
  std::vector<Eigen::MatrixXd> W;  // out x in, one per layer
  std::vector<Eigen::VectorXd> b;
};

// Kaiming-style uniform init, bounds +-sqrt(6 / fan_in), seeded.
MLPParams init_params(const MLPSpec& spec, Rng& rng);

// Activations recorded during forward, consumed by backward. `post` includes
// dropout scaling where applied.
struct ForwardCache {
  Eigen::MatrixXd input;                 // batch rows
  std::vector<Eigen::MatrixXd> pre;      // pre-activation per layer
  std::vector<Eigen::MatrixXd> post;     // post-activation (after dropout)
  std::vector<Eigen::MatrixXd> dropout;  // inverted-dropout masks (empty if unused)
};

// Rows are examples. Dropout fires only when train_mode and rate > 0 (rng
// required then); inference is deterministic.
Eigen::MatrixXd forward(const MLPParams& p, const Eigen::MatrixXd& x, bool train_mode = false,
                        Rng* rng = nullptr, ForwardCache* cache = nullptr);

struct Grads {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;
};

// dout holds dL/d(output), or dL/d(final pre-activation) when
// `dout_wrt_final_preact` (used by fused sigmoid + cross-entropy losses).
// Returns exact gradients; also writes dL/d(input) to dx when given.
Grads backward(const MLPParams& p, const ForwardCache& cache, const Eigen::MatrixXd& dout,
               bool dout_wrt_final_preact = false, Eigen::MatrixXd* dx = nullptr);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Eigen::MatrixXd> mW, vW;
  std::vector<Eigen::VectorXd> mb, vb;
};

AdamState init_adam(const MLPParams& p, double learning_rate);
void adam_step(MLPParams& p, const Grads& g, AdamState& st);

// Little-endian binary checkpoint: magic, version, spec, then raw matrices.
void save_params(const MLPParams& p, const std::string& path);
MLPParams load_params(const std::string& path);

// Max guarded relative error between analytic gradients and central finite
// differences (h = 1e-5) of loss(x) = sum(c .* forward(x)) on a random batch.
// Dropout masks are replayed by cloning the rng, so train_mode paths are
// checked too. max_probes = 0 checks every parameter; otherwise parameters
// are probed at a uniform stride (covering all layers), bounding runtime on
// wide nets.
double gradient_check(const MLPSpec& spec, int batch, std::uint64_t seed, bool train_mode = false,
                      int max_probes = 0);

}  // namespace lorel::nn
