#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lorel/datagen.hpp"
#include "lorel/nncore.hpp"
#include "lorel/rng.hpp"
#include "lorel/tablesim.hpp"

namespace lorel::dyn {

inline constexpr int kStateDim = 9;
inline constexpr int kActionDim = 2;

// One-step model over [s | a] predicting the state residual; the next state
// is clip(s + residual), so a zero-weight head is exactly the identity map.
struct DynamicsModel {
  nn::MLPParams net;
  std::string dataset_hash;
};

struct TrainConfig {
  int steps = 96000;
  int batch_size = 256;
  double learning_rate = 1e-3;
  // Piecewise-constant decay: (fraction of steps, multiplier on
  // learning_rate), applied once the step index passes the fraction.
  std::vector<std::pair<double, double>> lr_schedule = {{0.44, 0.3}, {0.69, 0.1}, {0.88, 0.03}};
  int eval_every = 500;
  std::string dataset_hash;
};

struct CurvePoint {
  int step;
  double train_mse;    // mean over the steps since the previous point
  double heldout_mse;  // full held-out split
};

struct TrainResult {
  DynamicsModel model;
  std::vector<CurvePoint> curves;
  int best_step = 0;
  double best_heldout_mse = 0.0;
};

// [kStateDim + kActionDim, 128, 128, 128, kStateDim], relu hidden, linear out.
nn::MLPSpec dynamics_net_spec();

// Mean squared residual error over every one-step transition in d (language
// is not consulted), split 90/10 by episode; returns the checkpoint with the
// best held-out MSE.
TrainResult train(const data::Dataset& d, const TrainConfig& cfg, std::uint64_t seed);

// One batched prediction step; each row is an independent candidate.
Eigen::MatrixXd predict_step(const DynamicsModel& m, const Eigen::MatrixXd& states,
                             const Eigen::MatrixXd& actions);

// Iterated prediction; returns T+1 states starting with s0.
std::vector<sim::StateVec> rollout(const DynamicsModel& m, const sim::StateVec& s0,
                                   const std::vector<std::array<double, 2>>& actions);

// Batched H-step integrator used by the planner. Candidates hold one action
// sequence per row, laid out [a0.x a0.y a1.x a1.y ...]; finals() returns the
// M x 9 matrix of terminal states.
class Stepper {
 public:
  virtual ~Stepper() = default;
  virtual Eigen::MatrixXd finals(const sim::StateVec& s0,
                                 const Eigen::MatrixXd& candidates) const = 0;
};

class LearnedStepper : public Stepper {
 public:
  explicit LearnedStepper(const DynamicsModel& m) : model_(&m) {}
  Eigen::MatrixXd finals(const sim::StateVec& s0,
                         const Eigen::MatrixXd& candidates) const override;

 private:
  const DynamicsModel* model_;
};

// Exact simulator dynamics, stepping each candidate row through sim::step.
class GroundTruthStepper : public Stepper {
 public:
  Eigen::MatrixXd finals(const sim::StateVec& s0,
                         const Eigen::MatrixXd& candidates) const override;
};

// Net checkpoint at path plus a path.json manifest.
void save_model(const DynamicsModel& m, const std::string& path);
DynamicsModel load_model(const std::string& path);

}  // namespace lorel::dyn
