#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "skelcast/metrics.hpp"
#include "skelcast/model.hpp"

namespace skelcast {

struct TrainingConfig {
  double learning_rate = 0.05;
  double decay_factor = 0.95;
  long decay_interval = 10000;
  double momentum = 0.9;
  double clip_norm = 5.0;
  int batch_size = 80;
  long max_steps = 20000;
  std::uint64_t seed = 1;
  double w_gram = 1.0;  // the gram objective is the default training loss
  double w_mse = 0.0;
  int t_observed = 30;
  int t_horizon = 10;
  bool conditioned = false;
  long checkpoint_interval = 1000;

  void validate() const;  // throws std::invalid_argument
};

// 0.05 * 0.95^floor(step / 10000) with the configured constants.
double lr_at(const TrainingConfig& cfg, long step);

struct OptimizerState {
  std::vector<ad::Tensor> velocity;  // parameter order, zero-initialized
  long step = 0;
};

// Scales all gradients by max_norm/g when the global L2 norm g exceeds
// max_norm; direction is preserved exactly. Throws NumericError naming
// the parameter on non-finite gradients.
void clip_gradients(std::vector<ad::Tensor>& grads, std::span<const std::string> names,
                    double max_norm);

// Classical momentum: v <- mu*v + g; theta <- theta - lr*v.
void sgd_momentum_step(ModelParams& params, const std::vector<ad::Tensor>& grads,
                       OptimizerState& state, double lr, double momentum);

struct TrainRecord {
  long step;
  double loss;
  double lr;
};

struct TrainingDataset {
  std::vector<WindowSample> windows;  // raw (unnormalized) frames
  NormalizationStats stats;
  std::vector<std::string> labels;  // vocabulary; required when conditioned
};

struct TrainCallbacks {
  std::function<void(long step, const ModelParams& params)> on_checkpoint;
  std::function<void(const TrainRecord&)> on_record;
};

struct TrainResult {
  ModelParams params;
  std::vector<TrainRecord> history;
};

// Seeded minibatch SGD over self-fed rollouts; losses are computed in
// normalized coordinates. Aborts with NumericError on a non-finite
// loss, leaving previously checkpointed parameters untouched.
TrainResult train(const TrainingDataset& data, const ModelDims& dims, const TrainingConfig& cfg,
                  const TrainCallbacks& callbacks = {});

// Rollout every window, denormalize, and average the per-horizon angle
// error across windows. Throws on an empty window list.
HorizonErrorTable evaluate(const ModelParams& params, std::span<const WindowSample> windows,
                           MetricMode mode, const DecodeOptions& opts = {});
HorizonErrorTable evaluate_zero_velocity(std::span<const WindowSample> windows, MetricMode mode,
                                         const NormalizationStats& stats);
// All-zero reference table: scores the ground truth against itself.
HorizonErrorTable evaluate_self_test(std::span<const WindowSample> windows, MetricMode mode);

std::string loss_history_csv(std::span<const TrainRecord> history);

}  // namespace skelcast
