#include "skelcast/trainer.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "skelcast/baselines.hpp"
#include "skelcast/errors.hpp"
#include "skelcast/rng.hpp"

namespace skelcast {
namespace {

constexpr std::uint64_t kSamplerSeedOffset = 0x9e3779b97f4a7c15ULL;

std::vector<std::string> param_names(const ModelParams& params) {
  std::vector<std::string> names;
  params.for_each_param([&names](const std::string& name, const ad::Tensor&) {
    names.push_back(name);
  });
  return names;
}

WindowSample normalize_window(const WindowSample& w, const NormalizationStats& stats) {
  WindowSample out;
  out.label = w.label;
  out.observed.reserve(w.observed.size());
  out.target.reserve(w.target.size());
  for (const auto& f : w.observed) out.observed.push_back(stats.normalize(f));
  for (const auto& f : w.target) out.target.push_back(stats.normalize(f));
  return out;
}

using Predictor = std::function<FrameList(const FrameList& observed_normalized, int horizon)>;

HorizonErrorTable evaluate_with(std::span<const WindowSample> windows, MetricMode mode,
                                const NormalizationStats& stats, const Predictor& predict) {
  if (windows.empty())
    throw std::invalid_argument("evaluate: empty test set");
  HorizonErrorTable sums;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const WindowSample& w = windows[i];
    FrameList observed;
    observed.reserve(w.observed.size());
    for (const auto& f : w.observed) observed.push_back(stats.normalize(f));
    FrameList pred = predict(observed, static_cast<int>(w.target.size()));
    for (auto& f : pred) f = stats.denormalize(f);
    HorizonErrorTable sample;
    try {
      sample = mean_angle_error(pred, w.target, mode);
    } catch (const std::invalid_argument& e) {
      throw DataError("evaluate: sample " + std::to_string(i) + ": " + e.what());
    }
    for (const auto& [ms, err] : sample) sums[ms] += err;
  }
  for (auto& [ms, err] : sums) err /= static_cast<double>(windows.size());
  return sums;
}

}  // namespace

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(decay_factor > 0.0)) throw std::invalid_argument("decay_factor must be positive");
  if (decay_interval <= 0) throw std::invalid_argument("decay_interval must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must be in [0, 1)");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be positive");
  if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (max_steps <= 0) throw std::invalid_argument("max_steps must be positive");
  if (w_gram < 0.0 || w_mse < 0.0) throw std::invalid_argument("loss weights must be nonnegative");
  if (w_gram == 0.0 && w_mse == 0.0) throw std::invalid_argument("at least one loss weight must be positive");
  if (t_observed < 1 || t_horizon < 1) throw std::invalid_argument("T' and T must be >= 1");
  if (checkpoint_interval <= 0) throw std::invalid_argument("checkpoint_interval must be positive");
}

double lr_at(const TrainingConfig& cfg, long step) {
  if (step < 0) throw std::invalid_argument("lr_at: negative step");
  const double decays = std::floor(static_cast<double>(step) / static_cast<double>(cfg.decay_interval));
  return cfg.learning_rate * std::pow(cfg.decay_factor, decays);
}

void clip_gradients(std::vector<ad::Tensor>& grads, std::span<const std::string> names,
                    double max_norm) {
  double sq = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (double g : grads[i].data) {
      if (!std::isfinite(g)) {
        const std::string name = i < names.size() ? names[i] : std::to_string(i);
        throw NumericError("clip_gradients: non-finite gradient for parameter " + name);
      }
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (auto& g : grads)
    for (double& v : g.data) v *= scale;
}

void sgd_momentum_step(ModelParams& params, const std::vector<ad::Tensor>& grads,
                       OptimizerState& state, double lr, double momentum) {
  std::size_t i = 0;
  params.for_each_param([&](const std::string& name, ad::Tensor& p) {
    if (i >= grads.size())
      throw ShapeError("sgd_momentum_step: missing gradient for " + name);
    const ad::Tensor& g = grads[i];
    if (g.data.size() != p.data.size())
      throw ShapeError("sgd_momentum_step: gradient shape mismatch for " + name);
    if (state.velocity.size() <= i) state.velocity.push_back(ad::Tensor::zeros(p.shape));
    ad::Tensor& v = state.velocity[i];
    for (std::size_t k = 0; k < p.data.size(); ++k) {
      v.data[k] = momentum * v.data[k] + g.data[k];
      p.data[k] -= lr * v.data[k];
    }
    ++i;
  });
  if (i != grads.size())
    throw ShapeError("sgd_momentum_step: " + std::to_string(grads.size()) +
                     " gradients for " + std::to_string(i) + " parameters");
  ++state.step;
}

TrainResult train(const TrainingDataset& data, const ModelDims& dims, const TrainingConfig& cfg,
                  const TrainCallbacks& callbacks) {
  cfg.validate();
  if (data.windows.empty()) throw std::invalid_argument("train: no training windows");
  const int input_dim = data.windows[0].dim();
  for (const auto& w : data.windows) {
    if (w.dim() != input_dim)
      throw ShapeError("train: windows disagree on dimension");
    if (static_cast<int>(w.observed.size()) != cfg.t_observed ||
        static_cast<int>(w.target.size()) != cfg.t_horizon)
      throw ShapeError("train: window lengths do not match T'=" + std::to_string(cfg.t_observed) +
                       ", T=" + std::to_string(cfg.t_horizon));
    if (cfg.conditioned && w.label < 0)
      throw std::invalid_argument("train: conditioned training requires labeled windows");
  }
  if (cfg.conditioned && data.labels.empty())
    throw std::invalid_argument("train: conditioned training requires a label vocabulary");

  ModelDims model_dims = dims;
  model_dims.input = input_dim;
  ModelParams params = init_model(model_dims, data.stats,
                                  cfg.conditioned ? data.labels : std::vector<std::string>{},
                                  cfg.seed);
  const std::vector<std::string> names = param_names(params);

  std::vector<WindowSample> normalized;
  normalized.reserve(data.windows.size());
  for (const auto& w : data.windows) normalized.push_back(normalize_window(w, data.stats));

  Rng sampler(cfg.seed + kSamplerSeedOffset);
  OptimizerState state;
  TrainResult result{std::move(params), {}};
  result.history.reserve(static_cast<std::size_t>(cfg.max_steps));

  for (long step = 0; step < cfg.max_steps; ++step) {
    ad::Tape tape;
    BoundModel bound = bind_model(tape, result.params);

    ad::Tensor batch_loss;
    bool have_loss = false;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const WindowSample& w = normalized[sampler.index(normalized.size())];
      DecodeOptions opts;
      if (cfg.conditioned) opts.label = w.label;
      std::vector<ad::Tensor> pred = decode_on_tape(tape, bound, w.observed, cfg.t_horizon, opts);

      ad::Tensor window_loss;
      bool have_window = false;
      if (cfg.w_gram != 0.0) {
        ad::Tensor prev0 = tape.leaf(ad::Tensor::vector(w.observed.back()));
        ad::Tensor g = gram_loss_on_tape(tape, pred, w.target, prev0, w.observed.back());
        window_loss = tape.affine(g, cfg.w_gram, 0.0);
        have_window = true;
      }
      if (cfg.w_mse != 0.0) {
        ad::Tensor m = tape.affine(mse_loss_on_tape(tape, pred, w.target), cfg.w_mse, 0.0);
        window_loss = have_window ? tape.add(window_loss, m) : m;
        have_window = true;
      }
      batch_loss = have_loss ? tape.add(batch_loss, window_loss) : window_loss;
      have_loss = true;
    }
    batch_loss = tape.affine(batch_loss, 1.0 / static_cast<double>(cfg.batch_size), 0.0);

    const double loss_value = batch_loss.value();
    if (!std::isfinite(loss_value))
      throw NumericError("train: non-finite loss at step " + std::to_string(step));

    tape.backward(batch_loss);
    std::vector<ad::Tensor> grads;
    grads.reserve(names.size());
    // Leaves were created by bind_model, which walks the same fixed
    // parameter order as for_each_param, so grads line up with names.
    auto collect = [&grads, &tape](const ad::Tensor& leaf) {
      grads.push_back(ad::Tensor(leaf.shape, tape.grad(leaf)));
    };
    collect(bound.embedding.W_e1);
    collect(bound.embedding.b_e1);
    collect(bound.embedding.W_e2);
    collect(bound.embedding.b_e2);
    collect(bound.attention.W_beta);
    collect(bound.attention.U_beta_v);
    collect(bound.attention.U_beta_e);
    collect(bound.attention.b_beta);
    collect(bound.mhu.W_v);
    collect(bound.mhu.U_vh);
    collect(bound.mhu.b_v);
    collect(bound.mhu.U_vx);
    collect(bound.mhu.b_vh);
    collect(bound.mhu.W_z);
    collect(bound.mhu.U_zx);
    collect(bound.mhu.b_z);
    collect(bound.mhu.b_zx);
    if (bound.conditioner) {
      collect(bound.conditioner->table);
      collect(bound.conditioner->W_mix);
      collect(bound.conditioner->b_mix);
    }

    clip_gradients(grads, names, cfg.clip_norm);
    const double lr = lr_at(cfg, step);
    sgd_momentum_step(result.params, grads, state, lr, cfg.momentum);

    const TrainRecord record{step, loss_value, lr};
    result.history.push_back(record);
    if (callbacks.on_record) callbacks.on_record(record);
    if (callbacks.on_checkpoint && (step + 1) % cfg.checkpoint_interval == 0)
      callbacks.on_checkpoint(step + 1, result.params);
  }
  return result;
}

HorizonErrorTable evaluate(const ModelParams& params, std::span<const WindowSample> windows,
                           MetricMode mode, const DecodeOptions& opts) {
  if (!windows.empty() && windows[0].dim() != params.dims.input)
    throw ShapeError("evaluate: windows have dimension " + std::to_string(windows[0].dim()) +
                     ", model expects " + std::to_string(params.dims.input));
  return evaluate_with(windows, mode, params.stats,
                       [&params, &opts](const FrameList& observed, int horizon) {
                         return decode_sequence(params, observed, horizon, opts);
                       });
}

HorizonErrorTable evaluate_zero_velocity(std::span<const WindowSample> windows, MetricMode mode,
                                         const NormalizationStats& stats) {
  return evaluate_with(windows, mode, stats, [](const FrameList& observed, int horizon) {
    return zero_velocity_predict(observed, horizon);
  });
}

HorizonErrorTable evaluate_self_test(std::span<const WindowSample> windows, MetricMode mode) {
  if (windows.empty()) throw std::invalid_argument("evaluate: empty test set");
  HorizonErrorTable sums;
  for (const auto& w : windows) {
    HorizonErrorTable sample = mean_angle_error(w.target, w.target, mode);
    for (const auto& [ms, err] : sample) sums[ms] += err;
  }
  for (auto& [ms, err] : sums) err /= static_cast<double>(windows.size());
  return sums;
}

std::string loss_history_csv(std::span<const TrainRecord> history) {
  std::ostringstream os;
  os << "step,loss,lr\n";
  for (const auto& r : history)
    os << r.step << ',' << format_double(r.loss) << ',' << format_double(r.lr) << '\n';
  return os.str();
}

}  // namespace skelcast
