#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "skelcast/baselines.hpp"
#include "skelcast/dataset.hpp"
#include "skelcast/errors.hpp"
#include "skelcast/losses.hpp"
#include "skelcast/metrics.hpp"
#include "skelcast/model.hpp"
#include "skelcast/rotations.hpp"
#include "skelcast/tensor.hpp"
#include "skelcast/trainer.hpp"

namespace py = pybind11;
using namespace skelcast;

namespace {

DecodeOptions make_options(const ModelParams& params, const std::optional<std::string>& label,
                           std::optional<double> pin_gate,
                           const std::vector<std::pair<int, std::string>>& schedule) {
  DecodeOptions opts;
  opts.pin_gate = pin_gate;
  if (label) opts.label = params.label_id(*label);
  for (const auto& [start, name] : schedule)
    opts.label_schedule.emplace_back(start, params.label_id(name));
  if (!opts.label_schedule.empty()) validate_schedule(opts.label_schedule, params.dims.labels);
  return opts;
}

FrameList checkpoint_predict(const Checkpoint& ckpt, const FrameList& observed, int horizon,
                             const std::optional<std::string>& label,
                             std::optional<double> pin_gate,
                             const std::vector<std::pair<int, std::string>>& schedule) {
  FrameList normalized;
  normalized.reserve(observed.size());
  for (const auto& f : observed) normalized.push_back(ckpt.params.stats.normalize(f));
  FrameList pred = decode_sequence(ckpt.params, normalized,
                                   horizon > 0 ? horizon : ckpt.t_horizon,
                                   make_options(ckpt.params, label, pin_gate, schedule));
  for (auto& f : pred) f = ckpt.params.stats.denormalize(f);
  return pred;
}

}  // namespace

PYBIND11_MODULE(_skelcast, m) {
  m.doc() = "Skeleton motion prediction: attention motion context, gated highway decoder, "
            "gram-matrix objective";
  m.attr("__version__") = "0.1.0";

  py::register_exception<DataError>(m, "DataError");
  py::register_exception<ShapeError>(m, "ShapeError");
  py::register_exception<NumericError>(m, "NumericError");

  // rotations
  m.def("expmap_to_rotmat", &expmap_to_rotmat, py::arg("v"));
  m.def("rotmat_to_euler", &rotmat_to_euler, py::arg("r"));
  m.def("euler_to_rotmat", &euler_to_rotmat, py::arg("angles"));
  m.def("angle_distance", &angle_distance, py::arg("a"), py::arg("b"));

  // data handling
  py::class_<MotionSequence>(m, "MotionSequence")
      .def(py::init<>())
      .def_readwrite("frames", &MotionSequence::frames)
      .def_readwrite("fps", &MotionSequence::fps)
      .def_readwrite("label", &MotionSequence::label)
      .def_readwrite("subject", &MotionSequence::subject)
      .def_property_readonly("dim", &MotionSequence::dim)
      .def("__len__", &MotionSequence::length);

  py::class_<NormalizationStats>(m, "NormalizationStats")
      .def(py::init<>())
      .def_readwrite("min", &NormalizationStats::min)
      .def_readwrite("max", &NormalizationStats::max)
      .def("normalize",
           [](const NormalizationStats& s, const Frame& f) { return s.normalize(f); })
      .def("denormalize",
           [](const NormalizationStats& s, const Frame& f) { return s.denormalize(f); });

  py::class_<WindowSample>(m, "WindowSample")
      .def(py::init<>())
      .def_readwrite("observed", &WindowSample::observed)
      .def_readwrite("target", &WindowSample::target)
      .def_readwrite("label", &WindowSample::label);

  m.def("load_sequences", &load_sequences, py::arg("path"));
  m.def("save_sequence", &save_sequence, py::arg("path"), py::arg("sequence"));
  m.def("downsample", &downsample, py::arg("sequence"), py::arg("factor"));
  m.def("fit_normalizer",
        [](const std::vector<MotionSequence>& seqs) { return fit_normalizer(seqs); },
        py::arg("sequences"));
  m.def("make_windows", &make_windows, py::arg("sequence"), py::arg("t_observed"),
        py::arg("t_horizon"), py::arg("stride") = 1, py::arg("label_id") = -1);
  m.def("label_vocabulary",
        [](const std::vector<MotionSequence>& seqs) { return label_vocabulary(seqs); },
        py::arg("sequences"));

  // losses and metrics
  m.def("gram_matrix",
        [](const Frame& x_t, const Frame& x_prev) {
          ad::Tensor g = gram_matrix(x_t, x_prev);
          const std::size_t n = static_cast<std::size_t>(g.shape[0]);
          FrameList rows(n, Frame(n));
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) rows[i][j] = g.data[i * n + j];
          return rows;
        },
        py::arg("x_t"), py::arg("x_prev"));
  m.def("gram_loss",
        [](const FrameList& pred, const FrameList& truth, const Frame& pred_prev0,
           const Frame& truth_prev0) { return gram_loss(pred, truth, pred_prev0, truth_prev0); },
        py::arg("pred"), py::arg("truth"), py::arg("pred_prev0"), py::arg("truth_prev0"));
  m.def("mse_loss", &mse_loss, py::arg("pred"), py::arg("truth"));
  m.def("mean_angle_error",
        [](const FrameList& pred, const FrameList& truth, const std::string& mode) {
          return mean_angle_error(pred, truth, metric_mode_from_string(mode));
        },
        py::arg("pred"), py::arg("truth"), py::arg("mode") = "euler");

  m.def("zero_velocity_predict", &zero_velocity_predict, py::arg("observed"), py::arg("horizon"));

  // model
  py::class_<ModelDims>(m, "ModelDims")
      .def(py::init<>())
      .def_readwrite("input", &ModelDims::input)
      .def_readwrite("d_e", &ModelDims::d_e)
      .def_readwrite("d_h", &ModelDims::d_h)
      .def_readwrite("d_a", &ModelDims::d_a)
      .def_readwrite("d_m", &ModelDims::d_m)
      .def_readwrite("d_z", &ModelDims::d_z)
      .def_readwrite("d_l", &ModelDims::d_l)
      .def_readwrite("labels", &ModelDims::labels);

  py::class_<Checkpoint>(m, "Model")
      .def_readonly("t_observed", &Checkpoint::t_observed)
      .def_readonly("t_horizon", &Checkpoint::t_horizon)
      .def_property_readonly("labels",
                             [](const Checkpoint& c) { return c.params.labels; })
      .def_property_readonly("input_dim",
                             [](const Checkpoint& c) { return c.params.dims.input; })
      .def("predict", &checkpoint_predict, py::arg("observed"), py::arg("horizon") = 0,
           py::arg("label") = std::nullopt, py::arg("pin_gate") = std::nullopt,
           py::arg("schedule") = std::vector<std::pair<int, std::string>>{})
      .def("save", [](const Checkpoint& c, const std::string& path) { save_checkpoint(path, c); },
           py::arg("path"))
      .def("to_json", [](const Checkpoint& c) { return checkpoint_to_json(c); });

  m.def("load_model", &load_checkpoint, py::arg("path"));
  m.def("init_model",
        [](const ModelDims& dims, const NormalizationStats& stats,
           const std::vector<std::string>& labels, std::uint64_t seed, int t_observed,
           int t_horizon) {
          return Checkpoint{init_model(dims, stats, labels, seed), t_observed, t_horizon};
        },
        py::arg("dims"), py::arg("stats"), py::arg("labels") = std::vector<std::string>{},
        py::arg("seed") = 1, py::arg("t_observed") = 30, py::arg("t_horizon") = 10);

  // training
  py::class_<TrainingConfig>(m, "TrainingConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainingConfig::learning_rate)
      .def_readwrite("decay_factor", &TrainingConfig::decay_factor)
      .def_readwrite("decay_interval", &TrainingConfig::decay_interval)
      .def_readwrite("momentum", &TrainingConfig::momentum)
      .def_readwrite("clip_norm", &TrainingConfig::clip_norm)
      .def_readwrite("batch_size", &TrainingConfig::batch_size)
      .def_readwrite("max_steps", &TrainingConfig::max_steps)
      .def_readwrite("seed", &TrainingConfig::seed)
      .def_readwrite("w_gram", &TrainingConfig::w_gram)
      .def_readwrite("w_mse", &TrainingConfig::w_mse)
      .def_readwrite("t_observed", &TrainingConfig::t_observed)
      .def_readwrite("t_horizon", &TrainingConfig::t_horizon)
      .def_readwrite("conditioned", &TrainingConfig::conditioned)
      .def_readwrite("checkpoint_interval", &TrainingConfig::checkpoint_interval);

  m.def("lr_at", &lr_at, py::arg("config"), py::arg("step"));

  m.def("train",
        [](const std::vector<WindowSample>& windows, const NormalizationStats& stats,
           const std::vector<std::string>& labels, const ModelDims& dims,
           const TrainingConfig& cfg) {
          TrainingDataset data{windows, stats, labels};
          TrainResult result = train(data, dims, cfg);
          std::vector<std::tuple<long, double, double>> history;
          history.reserve(result.history.size());
          for (const auto& r : result.history) history.emplace_back(r.step, r.loss, r.lr);
          return py::make_tuple(Checkpoint{std::move(result.params), cfg.t_observed, cfg.t_horizon},
                                history);
        },
        py::arg("windows"), py::arg("stats"), py::arg("labels"), py::arg("dims"),
        py::arg("config"));

  m.def("evaluate",
        [](const Checkpoint& ckpt, const std::vector<WindowSample>& windows,
           const std::string& mode) {
          return evaluate(ckpt.params, windows, metric_mode_from_string(mode));
        },
        py::arg("model"), py::arg("windows"), py::arg("mode") = "euler");
  m.def("evaluate_zero_velocity",
        [](const std::vector<WindowSample>& windows, const std::string& mode,
           const NormalizationStats& stats) {
          return evaluate_zero_velocity(windows, metric_mode_from_string(mode), stats);
        },
        py::arg("windows"), py::arg("mode"), py::arg("stats"));
}
