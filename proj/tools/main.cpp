#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "skelcast/baselines.hpp"
#include "skelcast/errors.hpp"
#include "skelcast/run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct LoadedData {
  std::vector<skelcast::MotionSequence> train;
  std::vector<skelcast::MotionSequence> test;
};

bool subject_in(const std::string& subject, const std::string& csv_list) {
  std::istringstream in(csv_list);
  std::string token;
  while (std::getline(in, token, ','))
    if (!token.empty() && token == subject) return true;
  return false;
}

// Loads every --data path, applies downsampling and splits by subject.
LoadedData load_split(const std::vector<std::string>& paths, const skelcast::RunConfig& cfg) {
  LoadedData out;
  for (const auto& path : paths) {
    for (auto& seq : skelcast::load_sequences(path)) {
      skelcast::MotionSequence ds = skelcast::downsample(seq, cfg.downsample);
      if (!cfg.test_subjects.empty() && subject_in(ds.subject, cfg.test_subjects))
        out.test.push_back(std::move(ds));
      else
        out.train.push_back(std::move(ds));
    }
  }
  return out;
}

std::vector<skelcast::WindowSample> windows_of(const std::vector<skelcast::MotionSequence>& seqs,
                                               const skelcast::RunConfig& cfg,
                                               const std::vector<std::string>& vocab) {
  std::vector<skelcast::WindowSample> windows;
  for (const auto& seq : seqs) {
    int label = -1;
    if (!seq.label.empty())
      for (std::size_t i = 0; i < vocab.size(); ++i)
        if (vocab[i] == seq.label) label = static_cast<int>(i);
    auto w = skelcast::make_windows(seq, cfg.train.t_observed, cfg.train.t_horizon, cfg.stride,
                                    label);
    windows.insert(windows.end(), std::make_move_iterator(w.begin()),
                   std::make_move_iterator(w.end()));
  }
  return windows;
}

std::map<std::string, std::string> digest_inputs(const std::vector<std::string>& paths) {
  std::map<std::string, std::string> digests;
  for (const auto& p : paths) digests[p] = skelcast::file_digest(p);
  return digests;
}

skelcast::MotionSequence load_single_sequence(const std::string& path) {
  auto seqs = skelcast::load_sequences(path);
  if (seqs.empty()) throw skelcast::DataError(path + ": no frames");
  return std::move(seqs.front());
}

void write_prediction(const std::string& path, const skelcast::FrameList& frames, int fps,
                      const std::string& label) {
  skelcast::MotionSequence seq;
  seq.frames = frames;
  seq.fps = fps;
  seq.label = label;
  std::ostringstream buffer;
  {
    // Reuse the sequence writer through a temp path-free route: format
    // frames directly to keep writes atomic.
    buffer << "# fps=" << seq.fps;
    if (!seq.label.empty()) buffer << " label=" << seq.label;
    if (seq.dim() > 0 && seq.dim() % 3 == 0) buffer << " joints=" << seq.dim() / 3;
    buffer << '\n';
    for (const auto& frame : seq.frames) {
      for (std::size_t i = 0; i < frame.size(); ++i) {
        if (i) buffer << ',';
        buffer << skelcast::format_double(frame[i]);
      }
      buffer << '\n';
    }
  }
  skelcast::write_file_atomic(path, buffer.str());
}

std::vector<std::pair<int, int>> parse_schedule(const std::string& text,
                                                const skelcast::ModelParams& params) {
  std::vector<std::pair<int, int>> schedule;
  std::istringstream in(text);
  std::string entry;
  while (std::getline(in, entry, ',')) {
    const std::size_t colon = entry.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("schedule entry '" + entry + "' must be <start>:<label>");
    int start = 0;
    try {
      start = std::stoi(entry.substr(0, colon));
    } catch (const std::exception&) {
      throw std::invalid_argument("schedule entry '" + entry + "' has a non-integer start");
    }
    schedule.emplace_back(start, params.label_id(entry.substr(colon + 1)));
  }
  skelcast::validate_schedule(schedule, params.dims.labels);
  return schedule;
}

int cmd_train(const std::vector<std::string>& data_paths, const std::string& config_path,
              const std::string& out_dir, const std::vector<std::string>& overrides) {
  skelcast::RunConfig cfg = skelcast::resolve_config(config_path, overrides);
  cfg.train.validate();

  LoadedData data = load_split(data_paths, cfg);
  if (data.train.empty()) throw skelcast::DataError("no training sequences after split");

  skelcast::TrainingDataset dataset;
  dataset.labels = skelcast::label_vocabulary(data.train);
  dataset.stats = skelcast::fit_normalizer(data.train);
  dataset.windows = windows_of(data.train, cfg, dataset.labels);
  if (dataset.windows.empty())
    throw skelcast::DataError("no training windows: sequences shorter than T'+T");

  fs::create_directories(out_dir);
  const std::string checkpoint_path = (fs::path(out_dir) / "checkpoint.json").string();
  const std::string loss_path = (fs::path(out_dir) / "loss.csv").string();
  const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();

  skelcast::write_file_atomic(manifest_path,
                              skelcast::manifest_json("train", cfg, digest_inputs(data_paths)));

  auto save = [&](const skelcast::ModelParams& params) {
    skelcast::Checkpoint ckpt{params, cfg.train.t_observed, cfg.train.t_horizon};
    skelcast::write_file_atomic(checkpoint_path, skelcast::checkpoint_to_json(ckpt) + "\n");
  };

  skelcast::TrainCallbacks callbacks;
  callbacks.on_checkpoint = [&save](long, const skelcast::ModelParams& p) { save(p); };

  std::vector<skelcast::TrainRecord> history;
  try {
    skelcast::TrainResult result = skelcast::train(dataset, cfg.dims, cfg.train, callbacks);
    history = std::move(result.history);
    save(result.params);
    skelcast::write_file_atomic(loss_path, skelcast::loss_history_csv(history));
  } catch (const skelcast::NumericError&) {
    // Keep whatever checkpoint was written last; surface the failure.
    throw;
  }
  std::cout << "trained " << cfg.train.max_steps << " steps on " << dataset.windows.size()
            << " windows; wrote " << checkpoint_path << "\n";
  return 0;
}

int cmd_predict(const std::string& checkpoint_path, const std::string& data_path, int horizon,
                const std::string& label, const std::string& out_path) {
  skelcast::Checkpoint ckpt = skelcast::load_checkpoint(checkpoint_path);
  skelcast::MotionSequence observed = load_single_sequence(data_path);
  if (observed.dim() != ckpt.params.dims.input)
    throw skelcast::DataError("observed frames have " + std::to_string(observed.dim()) +
                              " dims, checkpoint expects " +
                              std::to_string(ckpt.params.dims.input));

  skelcast::DecodeOptions opts;
  if (!label.empty()) {
    if (!ckpt.params.conditioner)
      throw std::invalid_argument("--label given but the checkpoint is unconditioned");
    opts.label = ckpt.params.label_id(label);
  }

  skelcast::FrameList normalized;
  for (const auto& f : observed.frames) normalized.push_back(ckpt.params.stats.normalize(f));
  const int t = horizon > 0 ? horizon : ckpt.t_horizon;
  skelcast::FrameList pred = skelcast::decode_sequence(ckpt.params, normalized, t, opts);
  for (auto& f : pred) f = ckpt.params.stats.denormalize(f);
  write_prediction(out_path, pred, observed.fps, label);
  std::cout << "wrote " << pred.size() << " predicted frames to " << out_path << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& baseline, bool self_test,
             const std::vector<std::string>& data_paths, const std::string& config_path,
             const std::string& metric_mode_flag, const std::string& out_path,
             const std::vector<std::string>& overrides) {
  skelcast::RunConfig cfg = skelcast::resolve_config(config_path, overrides);

  std::optional<skelcast::Checkpoint> ckpt;
  if (!checkpoint_path.empty()) {
    ckpt = skelcast::load_checkpoint(checkpoint_path);
    cfg.train.t_observed = ckpt->t_observed;
    cfg.train.t_horizon = ckpt->t_horizon;
    // Window geometry may still be overridden explicitly.
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq != std::string::npos) {
        const std::string key = o.substr(0, eq);
        if (key == "t_observed" || key == "t_horizon")
          skelcast::apply_key_value(cfg, key, o.substr(eq + 1));
      }
    }
  }

  LoadedData data = load_split(data_paths, cfg);
  // Evaluation runs on the test split when one is configured, otherwise
  // on everything that was loaded.
  std::vector<skelcast::MotionSequence>& seqs = data.test.empty() ? data.train : data.test;
  if (seqs.empty()) throw skelcast::DataError("no sequences to evaluate");
  const std::vector<std::string> vocab =
      ckpt ? ckpt->params.labels : skelcast::label_vocabulary(seqs);
  const auto windows = windows_of(seqs, cfg, vocab);
  if (windows.empty()) throw skelcast::DataError("no evaluation windows: sequences too short");

  const skelcast::MetricMode mode = skelcast::metric_mode_from_string(
      metric_mode_flag.empty() ? cfg.metric_mode : metric_mode_flag);

  skelcast::HorizonErrorTable table;
  if (self_test) {
    table = skelcast::evaluate_self_test(windows, mode);
  } else if (!baseline.empty()) {
    if (baseline != "zero-velocity")
      throw std::invalid_argument("unknown baseline '" + baseline + "' (expected zero-velocity)");
    const skelcast::NormalizationStats stats =
        ckpt ? ckpt->params.stats : skelcast::fit_normalizer(seqs);
    table = skelcast::evaluate_zero_velocity(windows, mode, stats);
  } else if (ckpt) {
    table = skelcast::evaluate(ckpt->params, windows, mode);
  } else {
    throw std::invalid_argument("eval needs --checkpoint, --baseline or --self-test");
  }

  skelcast::write_file_atomic(out_path, skelcast::horizon_table_csv(table));
  std::cout << "wrote " << table.size() << " horizons to " << out_path << "\n";
  return 0;
}

int cmd_transfer(const std::string& checkpoint_path, const std::string& data_path,
                 const std::string& schedule_text, int horizon, const std::string& out_path) {
  skelcast::Checkpoint ckpt = skelcast::load_checkpoint(checkpoint_path);
  if (!ckpt.params.conditioner)
    throw std::invalid_argument("transfer requires a conditioned checkpoint");
  skelcast::MotionSequence observed = load_single_sequence(data_path);
  if (observed.dim() != ckpt.params.dims.input)
    throw skelcast::DataError("observed frames have " + std::to_string(observed.dim()) +
                              " dims, checkpoint expects " +
                              std::to_string(ckpt.params.dims.input));

  skelcast::DecodeOptions opts;
  opts.label_schedule = parse_schedule(schedule_text, ckpt.params);

  skelcast::FrameList normalized;
  for (const auto& f : observed.frames) normalized.push_back(ckpt.params.stats.normalize(f));
  const int t = horizon > 0 ? horizon : ckpt.t_horizon;
  skelcast::FrameList pred = skelcast::decode_sequence(ckpt.params, normalized, t, opts);
  for (auto& f : pred) f = ckpt.params.stats.denormalize(f);
  write_prediction(out_path, pred, observed.fps, "");
  std::cout << "wrote " << pred.size() << " transferred frames to " << out_path << "\n";
  return 0;
}

int cmd_export(const std::string& data_path, const std::string& out_path,
               const std::string& format) {
  if (format != "json-frames")
    throw std::invalid_argument("unknown export format '" + format + "' (expected json-frames)");
  const auto seqs = skelcast::load_sequences(data_path);
  json doc;
  doc["format"] = "json-frames";
  doc["sequences"] = json::array();
  for (const auto& seq : seqs) {
    if (seq.dim() % 3 != 0)
      throw skelcast::DataError(data_path + ": dimension " + std::to_string(seq.dim()) +
                                " is not a multiple of 3, cannot group joints");
    json s;
    s["fps"] = seq.fps;
    if (!seq.label.empty()) s["label"] = seq.label;
    if (!seq.subject.empty()) s["subject"] = seq.subject;
    json frames = json::array();
    for (const auto& frame : seq.frames) {
      json joints = json::array();
      for (std::size_t j = 0; j < frame.size(); j += 3)
        joints.push_back({frame[j], frame[j + 1], frame[j + 2]});
      frames.push_back(std::move(joints));
    }
    s["frames"] = std::move(frames);
    doc["sequences"].push_back(std::move(s));
  }
  skelcast::write_file_atomic(out_path, doc.dump(2) + "\n");
  std::cout << "exported " << seqs.size() << " sequences to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skeleton motion prediction: attention motion context + gated highway decoder"};
  app.require_subcommand(1);

  std::vector<std::string> data_paths;
  std::vector<std::string> overrides;
  std::string config_path, out_path, checkpoint_path, label, schedule, baseline;
  std::string metric_mode, format = "json-frames";
  int horizon = 0;
  long seed = -1;
  bool self_test = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--set", overrides, "override a config key, e.g. --set seed=7")
        ->type_name("KEY=VALUE");
  };

  CLI::App* train = app.add_subcommand("train", "train a model and write checkpoint/loss/manifest");
  train->add_option("--data", data_paths, "sequence CSV file(s)")->required();
  train->add_option("--config", config_path, "key=value config file");
  train->add_option("--out", out_path, "output directory")->required();
  train->add_option("--seed", seed, "training seed (overrides config)");
  add_common(train);

  CLI::App* predict = app.add_subcommand("predict", "roll out future frames from an observed sequence");
  predict->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  predict->add_option("--data", data_paths, "observed sequence CSV")->required()->expected(1);
  predict->add_option("--horizon", horizon, "number of frames to predict");
  predict->add_option("--label", label, "conditioning activity label");
  predict->add_option("--out", out_path, "output CSV")->required();

  CLI::App* eval = app.add_subcommand("eval", "write per-horizon mean angle error as CSV");
  eval->add_option("--checkpoint", checkpoint_path, "model checkpoint");
  eval->add_option("--baseline", baseline, "evaluate a baseline predictor (zero-velocity)");
  eval->add_flag("--self-test", self_test, "score ground truth against itself (all zeros)");
  eval->add_option("--data", data_paths, "sequence CSV file(s)")->required();
  eval->add_option("--config", config_path, "key=value config file");
  eval->add_option("--metric-mode", metric_mode, "euler or raw-expmap");
  eval->add_option("--out", out_path, "output CSV")->required();
  add_common(eval);

  CLI::App* transfer = app.add_subcommand("transfer", "roll out with a scheduled activity label switch");
  transfer->add_option("--checkpoint", checkpoint_path, "conditioned model checkpoint")->required();
  transfer->add_option("--data", data_paths, "observed sequence CSV")->required()->expected(1);
  transfer->add_option("--schedule", schedule, "label schedule, e.g. 0:walking,5:sitting")->required();
  transfer->add_option("--horizon", horizon, "number of frames to predict");
  transfer->add_option("--out", out_path, "output CSV")->required();

  CLI::App* exp = app.add_subcommand("export", "convert a sequence CSV to structured JSON");
  exp->add_option("--data", data_paths, "sequence CSV")->required()->expected(1);
  exp->add_option("--format", format, "export format (json-frames)");
  exp->add_option("--out", out_path, "output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (seed >= 0) overrides.push_back("seed=" + std::to_string(seed));
    if (train->parsed()) return cmd_train(data_paths, config_path, out_path, overrides);
    if (predict->parsed()) return cmd_predict(checkpoint_path, data_paths.at(0), horizon, label, out_path);
    if (eval->parsed())
      return cmd_eval(checkpoint_path, baseline, self_test, data_paths, config_path, metric_mode,
                      out_path, overrides);
    if (transfer->parsed())
      return cmd_transfer(checkpoint_path, data_paths.at(0), schedule, horizon, out_path);
    if (exp->parsed()) return cmd_export(data_paths.at(0), out_path, format);
  } catch (const skelcast::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const skelcast::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const skelcast::ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
