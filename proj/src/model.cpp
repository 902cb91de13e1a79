#include "skelcast/model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "skelcast/errors.hpp"
#include "skelcast/rng.hpp"

namespace skelcast {
namespace {

using nlohmann::json;

ad::Tensor uniform_init(std::vector<int> shape, int fan_in, Rng& rng) {
  ad::Tensor t = ad::Tensor::zeros(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

ad::Tensor frame_tensor(std::span<const double> frame) {
  return ad::Tensor::vector({frame.begin(), frame.end()});
}

// Label in effect at a decoding step: schedule entry with the largest
// start <= step, or the fixed label, or -1.
int label_at_step(const DecodeOptions& opts, int step) {
  if (!opts.label_schedule.empty()) {
    int current = -1;
    for (const auto& [start, label] : opts.label_schedule) {
      if (start > step) break;
      current = label;
    }
    return current;
  }
  return opts.label.value_or(-1);
}

ad::Tensor embed_on_tape(ad::Tape& tape, const BoundModel& m, const ad::Tensor& x) {
  ad::Tensor h1 = tape.add(tape.matmul(m.embedding.W_e1, x), m.embedding.b_e1);
  ad::Tensor h2 = tape.relu(h1);
  return tape.add(tape.matmul(m.embedding.W_e2, tape.concat(h1, h2)), m.embedding.b_e2);
}

// Attention scores with the U_beta_e * e terms precomputed per rollout.
ad::Tensor attention_on_tape(ad::Tape& tape, const BoundModel& m, const ad::Tensor& v_prev,
                             std::span<const ad::Tensor> projected) {
  ad::Tensor query = tape.matmul(m.attention.U_beta_v, v_prev);
  ad::Tensor scores;
  for (std::size_t i = 0; i < projected.size(); ++i) {
    ad::Tensor pre = tape.add(tape.add(query, projected[i]), m.attention.b_beta);
    ad::Tensor beta = tape.matmul(m.attention.W_beta, tape.tanh(pre));
    scores = i == 0 ? beta : tape.concat(scores, beta);
  }
  return tape.softmax(scores);
}

ad::Tensor condition_on_tape(ad::Tape& tape, const BoundModel& m, const ad::Tensor& h_mc,
                             int label_id) {
  const auto& c = *m.conditioner;
  ad::Tensor embedded = tape.row(c.table, label_id);
  return tape.relu(tape.add(tape.matmul(c.W_mix, tape.concat(h_mc, embedded)), c.b_mix));
}

ad::Tensor mhu_on_tape(ad::Tape& tape, const BoundModel& m, const ad::Tensor& x,
                       const ad::Tensor& h_mc, std::optional<double> pin_gate) {
  ad::Tensor hidden = tape.relu(tape.add(tape.matmul(m.mhu.U_vh, h_mc), m.mhu.b_v));
  ad::Tensor candidate = tape.add(
      tape.add(tape.matmul(m.mhu.W_v, hidden), tape.matmul(m.mhu.U_vx, x)), m.mhu.b_vh);
  ad::Tensor gate_hidden = tape.relu(tape.add(tape.matmul(m.mhu.U_zx, x), m.mhu.b_z));
  ad::Tensor gate = tape.sigmoid(tape.add(tape.matmul(m.mhu.W_z, gate_hidden), m.mhu.b_zx));
  if (pin_gate) gate = tape.affine(gate, 0.0, *pin_gate);
  return tape.add(tape.mul(tape.affine(gate, -1.0, 1.0), candidate), tape.mul(gate, x));
}

void check_frame_dim(const ModelDims& dims, std::size_t got, const char* what) {
  if (static_cast<int>(got) != dims.input)
    throw ShapeError(std::string(what) + ": frame has " + std::to_string(got) +
                     " dims, model expects " + std::to_string(dims.input));
}

}  // namespace

void ModelParams::for_each_param(const std::function<void(const std::string&, ad::Tensor&)>& fn) {
  fn("embedding.W_e1", embedding.W_e1);
  fn("embedding.b_e1", embedding.b_e1);
  fn("embedding.W_e2", embedding.W_e2);
  fn("embedding.b_e2", embedding.b_e2);
  fn("attention.W_beta", attention.W_beta);
  fn("attention.U_beta_v", attention.U_beta_v);
  fn("attention.U_beta_e", attention.U_beta_e);
  fn("attention.b_beta", attention.b_beta);
  fn("mhu.W_v", mhu.W_v);
  fn("mhu.U_vh", mhu.U_vh);
  fn("mhu.b_v", mhu.b_v);
  fn("mhu.U_vx", mhu.U_vx);
  fn("mhu.b_vh", mhu.b_vh);
  fn("mhu.W_z", mhu.W_z);
  fn("mhu.U_zx", mhu.U_zx);
  fn("mhu.b_z", mhu.b_z);
  fn("mhu.b_zx", mhu.b_zx);
  if (conditioner) {
    fn("conditioner.table", conditioner->table);
    fn("conditioner.W_mix", conditioner->W_mix);
    fn("conditioner.b_mix", conditioner->b_mix);
  }
}

void ModelParams::for_each_param(
    const std::function<void(const std::string&, const ad::Tensor&)>& fn) const {
  const_cast<ModelParams*>(this)->for_each_param(
      [&fn](const std::string& name, ad::Tensor& t) { fn(name, t); });
}

int ModelParams::label_id(const std::string& name) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == name) return static_cast<int>(i);
  std::ostringstream os;
  os << "unknown label '" << name << "'; valid labels:";
  for (const auto& l : labels) os << ' ' << l;
  if (labels.empty()) os << " (none)";
  throw std::invalid_argument(os.str());
}

ModelParams init_model(const ModelDims& dims, const NormalizationStats& stats,
                       std::vector<std::string> labels, std::uint64_t seed) {
  if (dims.input <= 0) throw std::invalid_argument("init_model: input dimension must be positive");
  Rng rng(seed);
  ModelParams p;
  p.dims = dims;
  p.dims.labels = static_cast<int>(labels.size());
  p.stats = stats;
  p.labels = std::move(labels);

  const int d = dims.input;
  p.embedding.W_e1 = uniform_init({dims.d_h, d}, d, rng);
  p.embedding.b_e1 = ad::Tensor::zeros({dims.d_h});
  p.embedding.W_e2 = uniform_init({dims.d_e, 2 * dims.d_h}, 2 * dims.d_h, rng);
  p.embedding.b_e2 = ad::Tensor::zeros({dims.d_e});

  p.attention.W_beta = uniform_init({1, dims.d_a}, dims.d_a, rng);
  p.attention.U_beta_v = uniform_init({dims.d_a, d}, d, rng);
  p.attention.U_beta_e = uniform_init({dims.d_a, dims.d_e}, dims.d_e, rng);
  p.attention.b_beta = ad::Tensor::zeros({dims.d_a});

  p.mhu.W_v = uniform_init({d, dims.d_m}, dims.d_m, rng);
  p.mhu.U_vh = uniform_init({dims.d_m, dims.d_e}, dims.d_e, rng);
  p.mhu.b_v = ad::Tensor::zeros({dims.d_m});
  p.mhu.U_vx = uniform_init({d, d}, d, rng);
  p.mhu.b_vh = ad::Tensor::zeros({d});
  p.mhu.W_z = uniform_init({d, dims.d_z}, dims.d_z, rng);
  p.mhu.U_zx = uniform_init({dims.d_z, d}, d, rng);
  p.mhu.b_z = ad::Tensor::zeros({dims.d_z});
  // Gates start near pass-through, matching the strong last-pose prior.
  p.mhu.b_zx = ad::Tensor({d}, std::vector<double>(static_cast<std::size_t>(d), 1.0));

  if (p.dims.labels > 0) {
    LabelConditioner c;
    c.table = uniform_init({p.dims.labels, dims.d_l}, dims.d_l, rng);
    c.W_mix = uniform_init({dims.d_e, dims.d_e + dims.d_l}, dims.d_e + dims.d_l, rng);
    c.b_mix = ad::Tensor::zeros({dims.d_e});
    p.conditioner = std::move(c);
  }
  return p;
}

void validate_schedule(const std::vector<std::pair<int, int>>& schedule, int label_count) {
  if (schedule.empty()) throw std::invalid_argument("label schedule must not be empty");
  if (schedule.front().first != 0)
    throw std::invalid_argument("label schedule must start at step 0");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (i > 0 && schedule[i].first <= schedule[i - 1].first)
      throw std::invalid_argument("label schedule starts must be strictly increasing");
    if (schedule[i].second < 0 || schedule[i].second >= label_count)
      throw std::invalid_argument("label schedule references label id " +
                                  std::to_string(schedule[i].second) + " outside [0, " +
                                  std::to_string(label_count) + ")");
  }
}

BoundModel bind_model(ad::Tape& tape, const ModelParams& params) {
  BoundModel m;
  m.source = &params;
  auto bound = [&tape](const ad::Tensor& t) { return tape.leaf(t); };
  m.embedding = {bound(params.embedding.W_e1), bound(params.embedding.b_e1),
                 bound(params.embedding.W_e2), bound(params.embedding.b_e2)};
  m.attention = {bound(params.attention.W_beta), bound(params.attention.U_beta_v),
                 bound(params.attention.U_beta_e), bound(params.attention.b_beta)};
  m.mhu = {bound(params.mhu.W_v), bound(params.mhu.U_vh), bound(params.mhu.b_v),
           bound(params.mhu.U_vx), bound(params.mhu.b_vh), bound(params.mhu.W_z),
           bound(params.mhu.U_zx), bound(params.mhu.b_z), bound(params.mhu.b_zx)};
  if (params.conditioner)
    m.conditioner = LabelConditioner{bound(params.conditioner->table),
                                     bound(params.conditioner->W_mix),
                                     bound(params.conditioner->b_mix)};
  return m;
}

std::vector<ad::Tensor> decode_on_tape(ad::Tape& tape, const BoundModel& m,
                                       const FrameList& observed, int horizon,
                                       const DecodeOptions& opts) {
  const ModelParams& params = *m.source;
  if (observed.empty()) throw std::invalid_argument("decode_sequence: observed sequence is empty");
  for (const auto& f : observed) check_frame_dim(params.dims, f.size(), "decode_sequence");
  if (!opts.label_schedule.empty())
    validate_schedule(opts.label_schedule, params.dims.labels);
  const bool wants_label = opts.label.has_value() || !opts.label_schedule.empty();
  if (wants_label && !m.conditioner)
    throw std::invalid_argument("decode_sequence: label given but model has no conditioner");
  if (opts.label && (*opts.label < 0 || *opts.label >= params.dims.labels))
    throw std::invalid_argument("decode_sequence: label id " + std::to_string(*opts.label) +
                                " outside [0, " + std::to_string(params.dims.labels) + ")");

  std::vector<ad::Tensor> outputs;
  if (horizon <= 0) return outputs;

  std::vector<ad::Tensor> embeddings;
  embeddings.reserve(observed.size());
  for (const auto& frame : observed)
    embeddings.push_back(embed_on_tape(tape, m, tape.leaf(frame_tensor(frame))));
  ad::Tensor stacked = tape.stack_rows(embeddings);
  std::vector<ad::Tensor> projected;
  projected.reserve(embeddings.size());
  for (const auto& e : embeddings) projected.push_back(tape.matmul(m.attention.U_beta_e, e));

  ad::Tensor x = tape.leaf(frame_tensor(observed.back()));
  ad::Tensor query = x;
  outputs.reserve(static_cast<std::size_t>(horizon));
  for (int t = 0; t < horizon; ++t) {
    ad::Tensor alpha = attention_on_tape(tape, m, query, projected);
    ad::Tensor h_mc = tape.matmul(alpha, stacked);
    const int label = label_at_step(opts, t);
    if (label >= 0) h_mc = condition_on_tape(tape, m, h_mc, label);
    if (opts.step_hook) opts.step_hook(t, label, h_mc.data);
    ad::Tensor next = mhu_on_tape(tape, m, x, h_mc, opts.pin_gate);
    outputs.push_back(next);
    x = next;
    query = next;
  }
  return outputs;
}

FrameList decode_sequence(const ModelParams& params, const FrameList& observed, int horizon,
                          const DecodeOptions& opts) {
  ad::Tape tape;
  BoundModel m = bind_model(tape, params);
  std::vector<ad::Tensor> outputs = decode_on_tape(tape, m, observed, horizon, opts);
  FrameList frames;
  frames.reserve(outputs.size());
  for (const auto& t : outputs) frames.push_back(t.data);
  return frames;
}

Frame embed_skeleton(const ModelParams& params, std::span<const double> x) {
  check_frame_dim(params.dims, x.size(), "embed_skeleton");
  ad::Tape tape;
  BoundModel m = bind_model(tape, params);
  return embed_on_tape(tape, m, tape.leaf(frame_tensor(x))).data;
}

std::vector<double> attention_weights(const ModelParams& params, std::span<const double> v_prev,
                                      const FrameList& embeddings) {
  check_frame_dim(params.dims, v_prev.size(), "attention_weights");
  if (embeddings.empty()) throw std::invalid_argument("attention_weights: no embeddings");
  ad::Tape tape;
  BoundModel m = bind_model(tape, params);
  std::vector<ad::Tensor> projected;
  projected.reserve(embeddings.size());
  for (const auto& e : embeddings)
    projected.push_back(tape.matmul(m.attention.U_beta_e, tape.leaf(frame_tensor(e))));
  return attention_on_tape(tape, m, tape.leaf(frame_tensor(v_prev)), projected).data;
}

Frame motion_context(std::span<const double> alpha, const FrameList& embeddings) {
  if (alpha.size() != embeddings.size())
    throw ShapeError("motion_context: " + std::to_string(alpha.size()) + " weights for " +
                     std::to_string(embeddings.size()) + " embeddings");
  ad::Tape tape;
  std::vector<ad::Tensor> rows;
  rows.reserve(embeddings.size());
  for (const auto& e : embeddings) rows.push_back(tape.leaf(frame_tensor(e)));
  ad::Tensor stacked = tape.stack_rows(rows);
  return tape.matmul(tape.leaf(frame_tensor(alpha)), stacked).data;
}

Frame mhu_step(const ModelParams& params, std::span<const double> x, std::span<const double> h_mc) {
  check_frame_dim(params.dims, x.size(), "mhu_step");
  if (static_cast<int>(h_mc.size()) != params.dims.d_e)
    throw ShapeError("mhu_step: context has " + std::to_string(h_mc.size()) +
                     " dims, model expects " + std::to_string(params.dims.d_e));
  ad::Tape tape;
  BoundModel m = bind_model(tape, params);
  return mhu_on_tape(tape, m, tape.leaf(frame_tensor(x)), tape.leaf(frame_tensor(h_mc)), {}).data;
}

Frame condition_context(const ModelParams& params, std::span<const double> h_mc, int label_id) {
  if (!params.conditioner) return {h_mc.begin(), h_mc.end()};  // pass-through
  if (label_id < 0 || label_id >= params.dims.labels) {
    std::ostringstream os;
    os << "condition_context: label id " << label_id << " outside [0, " << params.dims.labels
       << "); valid labels:";
    for (const auto& l : params.labels) os << ' ' << l;
    throw std::invalid_argument(os.str());
  }
  ad::Tape tape;
  BoundModel m = bind_model(tape, params);
  return condition_on_tape(tape, m, tape.leaf(frame_tensor(h_mc)), label_id).data;
}

// --- checkpointing -------------------------------------------------------

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  const ModelParams& p = ckpt.params;
  json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["dims"] = {{"input", p.dims.input}, {"d_e", p.dims.d_e}, {"d_h", p.dims.d_h},
                 {"d_a", p.dims.d_a},     {"d_m", p.dims.d_m}, {"d_z", p.dims.d_z},
                 {"d_l", p.dims.d_l},     {"labels", p.dims.labels}};
  doc["t_observed"] = ckpt.t_observed;
  doc["t_horizon"] = ckpt.t_horizon;
  doc["labels"] = p.labels;
  doc["normalization"] = {{"min", p.stats.min}, {"max", p.stats.max}};
  json params = json::object();
  p.for_each_param([&params](const std::string& name, const ad::Tensor& t) {
    params[name] = {{"shape", t.shape}, {"data", t.data}};
  });
  doc["params"] = std::move(params);
  return doc.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  try {
    if (doc.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw DataError("checkpoint: unsupported format version " +
                      doc["format_version"].dump());
    Checkpoint ckpt;
    const auto& dims = doc.at("dims");
    ModelDims d;
    d.input = dims.at("input").get<int>();
    d.d_e = dims.at("d_e").get<int>();
    d.d_h = dims.at("d_h").get<int>();
    d.d_a = dims.at("d_a").get<int>();
    d.d_m = dims.at("d_m").get<int>();
    d.d_z = dims.at("d_z").get<int>();
    d.d_l = dims.at("d_l").get<int>();
    d.labels = dims.at("labels").get<int>();
    ckpt.t_observed = doc.at("t_observed").get<int>();
    ckpt.t_horizon = doc.at("t_horizon").get<int>();

    NormalizationStats stats;
    stats.min = doc.at("normalization").at("min").get<std::vector<double>>();
    stats.max = doc.at("normalization").at("max").get<std::vector<double>>();

    ckpt.params = init_model(d, stats, doc.at("labels").get<std::vector<std::string>>(), 0);
    const auto& params = doc.at("params");
    ckpt.params.for_each_param([&params](const std::string& name, ad::Tensor& t) {
      const auto& entry = params.at(name);
      const auto shape = entry.at("shape").get<std::vector<int>>();
      if (shape != t.shape)
        throw DataError("checkpoint: parameter " + name + " has unexpected shape");
      t.data = entry.at("data").get<std::vector<double>>();
      if (t.data.size() != ad::Tensor::zeros(shape).size())
        throw DataError("checkpoint: parameter " + name + " has wrong data length");
    });
    return ckpt;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: missing or malformed field: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out << checkpoint_to_json(ckpt) << '\n';
  if (!out) throw DataError("failed while writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace skelcast
