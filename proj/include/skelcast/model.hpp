#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skelcast/dataset.hpp"
#include "skelcast/losses.hpp"
#include "skelcast/tensor.hpp"

namespace skelcast {

struct ModelDims {
  int input = 0;  // flattened skeleton dimension D = 3N
  int d_e = 512;  // embedding width
  int d_h = 512;  // embedding hidden width
  int d_a = 256;  // attention score width
  int d_m = 1024; // candidate-pose hidden width
  int d_z = 1024; // gate hidden width
  int d_l = 64;   // label embedding width
  int labels = 0; // label vocabulary size, 0 = unconditioned
};

struct EmbeddingParams {
  ad::Tensor W_e1, b_e1;  // d_h x D, d_h
  ad::Tensor W_e2, b_e2;  // d_e x 2*d_h, d_e
};

struct AttentionParams {
  ad::Tensor W_beta;    // 1 x d_a
  ad::Tensor U_beta_v;  // d_a x D
  ad::Tensor U_beta_e;  // d_a x d_e
  ad::Tensor b_beta;    // d_a
};

struct MhuParams {
  ad::Tensor W_v;   // D x d_m
  ad::Tensor U_vh;  // d_m x d_e
  ad::Tensor b_v;   // d_m
  ad::Tensor U_vx;  // D x D
  ad::Tensor b_vh;  // D
  ad::Tensor W_z;   // D x d_z
  ad::Tensor U_zx;  // d_z x D
  ad::Tensor b_z;   // d_z
  ad::Tensor b_zx;  // D
};

struct LabelConditioner {
  ad::Tensor table;  // L x d_l label embeddings
  ad::Tensor W_mix;  // d_e x (d_e + d_l)
  ad::Tensor b_mix;  // d_e
};

struct ModelParams {
  ModelDims dims;
  EmbeddingParams embedding;
  AttentionParams attention;
  MhuParams mhu;
  std::optional<LabelConditioner> conditioner;
  NormalizationStats stats;
  std::vector<std::string> labels;

  // Visits every learned array in a fixed order (also the gradient
  // reduction and serialization order).
  void for_each_param(const std::function<void(const std::string&, ad::Tensor&)>& fn);
  void for_each_param(const std::function<void(const std::string&, const ad::Tensor&)>& fn) const;

  int label_id(const std::string& name) const;  // throws listing valid labels
};

// Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] weights, zero biases except
// the gate output bias which starts at +1 so gates open near
// pass-through.
ModelParams init_model(const ModelDims& dims, const NormalizationStats& stats,
                       std::vector<std::string> labels, std::uint64_t seed);

// --- rollout -------------------------------------------------------------

struct DecodeOptions {
  // Replaces every gate activation with this constant (z=1 reproduces
  // the zero-velocity baseline exactly).
  std::optional<double> pin_gate;
  // Conditioning label for the whole rollout.
  std::optional<int> label;
  // (start step, label id) pairs, 0-based, sorted, first entry at 0;
  // overrides `label` when non-empty.
  std::vector<std::pair<int, int>> label_schedule;
  // Called once per decoding step with the step index, the label in
  // effect (-1 when unconditioned) and the motion context fed to the
  // recurrent unit.
  std::function<void(int step, int label, const Frame& context)> step_hook;
};

void validate_schedule(const std::vector<std::pair<int, int>>& schedule, int label_count);

// Tape-level pieces; value-level wrappers below replay the identical
// operation sequence, so chained wrapper calls reproduce decode output
// bit for bit.
struct BoundModel;

// Autoregressive rollout: embeds the observed (normalized) frames once,
// starts the decoder input and attention query from the last observed
// frame and feeds each prediction back as the next input.
FrameList decode_sequence(const ModelParams& params, const FrameList& observed, int horizon,
                          const DecodeOptions& opts = {});

// Spec'd building blocks, value level.
Frame embed_skeleton(const ModelParams& params, std::span<const double> x);
std::vector<double> attention_weights(const ModelParams& params, std::span<const double> v_prev,
                                      const FrameList& embeddings);
Frame motion_context(std::span<const double> alpha, const FrameList& embeddings);
Frame mhu_step(const ModelParams& params, std::span<const double> x, std::span<const double> h_mc);
Frame condition_context(const ModelParams& params, std::span<const double> h_mc, int label_id);

// Training-facing graph construction.
struct BoundModel {
  const ModelParams* source = nullptr;
  EmbeddingParams embedding;
  AttentionParams attention;
  MhuParams mhu;
  std::optional<LabelConditioner> conditioner;
};

BoundModel bind_model(ad::Tape& tape, const ModelParams& params);
std::vector<ad::Tensor> decode_on_tape(ad::Tape& tape, const BoundModel& model,
                                       const FrameList& observed, int horizon,
                                       const DecodeOptions& opts = {});

// --- checkpointing -------------------------------------------------------

struct Checkpoint {
  ModelParams params;
  int t_observed = 30;
  int t_horizon = 10;
};

constexpr int kCheckpointFormatVersion = 1;

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace skelcast
