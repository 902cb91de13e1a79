#include "skelcast/losses.hpp"

#include <string>

#include "skelcast/errors.hpp"

namespace skelcast {
namespace {

ad::Tensor gram_on_tape(ad::Tape& tape, const ad::Tensor& x_t, const ad::Tensor& x_prev) {
  ad::Tensor u = tape.concat(x_t, x_prev);
  const int n = u.shape[0];
  return tape.matmul(tape.reshape(u, {n, 1}), tape.reshape(u, {1, n}));
}

ad::Tensor frame_tensor(std::span<const double> frame) {
  return ad::Tensor::vector({frame.begin(), frame.end()});
}

void check_equal_lengths(const FrameList& pred, const FrameList& truth, const char* what) {
  if (pred.size() != truth.size())
    throw ShapeError(std::string(what) + ": prediction has " + std::to_string(pred.size()) +
                     " frames, truth has " + std::to_string(truth.size()));
}

}  // namespace

ad::Tensor gram_matrix(std::span<const double> x_t, std::span<const double> x_prev) {
  if (x_t.size() != x_prev.size())
    throw ShapeError("gram_matrix: frame lengths disagree: " + std::to_string(x_t.size()) +
                     " vs " + std::to_string(x_prev.size()));
  const std::size_t n = x_t.size() * 2;
  std::vector<double> joined(n);
  std::copy(x_t.begin(), x_t.end(), joined.begin());
  std::copy(x_prev.begin(), x_prev.end(), joined.begin() + static_cast<std::ptrdiff_t>(x_t.size()));
  ad::Tensor g = ad::Tensor::zeros({static_cast<int>(n), static_cast<int>(n)});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g.data[i * n + j] = joined[i] * joined[j];
  return g;
}

ad::Tensor gram_loss_on_tape(ad::Tape& tape, std::span<const ad::Tensor> pred,
                             const FrameList& truth, const ad::Tensor& pred_prev0,
                             std::span<const double> truth_prev0) {
  if (pred.size() != truth.size())
    throw ShapeError("gram_loss: prediction has " + std::to_string(pred.size()) +
                     " frames, truth has " + std::to_string(truth.size()));
  if (pred.empty()) throw ShapeError("gram_loss: needs at least one frame");

  const std::size_t horizon = pred.size();
  ad::Tensor acc;
  bool have_acc = false;
  for (std::size_t k = 0; k + 1 < horizon; ++k) {
    const ad::Tensor& x_t = pred[k];
    const ad::Tensor& x_prev = k == 0 ? pred_prev0 : pred[k - 1];
    ad::Tensor g_pred = gram_on_tape(tape, x_t, x_prev);
    ad::Tensor g_truth = gram_matrix(truth[k], k == 0 ? truth_prev0 : std::span<const double>(truth[k - 1]));
    ad::Tensor diff = tape.sub(g_pred, g_truth);
    ad::Tensor term = tape.sum(tape.mul(diff, diff));
    acc = have_acc ? tape.add(acc, term) : term;
    have_acc = true;
  }
  if (!have_acc) return tape.leaf(ad::Tensor::scalar(0.0));
  // Verbatim normalization: divide by T while summing T-1 transitions.
  return tape.affine(acc, 1.0 / static_cast<double>(horizon), 0.0);
}

double gram_loss(const FrameList& pred, const FrameList& truth, std::span<const double> pred_prev0,
                 std::span<const double> truth_prev0) {
  ad::Tape tape;
  std::vector<ad::Tensor> pred_nodes;
  pred_nodes.reserve(pred.size());
  for (const auto& frame : pred) pred_nodes.push_back(tape.leaf(frame_tensor(frame)));
  return gram_loss_on_tape(tape, pred_nodes, truth, tape.leaf(frame_tensor(pred_prev0)), truth_prev0)
      .value();
}

ad::Tensor mse_loss_on_tape(ad::Tape& tape, std::span<const ad::Tensor> pred,
                            const FrameList& truth) {
  if (pred.size() != truth.size())
    throw ShapeError("mse_loss: prediction has " + std::to_string(pred.size()) +
                     " frames, truth has " + std::to_string(truth.size()));
  if (pred.empty()) throw ShapeError("mse_loss: needs at least one frame");

  ad::Tensor acc;
  bool have_acc = false;
  std::size_t entries = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    ad::Tensor diff = tape.sub(pred[k], frame_tensor(truth[k]));
    ad::Tensor term = tape.sum(tape.mul(diff, diff));
    acc = have_acc ? tape.add(acc, term) : term;
    have_acc = true;
    entries += truth[k].size();
  }
  return tape.affine(acc, 1.0 / static_cast<double>(entries), 0.0);
}

double mse_loss(const FrameList& pred, const FrameList& truth) {
  check_equal_lengths(pred, truth, "mse_loss");
  ad::Tape tape;
  std::vector<ad::Tensor> pred_nodes;
  pred_nodes.reserve(pred.size());
  for (const auto& frame : pred) pred_nodes.push_back(tape.leaf(frame_tensor(frame)));
  return mse_loss_on_tape(tape, pred_nodes, truth).value();
}

}  // namespace skelcast
