#pragma once

#include <span>
#include <vector>

#include "skelcast/tensor.hpp"

namespace skelcast {

using Frame = std::vector<double>;
using FrameList = std::vector<Frame>;

// Outer product of the concatenated pair [x_t; x_prev] with itself
// (2D x 2D, symmetric, rank <= 1).
ad::Tensor gram_matrix(std::span<const double> x_t, std::span<const double> x_prev);

// Mean over T of squared Frobenius distances between consecutive-pair
// gram matrices; the sum runs over the T-1 transitions and the first
// pair uses the supplied previous frames (the last observed skeleton).
double gram_loss(const FrameList& pred, const FrameList& truth,
                 std::span<const double> pred_prev0, std::span<const double> truth_prev0);

// Mean over all T*D entries of the squared difference.
double mse_loss(const FrameList& pred, const FrameList& truth);

// Tape versions used by training; predicted frames are graph nodes,
// ground truth enters as constants.
ad::Tensor gram_loss_on_tape(ad::Tape& tape, std::span<const ad::Tensor> pred,
                             const FrameList& truth, const ad::Tensor& pred_prev0,
                             std::span<const double> truth_prev0);
ad::Tensor mse_loss_on_tape(ad::Tape& tape, std::span<const ad::Tensor> pred,
                            const FrameList& truth);

}  // namespace skelcast
