#pragma once

#include <span>
#include <string>
#include <vector>

namespace skelcast {

// Time-ordered skeleton poses. Each frame is one flattened vector of
// 3 exponential-map components per joint (D = 3N doubles).
struct MotionSequence {
  std::vector<std::vector<double>> frames;
  int fps = 25;
  std::string label;    // activity category, empty when unlabeled
  std::string subject;  // capture subject, empty when unknown

  int dim() const { return frames.empty() ? 0 : static_cast<int>(frames[0].size()); }
  std::size_t length() const { return frames.size(); }
};

// Per-dimension training-set extrema; maps the data linearly into
// [-1, 1]. Dimensions with max == min normalize to 0 and denormalize
// back to the stored midpoint.
struct NormalizationStats {
  std::vector<double> min;
  std::vector<double> max;

  std::size_t dim() const { return min.size(); }
  std::vector<double> normalize(std::span<const double> frame) const;
  std::vector<double> denormalize(std::span<const double> frame) const;
};

// A contiguous slice: `target` immediately follows `observed` in the
// source sequence.
struct WindowSample {
  std::vector<std::vector<double>> observed;
  std::vector<std::vector<double>> target;
  int label = -1;  // index into the label vocabulary, -1 when absent

  int dim() const { return observed.empty() ? 0 : static_cast<int>(observed[0].size()); }
};

// Plain-text sequence files: one frame per row of comma-separated
// decimal floats, with an optional metadata line
//   # fps=<int> label=<string> subject=<string> joints=<N>
// Every '#' line starts a new sequence, so one file can carry several.
std::vector<MotionSequence> load_sequences(const std::string& path);
void save_sequences(const std::string& path, std::span<const MotionSequence> seqs);
void save_sequence(const std::string& path, const MotionSequence& seq);

// Keeps frames at indices 0, factor, 2*factor, ...; divides fps by factor.
MotionSequence downsample(const MotionSequence& seq, int factor);

NormalizationStats fit_normalizer(std::span<const MotionSequence> train);

// Windows of length t_observed + t_horizon starting at multiples of
// `stride`. A sequence shorter than one window yields an empty list.
std::vector<WindowSample> make_windows(const MotionSequence& seq, int t_observed, int t_horizon,
                                       int stride, int label_id = -1);

// Sorted unique non-empty activity labels; index order defines label ids.
std::vector<std::string> label_vocabulary(std::span<const MotionSequence> seqs);

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

}  // namespace skelcast
