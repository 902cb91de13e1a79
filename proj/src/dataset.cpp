#include "skelcast/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string_view>

#include "skelcast/errors.hpp"

namespace skelcast {
namespace {

bool parse_double(std::string_view text, double& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

// "# key=value key=value ..." metadata line.
void parse_header(const std::string& line, int line_no, const std::string& path,
                  MotionSequence& seq, int& declared_joints) {
  std::istringstream tokens(line.substr(1));
  std::string token;
  while (tokens >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos)
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed header token '" + token + "'");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "fps") {
      int fps = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), fps);
      if (ec != std::errc() || ptr != value.data() + value.size() || fps <= 0)
        throw DataError(path + ":" + std::to_string(line_no) + ": invalid fps '" + value + "'");
      seq.fps = fps;
    } else if (key == "label") {
      seq.label = value;
    } else if (key == "subject") {
      seq.subject = value;
    } else if (key == "joints") {
      int joints = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), joints);
      if (ec != std::errc() || ptr != value.data() + value.size() || joints <= 0)
        throw DataError(path + ":" + std::to_string(line_no) + ": invalid joints '" + value + "'");
      declared_joints = joints;
    }
    // unknown keys are ignored for forward compatibility
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> NormalizationStats::normalize(std::span<const double> frame) const {
  if (frame.size() != min.size())
    throw ShapeError("normalize: frame has " + std::to_string(frame.size()) +
                     " dims, stats have " + std::to_string(min.size()));
  std::vector<double> out(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const double range = max[i] - min[i];
    out[i] = range > 0.0 ? (frame[i] - min[i]) / range * 2.0 - 1.0 : 0.0;
  }
  return out;
}

std::vector<double> NormalizationStats::denormalize(std::span<const double> frame) const {
  if (frame.size() != min.size())
    throw ShapeError("denormalize: frame has " + std::to_string(frame.size()) +
                     " dims, stats have " + std::to_string(min.size()));
  std::vector<double> out(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    const double range = max[i] - min[i];
    out[i] = range > 0.0 ? (frame[i] + 1.0) * 0.5 * range + min[i] : min[i];
  }
  return out;
}

std::vector<MotionSequence> load_sequences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sequence file: " + path);

  std::vector<MotionSequence> out;
  MotionSequence current;
  int declared_joints = -1;
  bool have_current = false;

  auto flush = [&] {
    if (have_current && !current.frames.empty()) {
      if (declared_joints > 0 && current.dim() != 3 * declared_joints)
        throw DataError(path + ": header declares joints=" + std::to_string(declared_joints) +
                        " but rows have " + std::to_string(current.dim()) + " columns");
      out.push_back(std::move(current));
    }
    current = MotionSequence{};
    declared_joints = -1;
    have_current = false;
  };

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      flush();
      have_current = true;
      parse_header(line, line_no, path, current, declared_joints);
      continue;
    }
    have_current = true;
    std::vector<double> row;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) comma = line.size();
      std::string_view cell(line.data() + start, comma - start);
      while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
      double value = 0.0;
      if (!parse_double(cell, value))
        throw DataError(path + ":" + std::to_string(line_no) + ": malformed value '" +
                        std::string(cell) + "'");
      if (!std::isfinite(value))
        throw DataError(path + ":" + std::to_string(line_no) + ": non-finite value");
      row.push_back(value);
      start = comma + 1;
    }
    if (!current.frames.empty() && row.size() != current.frames[0].size())
      throw DataError(path + ":" + std::to_string(line_no) + ": row has " +
                      std::to_string(row.size()) + " columns, previous rows have " +
                      std::to_string(current.frames[0].size()));
    current.frames.push_back(std::move(row));
  }
  flush();
  return out;
}

void save_sequences(const std::string& path, std::span<const MotionSequence> seqs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path);
  for (const auto& seq : seqs) {
    out << "# fps=" << seq.fps;
    if (!seq.label.empty()) out << " label=" << seq.label;
    if (!seq.subject.empty()) out << " subject=" << seq.subject;
    if (seq.dim() > 0 && seq.dim() % 3 == 0) out << " joints=" << seq.dim() / 3;
    out << '\n';
    for (const auto& frame : seq.frames) {
      for (std::size_t i = 0; i < frame.size(); ++i) {
        if (i) out << ',';
        out << format_double(frame[i]);
      }
      out << '\n';
    }
  }
  if (!out) throw DataError("failed while writing: " + path);
}

void save_sequence(const std::string& path, const MotionSequence& seq) {
  save_sequences(path, std::span<const MotionSequence>(&seq, 1));
}

MotionSequence downsample(const MotionSequence& seq, int factor) {
  if (factor < 1) throw std::invalid_argument("downsample: factor must be >= 1");
  MotionSequence out;
  out.fps = seq.fps / factor;
  out.label = seq.label;
  out.subject = seq.subject;
  for (std::size_t i = 0; i < seq.frames.size(); i += static_cast<std::size_t>(factor))
    out.frames.push_back(seq.frames[i]);
  return out;
}

NormalizationStats fit_normalizer(std::span<const MotionSequence> train) {
  std::size_t dims = 0;
  for (const auto& seq : train)
    if (!seq.frames.empty()) {
      dims = seq.frames[0].size();
      break;
    }
  if (dims == 0) throw std::invalid_argument("fit_normalizer: no frames in training data");

  NormalizationStats stats;
  stats.min.assign(dims, std::numeric_limits<double>::infinity());
  stats.max.assign(dims, -std::numeric_limits<double>::infinity());
  for (const auto& seq : train) {
    for (const auto& frame : seq.frames) {
      if (frame.size() != dims)
        throw ShapeError("fit_normalizer: sequences disagree on dimension: " +
                         std::to_string(frame.size()) + " vs " + std::to_string(dims));
      for (std::size_t i = 0; i < dims; ++i) {
        stats.min[i] = std::min(stats.min[i], frame[i]);
        stats.max[i] = std::max(stats.max[i], frame[i]);
      }
    }
  }
  return stats;
}

std::vector<WindowSample> make_windows(const MotionSequence& seq, int t_observed, int t_horizon,
                                       int stride, int label_id) {
  if (t_observed < 1 || t_horizon < 1) throw std::invalid_argument("make_windows: T' and T must be >= 1");
  if (stride < 1) throw std::invalid_argument("make_windows: stride must be >= 1");
  const std::size_t window = static_cast<std::size_t>(t_observed) + static_cast<std::size_t>(t_horizon);
  std::vector<WindowSample> out;
  if (seq.frames.size() < window) return out;
  for (std::size_t s = 0; s + window <= seq.frames.size(); s += static_cast<std::size_t>(stride)) {
    WindowSample w;
    w.observed.assign(seq.frames.begin() + static_cast<std::ptrdiff_t>(s),
                      seq.frames.begin() + static_cast<std::ptrdiff_t>(s + t_observed));
    w.target.assign(seq.frames.begin() + static_cast<std::ptrdiff_t>(s + t_observed),
                    seq.frames.begin() + static_cast<std::ptrdiff_t>(s + window));
    w.label = label_id;
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<std::string> label_vocabulary(std::span<const MotionSequence> seqs) {
  std::set<std::string> labels;
  for (const auto& seq : seqs)
    if (!seq.label.empty()) labels.insert(seq.label);
  return {labels.begin(), labels.end()};
}

}  // namespace skelcast
