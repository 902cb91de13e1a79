#include "skelcast/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "skelcast/dataset.hpp"
#include "skelcast/errors.hpp"
#include "skelcast/rotations.hpp"

namespace skelcast {

MetricMode metric_mode_from_string(const std::string& name) {
  if (name == "euler") return MetricMode::kEuler;
  if (name == "raw-expmap") return MetricMode::kRawExpmap;
  throw std::invalid_argument("unknown metric mode '" + name + "' (expected euler or raw-expmap)");
}

std::string to_string(MetricMode mode) {
  return mode == MetricMode::kEuler ? "euler" : "raw-expmap";
}

double angle_distance(double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b))
    throw NumericError("angle_distance: non-finite input");
  const double diff = std::fmod(std::abs(a - b), 2.0 * M_PI);
  return std::min(diff, 2.0 * M_PI - diff);
}

HorizonErrorTable mean_angle_error(const FrameList& pred, const FrameList& truth, MetricMode mode) {
  if (pred.size() != truth.size())
    throw ShapeError("mean_angle_error: prediction has " + std::to_string(pred.size()) +
                     " frames, truth has " + std::to_string(truth.size()));
  HorizonErrorTable table;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const auto& p = pred[t];
    const auto& g = truth[t];
    if (p.size() != g.size() || p.size() % 3 != 0)
      throw ShapeError("mean_angle_error: frame " + std::to_string(t) +
                       " has dims " + std::to_string(p.size()) + " vs " + std::to_string(g.size()) +
                       " (must match and be a multiple of 3)");
    double frame_error = 0.0;
    for (std::size_t j = 0; j < p.size(); j += 3) {
      Eigen::Vector3d a(p[j], p[j + 1], p[j + 2]);
      Eigen::Vector3d b(g[j], g[j + 1], g[j + 2]);
      if (mode == MetricMode::kEuler) {
        a = rotmat_to_euler(expmap_to_rotmat(a));
        b = rotmat_to_euler(expmap_to_rotmat(b));
      }
      double sq = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = angle_distance(a[c], b[c]);
        sq += d * d;
      }
      frame_error += std::sqrt(sq);
    }
    table[static_cast<int>(t + 1) * kMsPerFrame] = frame_error;
  }
  return table;
}

std::string horizon_table_csv(const HorizonErrorTable& table) {
  std::ostringstream os;
  os << "horizon_ms,error\n";
  for (const auto& [ms, err] : table) os << ms << ',' << format_double(err) << '\n';
  return os.str();
}

}  // namespace skelcast
