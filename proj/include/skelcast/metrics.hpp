#pragma once

#include <map>
#include <string>

#include "skelcast/losses.hpp"

namespace skelcast {

// Prediction lead time in milliseconds (40ms per frame at 25 fps)
// mapped to mean angle error in radians.
using HorizonErrorTable = std::map<int, double>;

constexpr int kMsPerFrame = 40;

enum class MetricMode { kEuler, kRawExpmap };

MetricMode metric_mode_from_string(const std::string& name);
std::string to_string(MetricMode mode);

// Wrapped angular distance min{|a-b|, 2pi-|a-b|} in [0, pi].
double angle_distance(double a, double b);

// Per-horizon error of a single prediction/ground-truth pair: the sum
// over joints of the root-sum-square wrapped distance of the joint's
// angle triple. In euler mode each exponential-map triple is converted
// through its rotation matrix first.
HorizonErrorTable mean_angle_error(const FrameList& pred, const FrameList& truth, MetricMode mode);

// CSV rows "horizon_ms,error" with header.
std::string horizon_table_csv(const HorizonErrorTable& table);

}  // namespace skelcast
