#pragma once

#include "skelcast/losses.hpp"

namespace skelcast {

// Repeats the last observed pose for every future frame.
FrameList zero_velocity_predict(const FrameList& observed, int horizon);

}  // namespace skelcast
