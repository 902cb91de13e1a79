#include "skelcast/baselines.hpp"

#include <stdexcept>

namespace skelcast {

FrameList zero_velocity_predict(const FrameList& observed, int horizon) {
  if (observed.empty())
    throw std::invalid_argument("zero_velocity_predict: observed sequence is empty");
  if (horizon < 0) throw std::invalid_argument("zero_velocity_predict: negative horizon");
  return FrameList(static_cast<std::size_t>(horizon), observed.back());
}

}  // namespace skelcast
