#include "hapticguide/core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hapticguide {

void Clock::advance_to(Micros t) {
  if (t < now_) {
    throw std::invalid_argument("clock regression: " + std::to_string(t) + " < " +
                                std::to_string(now_));
  }
  now_ = t;
}

void TargetSpec::validate() const {
  if (!is_finite(center)) throw std::invalid_argument("target center must be finite");
  if (!(visual_radius_mm > 0.0)) throw std::invalid_argument("visual_radius_mm must be > 0");
  if (!(tolerance_radius_mm > 0.0)) {
    throw std::invalid_argument("tolerance_radius_mm must be > 0");
  }
}

bool is_finite(const Vec3& v) { return v.allFinite(); }

AxisError axis_error(const Vec3& tool, const Vec3& target) { return AxisError(target - tool); }

double euclidean_error(const Vec3& tool, const Vec3& target) { return (target - tool).norm(); }

std::vector<Micros> periodic_schedule(Micros period_us, Micros horizon_us) {
  if (period_us <= 0) throw std::invalid_argument("period must be positive");
  std::vector<Micros> times;
  if (horizon_us < 0) return times;
  times.reserve(static_cast<std::size_t>(horizon_us / period_us) + 1);
  for (Micros t = 0; t <= horizon_us; t += period_us) times.push_back(t);
  return times;
}

}  // namespace hapticguide
