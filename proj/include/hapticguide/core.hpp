#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace hapticguide {

/// Position in the task frame, millimeters. x = lateral (right positive),
/// y = vertical (up positive), z = depth (away from the user positive).
using Vec3 = Eigen::Vector3d;

/// Engine time: integer microseconds since session start.
using Micros = std::int64_t;

inline constexpr Micros kPosePeriodUs = 8333;    // 120 Hz tracker stream
inline constexpr Micros kFramePeriodUs = 10000;  // 100 Hz device command stream

constexpr Micros ms_to_us(double ms) { return static_cast<Micros>(ms * 1000.0); }
constexpr double us_to_s(Micros us) { return static_cast<double>(us) * 1e-6; }

/// Monotone session clock with 1 us granularity.
class Clock {
 public:
  Micros now() const { return now_; }

  /// Moves the clock forward. Throws std::invalid_argument on regression.
  void advance_to(Micros t);

 private:
  Micros now_ = 0;
};

/// Required correction vector, target - tool, per axis (mm).
class AxisError {
 public:
  AxisError() : v_(Vec3::Zero()) {}
  explicit AxisError(const Vec3& correction) : v_(correction) {}

  double dx() const { return v_.x(); }
  double dy() const { return v_.y(); }
  double dz() const { return v_.z(); }
  double operator[](int axis) const { return v_[axis]; }
  const Vec3& vector() const { return v_; }
  double norm() const { return v_.norm(); }

  AxisError operator-() const { return AxisError(-v_); }
  bool operator==(const AxisError& other) const { return v_ == other.v_; }

 private:
  Vec3 v_;
};

struct TargetSpec {
  Vec3 center = Vec3::Zero();
  double visual_radius_mm = 5.0;  // 10 mm sphere
  double tolerance_radius_mm = 2.0;

  /// Throws std::invalid_argument if a radius is not positive or center is non-finite.
  void validate() const;
};

bool is_finite(const Vec3& v);

AxisError axis_error(const Vec3& tool, const Vec3& target);

double euclidean_error(const Vec3& tool, const Vec3& target);

/// Firing times k * period for all k with k * period <= horizon.
std::vector<Micros> periodic_schedule(Micros period_us, Micros horizon_us);

}  // namespace hapticguide
