#pragma once

#include "hapticguide/core.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace hapticguide {

enum class CueId : std::uint8_t { Left, Right, Up, Down, Forward, Back, Success };

inline constexpr std::size_t kCueCount = 7;
inline constexpr std::array<CueId, kCueCount> kAllCues = {
    CueId::Left, CueId::Right, CueId::Up, CueId::Down, CueId::Forward, CueId::Back, CueId::Success};

/// The five cues presented in the cue identification protocol.
inline constexpr std::array<CueId, 5> kIdentificationCues = {CueId::Left, CueId::Right, CueId::Up,
                                                             CueId::Down, CueId::Success};

std::string_view to_string(CueId cue);
/// Throws std::invalid_argument for unknown names.
CueId cue_from_string(std::string_view name);

constexpr std::size_t index_of(CueId cue) { return static_cast<std::size_t>(cue); }

/// Axis (0 = x, 1 = y, 2 = z) and sign (+1 / -1) of a directional cue.
struct CueDirection {
  int axis;
  int sign;
};
std::optional<CueDirection> direction_of(CueId cue);
CueId cue_for(int axis, int sign);

/// Small ordered set of cues, iterated in enum order.
class CueSet {
 public:
  CueSet() = default;
  CueSet(std::initializer_list<CueId> cues) {
    for (CueId c : cues) insert(c);
  }

  bool contains(CueId c) const { return (mask_ >> index_of(c)) & 1u; }
  void insert(CueId c) { mask_ |= static_cast<std::uint8_t>(1u << index_of(c)); }
  void erase(CueId c) { mask_ &= static_cast<std::uint8_t>(~(1u << index_of(c))); }
  bool empty() const { return mask_ == 0; }
  std::size_t size() const;
  std::vector<CueId> to_vector() const;

  bool operator==(const CueSet&) const = default;

 private:
  std::uint8_t mask_ = 0;
};

struct PolicyConfig {
  double axis_threshold_mm = 2.0;
  double dwell_ms = 500.0;
  double pulse_on_ms = 200.0;
  double pulse_off_ms = 200.0;
  int directional_intensity = 128;
  int state_intensity = 255;
  double state_burst_ms = 200.0;
  double tolerance_radius_mm = 2.0;
  double hysteresis_mm = 0.0;
  bool largest_axis_only = false;

  /// Throws std::invalid_argument when a field violates its range.
  void validate() const;

  bool operator==(const PolicyConfig&) const = default;
};

enum class CueEventKind : std::uint8_t { Start, Stop, Burst };

std::string_view to_string(CueEventKind kind);
CueEventKind cue_event_kind_from_string(std::string_view name);

struct CueEvent {
  Micros at_us = 0;
  CueId cue = CueId::Left;
  CueEventKind kind = CueEventKind::Start;

  bool operator==(const CueEvent&) const = default;
};

struct DwellState {
  std::optional<Micros> inside_since_us;
  bool fired = false;
  std::optional<Micros> last_sample_us;

  bool operator==(const DwellState&) const = default;
};

struct DwellUpdate {
  DwellState state;
  bool success_fired = false;
};

/// Directional cues for one error sample. Each violated axis contributes the
/// cue that points along the required correction (pull convention).
CueSet select_directional_cues(const AxisError& err, const PolicyConfig& cfg,
                               const CueSet& previously_active = {});

/// Advances the success-dwell timer. Throws std::invalid_argument on time regression.
DwellUpdate update_dwell(const DwellState& state, const AxisError& err, Micros now_us,
                         const PolicyConfig& cfg);

struct PolicyState {
  CueSet active;
  DwellState dwell;
};

struct PolicyStep {
  std::vector<CueEvent> events;
  PolicyState state;
};

/// One pose sample through the guidance state machine. Events are ordered
/// Stops, then Starts, then the Success burst.
PolicyStep policy_step(const Vec3& tool, const TargetSpec& target, Micros now_us,
                       const PolicyConfig& cfg, const PolicyState& state);

/// Owning wrapper over policy_step for sequential drivers.
class GuidancePolicy {
 public:
  explicit GuidancePolicy(PolicyConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  std::vector<CueEvent> step(const Vec3& tool, const TargetSpec& target, Micros now_us);

  const PolicyState& state() const { return state_; }
  const PolicyConfig& config() const { return cfg_; }

 private:
  PolicyConfig cfg_;
  PolicyState state_;
};

}  // namespace hapticguide
