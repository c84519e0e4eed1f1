#include "hapticguide/cue_policy.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hapticguide {

namespace {

constexpr std::array<std::string_view, kCueCount> kCueNames = {"Left",    "Right", "Up",
                                                               "Down",    "Forward", "Back",
                                                               "Success"};

}  // namespace

std::string_view to_string(CueId cue) { return kCueNames[index_of(cue)]; }

CueId cue_from_string(std::string_view name) {
  for (CueId c : kAllCues) {
    if (to_string(c) == name) return c;
  }
  throw std::invalid_argument("unknown cue: " + std::string(name));
}

std::optional<CueDirection> direction_of(CueId cue) {
  switch (cue) {
    case CueId::Right: return CueDirection{0, +1};
    case CueId::Left: return CueDirection{0, -1};
    case CueId::Up: return CueDirection{1, +1};
    case CueId::Down: return CueDirection{1, -1};
    case CueId::Forward: return CueDirection{2, +1};
    case CueId::Back: return CueDirection{2, -1};
    case CueId::Success: return std::nullopt;
  }
  return std::nullopt;
}

CueId cue_for(int axis, int sign) {
  static constexpr CueId kPositive[3] = {CueId::Right, CueId::Up, CueId::Forward};
  static constexpr CueId kNegative[3] = {CueId::Left, CueId::Down, CueId::Back};
  if (axis < 0 || axis > 2 || sign == 0) throw std::invalid_argument("bad axis/sign");
  return sign > 0 ? kPositive[axis] : kNegative[axis];
}

std::size_t CueSet::size() const { return static_cast<std::size_t>(std::popcount(mask_)); }

std::vector<CueId> CueSet::to_vector() const {
  std::vector<CueId> out;
  for (CueId c : kAllCues) {
    if (contains(c)) out.push_back(c);
  }
  return out;
}

void PolicyConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(name) + " must be positive");
    }
  };
  positive(axis_threshold_mm, "axis_threshold_mm");
  positive(dwell_ms, "dwell_ms");
  positive(pulse_on_ms, "pulse_on_ms");
  positive(pulse_off_ms, "pulse_off_ms");
  positive(state_burst_ms, "state_burst_ms");
  positive(tolerance_radius_mm, "tolerance_radius_mm");
  if (directional_intensity <= 0) throw std::invalid_argument("directional_intensity must be positive");
  if (!(hysteresis_mm >= 0.0)) throw std::invalid_argument("hysteresis_mm must be >= 0");
  if (directional_intensity > state_intensity || state_intensity > 255) {
    throw std::invalid_argument("need directional_intensity <= state_intensity <= 255");
  }
}

std::string_view to_string(CueEventKind kind) {
  switch (kind) {
    case CueEventKind::Start: return "Start";
    case CueEventKind::Stop: return "Stop";
    case CueEventKind::Burst: return "Burst";
  }
  return "?";
}

CueEventKind cue_event_kind_from_string(std::string_view name) {
  if (name == "Start") return CueEventKind::Start;
  if (name == "Stop") return CueEventKind::Stop;
  if (name == "Burst") return CueEventKind::Burst;
  throw std::invalid_argument("unknown cue event kind: " + std::string(name));
}

CueSet select_directional_cues(const AxisError& err, const PolicyConfig& cfg,
                               const CueSet& previously_active) {
  CueSet out;
  int best_axis = -1;
  double best_magnitude = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    const double component = err[axis];
    if (component == 0.0) continue;
    const int sign = component > 0.0 ? +1 : -1;
    const CueId cue = cue_for(axis, sign);
    const double threshold = previously_active.contains(cue)
                                 ? cfg.axis_threshold_mm - cfg.hysteresis_mm
                                 : cfg.axis_threshold_mm;
    const double magnitude = std::abs(component);
    if (magnitude <= threshold) continue;
    if (cfg.largest_axis_only) {
      if (magnitude > best_magnitude) {
        best_magnitude = magnitude;
        best_axis = axis;
      }
    } else {
      out.insert(cue);
    }
  }
  if (cfg.largest_axis_only && best_axis >= 0) {
    out.insert(cue_for(best_axis, err[best_axis] > 0.0 ? +1 : -1));
  }
  return out;
}

DwellUpdate update_dwell(const DwellState& state, const AxisError& err, Micros now_us,
                         const PolicyConfig& cfg) {
  if (state.last_sample_us && now_us < *state.last_sample_us) {
    throw std::invalid_argument("time regression in dwell update");
  }
  DwellUpdate out{state, false};
  out.state.last_sample_us = now_us;
  if (err.norm() > cfg.tolerance_radius_mm) {
    out.state.inside_since_us.reset();
    out.state.fired = false;
    return out;
  }
  if (!out.state.inside_since_us) out.state.inside_since_us = now_us;
  const Micros held = now_us - *out.state.inside_since_us;
  if (!out.state.fired && static_cast<double>(held) >= cfg.dwell_ms * 1000.0) {
    out.state.fired = true;
    out.success_fired = true;
  }
  return out;
}

PolicyStep policy_step(const Vec3& tool, const TargetSpec& target, Micros now_us,
                       const PolicyConfig& cfg, const PolicyState& state) {
  const AxisError err = axis_error(tool, target.center);
  const DwellUpdate dwell = update_dwell(state.dwell, err, now_us, cfg);

  PolicyStep out;
  out.state.dwell = dwell.state;
  const bool inside = err.norm() <= cfg.tolerance_radius_mm;
  const CueSet desired = inside ? CueSet{} : select_directional_cues(err, cfg, state.active);

  for (CueId c : state.active.to_vector()) {
    if (!desired.contains(c)) out.events.push_back({now_us, c, CueEventKind::Stop});
  }
  for (CueId c : desired.to_vector()) {
    if (!state.active.contains(c)) out.events.push_back({now_us, c, CueEventKind::Start});
  }
  if (dwell.success_fired) out.events.push_back({now_us, CueId::Success, CueEventKind::Burst});
  out.state.active = desired;
  return out;
}

std::vector<CueEvent> GuidancePolicy::step(const Vec3& tool, const TargetSpec& target,
                                           Micros now_us) {
  PolicyStep s = policy_step(tool, target, now_us, cfg_, state_);
  state_ = s.state;
  return std::move(s.events);
}

}  // namespace hapticguide
