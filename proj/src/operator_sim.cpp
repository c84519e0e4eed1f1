#include "hapticguide/operator_sim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hapticguide {

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::AROnly: return "AROnly";
    case Condition::HapticOnly: return "HapticOnly";
    case Condition::Multimodal: return "Multimodal";
  }
  return "?";
}

std::string_view short_name(Condition c) {
  switch (c) {
    case Condition::AROnly: return "ar";
    case Condition::HapticOnly: return "haptic";
    case Condition::Multimodal: return "multi";
  }
  return "?";
}

Condition condition_from_string(std::string_view name) {
  for (Condition c : kAllConditions) {
    if (name == to_string(c) || name == short_name(c)) return c;
  }
  throw std::invalid_argument("unknown condition: " + std::string(name));
}

std::optional<std::size_t> identification_index(CueId cue) {
  for (std::size_t i = 0; i < kIdentificationCues.size(); ++i) {
    if (kIdentificationCues[i] == cue) return i;
  }
  return std::nullopt;
}

void ConfusionModel::validate() const {
  for (const auto& row : rows) {
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("confusion probability outside [0,1]");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("confusion row does not sum to 1");
  }
  if (!(rt_mean_s > 0.0)) throw std::invalid_argument("rt_mean_s must be positive");
  if (!(rt_sd_s >= 0.0)) throw std::invalid_argument("rt_sd_s must be >= 0");
  if (!(rt_min_s >= 0.0)) throw std::invalid_argument("rt_min_s must be >= 0");
}

double ConfusionModel::correct_probability(CueId cue) const {
  const auto i = identification_index(cue);
  if (!i) throw std::invalid_argument("cue outside identification set");
  return rows[*i][*i];
}

ConfusionModel ConfusionModel::identity() {
  ConfusionModel m;
  for (std::size_t i = 0; i < 5; ++i) m.rows[i][i] = 1.0;
  return m;
}

ConfusionModel default_confusion_model() {
  ConfusionModel m;
  // Columns: Left, Right, Up, Down, Success. Vertical cues lose most of their
  // mass to the opposite vertical cue, horizontal ones to the opposite side.
  m.rows[0] = {0.940, 0.041, 0.008, 0.007, 0.004};
  m.rows[1] = {0.035, 0.950, 0.007, 0.006, 0.002};
  m.rows[2] = {0.011, 0.011, 0.830, 0.143, 0.005};
  m.rows[3] = {0.010, 0.010, 0.125, 0.850, 0.005};
  m.rows[4] = {0.0025, 0.0025, 0.0025, 0.0025, 0.990};
  m.rt_mean_s = 1.1;
  m.rt_sd_s = 0.3;
  m.rt_min_s = 0.2;
  return m;
}

CueId identify_cue(CueId true_cue, const ConfusionModel& model, double u) {
  const auto row = identification_index(true_cue);
  if (!row) throw std::invalid_argument("cue has no confusion row: " + std::string(to_string(true_cue)));
  if (!(u >= 0.0 && u < 1.0)) throw std::invalid_argument("identification quantile outside [0,1)");
  double cumulative = 0.0;
  for (std::size_t j = 0; j < 5; ++j) {
    cumulative += model.rows[*row][j];
    if (u < cumulative) return kIdentificationCues[j];
  }
  // Rounding left the row sum just under u: take the last cue with mass.
  for (std::size_t j = 5; j-- > 0;) {
    if (model.rows[*row][j] > 0.0) return kIdentificationCues[j];
  }
  return true_cue;
}

double sample_response_time(const ConfusionModel& model, Rng& rng) {
  double rt = rng.normal(model.rt_mean_s, model.rt_sd_s);
  while (rt < model.rt_min_s) rt = rng.normal(model.rt_mean_s, model.rt_sd_s);
  return rt;
}

Perception perceive_cue(CueId true_cue, const ConfusionModel& model, Rng& rng) {
  if (!identification_index(true_cue)) {
    throw std::invalid_argument("cue has no confusion row: " + std::string(to_string(true_cue)));
  }
  const CueId perceived = identify_cue(true_cue, model, rng.uniform());
  return {perceived, sample_response_time(model, rng)};
}

void OperatorParams::validate() const {
  auto finite_nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be >= 0");
  };
  finite_nonneg(reaction_delay_ms, "reaction_delay_ms");
  finite_nonneg(multimodal_checking_delay_ms, "multimodal_checking_delay_ms");
  finite_nonneg(motor_noise_mm, "motor_noise_mm");
  finite_nonneg(visual_lateral_noise_mm, "visual_lateral_noise_mm");
  finite_nonneg(visual_depth_noise_mm, "visual_depth_noise_mm");
  finite_nonneg(reference_depth_noise_mm, "reference_depth_noise_mm");
  finite_nonneg(stop_dwell_ms, "stop_dwell_ms");
  if (!std::isfinite(visual_depth_bias_mm)) throw std::invalid_argument("visual_depth_bias_mm must be finite");
  if (!(control_gain > 0.0) || !std::isfinite(control_gain)) {
    throw std::invalid_argument("control_gain must be > 0");
  }
  if (!(haptic_step_mm > 0.0)) throw std::invalid_argument("haptic_step_mm must be > 0");
  finite_nonneg(haptic_stop_offset_mm, "haptic_stop_offset_mm");
  if (!(haptic_weight > 0.0 && haptic_weight <= 1.0)) {
    throw std::invalid_argument("haptic_weight must be in (0,1]");
  }
  for (double tol : perceived_stop_tolerance_mm) {
    if (!(tol > 0.0)) throw std::invalid_argument("stop tolerances must be > 0");
  }
}

OperatorParams ideal_operator_params() {
  OperatorParams p;
  p.control_gain = 1.0;
  p.haptic_step_mm = 4.0;
  p.haptic_stop_offset_mm = 2.0;
  p.haptic_weight = 1.0;
  p.perceived_stop_tolerance_mm = {0.05, 0.05, 0.05};
  return p;
}

OperatorParams calibrated_operator_params() {
  // Fitted to the guidance study aggregates, 27 participants, seeds 1-3.
  OperatorParams p;
  p.reaction_delay_ms = 433.0;
  p.control_gain = 0.46;
  p.motor_noise_mm = 0.005;
  p.visual_depth_bias_mm = -2.3;  // opaque target: stops short
  p.visual_lateral_noise_mm = 3.9;
  p.visual_depth_noise_mm = 1.7;
  p.reference_depth_noise_mm = 3.9;
  p.haptic_step_mm = 2.1;
  p.haptic_stop_offset_mm = 7.4;
  p.haptic_weight = 0.8;
  p.perceived_stop_tolerance_mm = {5.3, 5.5, 4.2};
  p.multimodal_checking_delay_ms = 0.0;
  p.stop_dwell_ms = 500.0;
  return p;
}

Vec3 initial_estimate(Condition condition, const TargetSpec& target, const Vec3& home,
                      const OperatorParams& params, Rng& rng) {
  if (condition == Condition::HapticOnly) {
    // Physical depth reference only: degraded depth, nothing laterally.
    const double dz = rng.normal(0.0, params.reference_depth_noise_mm);
    return {home.x(), home.y(), target.center.z() + dz};
  }
  const double nx = rng.normal(0.0, params.visual_lateral_noise_mm);
  const double ny = rng.normal(0.0, params.visual_lateral_noise_mm);
  const double nz = rng.normal(params.visual_depth_bias_mm, params.visual_depth_noise_mm);
  return target.center + Vec3(nx, ny, nz);
}

CuePerceiver::CuePerceiver(ConfusionModel model, Micros recheck_period_us)
    : model_(std::move(model)), recheck_period_us_(recheck_period_us) {
  model_.validate();
  if (recheck_period_us_ <= 0) throw std::invalid_argument("recheck period must be positive");
}

CueId CuePerceiver::identify(CueId cue, Rng& rng) {
  // Depth cues are outside the identification set and read unambiguously.
  if (!identification_index(cue)) return cue;
  return perceive_cue(cue, model_, rng).perceived;
}

std::vector<Percept> CuePerceiver::perceive(const CueEvent& event, const OperatorParams& params,
                                            Rng& rng) {
  const Micros at = event.at_us + ms_to_us(params.reaction_delay_ms);
  auto& tracked = tracked_[index_of(event.cue)];
  std::vector<Percept> out;
  switch (event.kind) {
    case CueEventKind::Start: {
      const CueId perceived = identify(event.cue, rng);
      tracked = Tracked{perceived, event.at_us + recheck_period_us_};
      if (perceived != CueId::Success) out.push_back({at, perceived, CueEventKind::Start});
      break;
    }
    case CueEventKind::Stop:
      if (tracked && tracked->perceived != CueId::Success) {
        out.push_back({at, tracked->perceived, CueEventKind::Stop});
      }
      tracked.reset();
      break;
    case CueEventKind::Burst:
      // A misread confirmation is a transient buzz and is ignored.
      if (identify(event.cue, rng) == CueId::Success) out.push_back({at, CueId::Success, CueEventKind::Burst});
      break;
  }
  return out;
}

std::vector<Percept> CuePerceiver::recheck(Micros now_us, const OperatorParams& params, Rng& rng) {
  std::vector<Percept> out;
  const Micros delay = ms_to_us(params.reaction_delay_ms);
  for (CueId cue : kAllCues) {
    auto& tracked = tracked_[index_of(cue)];
    if (!tracked) continue;
    while (tracked->next_check_us <= now_us) {
      const Micros at = tracked->next_check_us;
      tracked->next_check_us += recheck_period_us_;
      const CueId perceived = identify(cue, rng);
      if (perceived == tracked->perceived) continue;
      if (tracked->perceived != CueId::Success) out.push_back({at + delay, tracked->perceived, CueEventKind::Stop});
      if (perceived != CueId::Success) out.push_back({at + delay, perceived, CueEventKind::Start});
      tracked->perceived = perceived;
    }
  }
  return out;
}

namespace {

double haptic_weight_for(Condition c, const OperatorParams& p) {
  return c == Condition::Multimodal ? p.haptic_weight : 1.0;
}

void push_estimate(OperatorState& s, int axis, int sign, double weight, double step) {
  const double desired = s.tool[axis] + sign * step;
  s.estimate[axis] += weight * (desired - s.estimate[axis]);
}

}  // namespace

void operator_step(OperatorState& state, Condition condition, Micros now_us, Micros dt_us,
                   const OperatorParams& params, Rng& rng) {
  if (state.declared_done) return;
  const double weight = haptic_weight_for(condition, params);
  const double step = params.haptic_step_mm;

  while (!state.pending.empty() && state.pending.front().available_at_us <= now_us) {
    const Percept p = state.pending.front();
    state.pending.pop_front();
    if (condition == Condition::AROnly) continue;
    if (p.kind == CueEventKind::Burst) {
      if (p.cue == CueId::Success) {
        state.declared_done = true;
        return;
      }
      continue;
    }
    const auto dir = direction_of(p.cue);
    if (!dir) continue;
    if (p.kind == CueEventKind::Start) {
      state.cued_sign[dir->axis] = dir->sign;
      if (dir->sign * (state.estimate[dir->axis] - state.tool[dir->axis]) < step) {
        push_estimate(state, dir->axis, dir->sign, weight, step);
      }
    } else if (state.cued_sign[dir->axis] == dir->sign) {
      // The cue stopping means the hand just crossed into the threshold band:
      // the target is believed to lie a fixed offset further along the cue.
      state.cued_sign[dir->axis] = 0;
      push_estimate(state, dir->axis, dir->sign, weight, params.haptic_stop_offset_mm);
    }
    if (condition == Condition::Multimodal) {
      state.paused_until_us = now_us + ms_to_us(params.multimodal_checking_delay_ms);
    }
  }

  // Bang-bang stepping: a cue that is still felt once the hand has caught up
  // with the belief pushes the belief one more step.
  for (int axis = 0; axis < 3; ++axis) {
    const int sign = state.cued_sign[axis];
    if (sign != 0 && sign * (state.estimate[axis] - state.tool[axis]) < 0.25 * step) {
      push_estimate(state, axis, sign, weight, step);
    }
  }

  if (now_us >= state.paused_until_us) {
    const double dt = us_to_s(dt_us);
    const double alpha = std::min(1.0, params.control_gain * dt);
    state.tool += alpha * (state.estimate - state.tool);
    if (params.motor_noise_mm > 0.0) {
      for (int axis = 0; axis < 3; ++axis) state.tool[axis] += rng.normal(0.0, params.motor_noise_mm);
    }
  }

  const double perceived_error = (state.estimate - state.tool).norm();
  if (perceived_error < params.stop_tolerance(condition)) {
    if (!state.settled_since_us) state.settled_since_us = now_us;
    if (now_us - *state.settled_since_us >= ms_to_us(params.stop_dwell_ms)) state.declared_done = true;
  } else {
    state.settled_since_us.reset();
  }
}

}  // namespace hapticguide
