#include "hapticguide/calibration.hpp"

#include <cmath>
#include <stdexcept>

namespace hapticguide {

namespace {

struct NamedParam {
  std::string_view name;
  double OperatorParams::*field;
  int tolerance_index;  // >= 0 for perceived_stop_tolerance_mm entries
};

constexpr std::array<NamedParam, 15> kParams = {{
    {"reaction_delay_ms", &OperatorParams::reaction_delay_ms, -1},
    {"control_gain", &OperatorParams::control_gain, -1},
    {"motor_noise_mm", &OperatorParams::motor_noise_mm, -1},
    {"visual_depth_bias_mm", &OperatorParams::visual_depth_bias_mm, -1},
    {"visual_lateral_noise_mm", &OperatorParams::visual_lateral_noise_mm, -1},
    {"visual_depth_noise_mm", &OperatorParams::visual_depth_noise_mm, -1},
    {"reference_depth_noise_mm", &OperatorParams::reference_depth_noise_mm, -1},
    {"haptic_step_mm", &OperatorParams::haptic_step_mm, -1},
    {"haptic_stop_offset_mm", &OperatorParams::haptic_stop_offset_mm, -1},
    {"haptic_weight", &OperatorParams::haptic_weight, -1},
    {"stop_tolerance_ar", nullptr, 0},
    {"stop_tolerance_haptic", nullptr, 1},
    {"stop_tolerance_multi", nullptr, 2},
    {"multimodal_checking_delay_ms", &OperatorParams::multimodal_checking_delay_ms, -1},
    {"stop_dwell_ms", &OperatorParams::stop_dwell_ms, -1},
}};

}  // namespace

Study2Targets Study2Targets::from_summary(const StudySummary& summary, std::size_t participants) {
  Study2Targets t;
  t.participants = participants;
  for (Condition c : kAllConditions) {
    const auto& m = summary.conditions[index_of(c)];
    if (!m) throw std::invalid_argument("summary lacks a condition");
    t.error_mean_mm[index_of(c)] = m->error_mean_mm;
    t.error_sd_mm[index_of(c)] = m->error_sd_mm;
    t.time_mean_s[index_of(c)] = m->time_mean_s;
    t.overshoot_rate[index_of(c)] = m->overshoot_rate;
  }
  return t;
}

bool TargetCheck::ok() const { return std::abs(simulated - target) <= tolerance; }

std::vector<TargetCheck> check_targets(const StudySummary& summary, const Study2Targets& targets) {
  std::vector<TargetCheck> out;
  for (Condition c : kAllConditions) {
    const std::size_t i = index_of(c);
    const auto& m = summary.conditions[i];
    if (!m) throw std::invalid_argument("summary lacks condition " + std::string(to_string(c)));
    const std::string name(to_string(c));
    out.push_back({name + " error mean", m->error_mean_mm, targets.error_mean_mm[i], targets.error_mean_tolerance_mm});
    out.push_back({name + " error SD", m->error_sd_mm, targets.error_sd_mm[i], targets.error_sd_tolerance_mm});
    out.push_back({name + " time mean", m->time_mean_s, targets.time_mean_s[i], targets.time_tolerance_s});
    if (targets.overshoot_rate[i]) {
      out.push_back({name + " overshoot", m->overshoot_rate, *targets.overshoot_rate[i], targets.overshoot_tolerance});
    }
  }
  return out;
}

double calibration_residual(const StudySummary& summary, const Study2Targets& targets) {
  double r = 0.0;
  for (const TargetCheck& c : check_targets(summary, targets)) {
    if (c.target == 0.0) {
      const double d = (c.simulated - c.target) / c.tolerance;
      r += d * d;
      continue;
    }
    const double relative = (c.simulated - c.target) / c.target;
    const double weight = (c.target / c.tolerance) * (c.target / c.tolerance);
    r += weight * relative * relative;
  }
  return r;
}

StudySummary simulate_guidance_study(const StudySetup& setup, std::size_t participants,
                                     std::uint64_t seed) {
  std::vector<TrialLog> logs;
  logs.reserve(participants * kAllConditions.size() * kTrialsPerCondition);
  for (std::size_t p = 0; p < participants; ++p) {
    for (TrialLog& l : run_guidance_session(static_cast<std::uint32_t>(p), seed, setup)) {
      // Metrics only need poses and outcomes.
      l.frames = {};
      l.cues = {};
      l.percepts = {};
      logs.push_back(std::move(l));
    }
  }
  return compute_metrics(logs);
}

std::vector<std::string_view> operator_param_names() {
  std::vector<std::string_view> names;
  for (const NamedParam& p : kParams) names.push_back(p.name);
  return names;
}

double& operator_param(OperatorParams& params, std::string_view name) {
  for (const NamedParam& p : kParams) {
    if (p.name != name) continue;
    if (p.tolerance_index >= 0) return params.perceived_stop_tolerance_mm[p.tolerance_index];
    return params.*(p.field);
  }
  throw std::invalid_argument("unknown operator parameter: " + std::string(name));
}

CalibrationResult calibrate(const Study2Targets& targets, const SearchSpace& space, std::uint64_t seed,
                            const StudySetup& base, int max_sweeps) {
  if (space.empty()) throw std::invalid_argument("empty search space");
  for (const ParamAxis& axis : space) {
    if (axis.values.empty()) throw std::invalid_argument("search axis " + axis.name + " has no values");
    OperatorParams probe;
    operator_param(probe, axis.name);  // rejects unknown names up front
  }

  StudySetup setup = base;
  CalibrationResult best;
  auto evaluate = [&](const OperatorParams& params) {
    setup.operator_params = params;
    StudySummary summary = simulate_guidance_study(setup, targets.participants, seed);
    const double r = calibration_residual(summary, targets);
    if (!std::isfinite(r)) throw std::domain_error("non-finite calibration residual");
    ++best.evaluations;
    return std::pair{r, std::move(summary)};
  };

  best.params = base.operator_params;
  best.params.validate();
  std::tie(best.residual, best.summary) = evaluate(best.params);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool improved = false;
    for (const ParamAxis& axis : space) {
      for (double v : axis.values) {
        OperatorParams candidate = best.params;
        operator_param(candidate, axis.name) = v;
        if (candidate == best.params) continue;
        try {
          candidate.validate();
        } catch (const std::invalid_argument&) {
          continue;
        }
        auto [r, summary] = evaluate(candidate);
        if (r < best.residual) {
          best.params = candidate;
          best.residual = r;
          best.summary = std::move(summary);
          improved = true;
        }
      }
    }
    if (!improved) break;
  }
  return best;
}

SearchSpace default_search_space(const OperatorParams& center) {
  SearchSpace space;
  const std::array<std::string_view, 8> axes = {
      "control_gain",          "visual_depth_bias_mm", "reference_depth_noise_mm", "haptic_weight",
      "stop_tolerance_ar",     "stop_tolerance_haptic", "stop_tolerance_multi",    "multimodal_checking_delay_ms"};
  OperatorParams c = center;
  for (std::string_view name : axes) {
    const double v = operator_param(c, name);
    // 5% steps; a parameter sitting at zero gets an absolute step instead.
    const double step = v != 0.0 ? 0.05 * std::abs(v) : 10.0;
    space.push_back({std::string(name), {v - 2 * step, v - step, v, v + step, v + 2 * step}});
  }
  return space;
}

}  // namespace hapticguide
