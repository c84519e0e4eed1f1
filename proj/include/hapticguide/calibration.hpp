#pragma once

#include "hapticguide/operator_sim.hpp"
#include "hapticguide/study.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hapticguide {

/// Tool-guidance aggregates the operator model is fit to, by Condition.
struct Study2Targets {
  std::array<double, 3> error_mean_mm = {8.4, 7.5, 5.8};
  std::array<double, 3> error_sd_mm = {2.1, 2.0, 1.6};
  std::array<double, 3> time_mean_s = {8.0, 7.8, 9.2};
  std::array<std::optional<double>, 3> overshoot_rate = {std::nullopt, 0.27, 0.09};

  // Acceptance half-widths; also the residual's unit of deviation.
  double error_mean_tolerance_mm = 0.5;
  double error_sd_tolerance_mm = 0.7;
  double time_tolerance_s = 0.5;
  double overshoot_tolerance = 0.05;

  std::size_t participants = 27;

  /// Targets equal to a simulated summary (every metric, overshoot included).
  static Study2Targets from_summary(const StudySummary& summary, std::size_t participants);
};

struct TargetCheck {
  std::string name;  // e.g. "Multimodal error mean"
  double simulated = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  bool ok() const;
};

/// One line per targeted metric, in condition order.
std::vector<TargetCheck> check_targets(const StudySummary& summary, const Study2Targets& targets);

/// Sum over targeted metrics of w * ((sim - target) / target)^2 with
/// w = (target / tolerance)^2, so a deviation of one tolerance costs 1.
double calibration_residual(const StudySummary& summary, const Study2Targets& targets);

/// Full guidance study (all conditions) reduced to its summary.
StudySummary simulate_guidance_study(const StudySetup& setup, std::size_t participants,
                                     std::uint64_t seed);

/// Names accepted by operator_param: the OperatorParams field names, with the
/// stop tolerances as stop_tolerance_ar / stop_tolerance_haptic / stop_tolerance_multi.
std::vector<std::string_view> operator_param_names();
/// Throws std::invalid_argument for an unknown name.
double& operator_param(OperatorParams& params, std::string_view name);

struct ParamAxis {
  std::string name;
  std::vector<double> values;
};
using SearchSpace = std::vector<ParamAxis>;

struct CalibrationResult {
  OperatorParams params;
  double residual = 0.0;
  std::size_t evaluations = 0;
  StudySummary summary;
};

/// Coordinate search: starting from base.operator_params, each sweep tries
/// every value of every axis in turn and keeps strict improvements; stops
/// after a sweep without improvement or after max_sweeps. Deterministic in
/// seed. Throws std::invalid_argument on an empty search space or axis and
/// std::domain_error on a non-finite residual.
CalibrationResult calibrate(const Study2Targets& targets, const SearchSpace& space, std::uint64_t seed,
                            const StudySetup& base = {}, int max_sweeps = 3);

/// Grid around the shipped parameters used by the CLI.
SearchSpace default_search_space(const OperatorParams& center);

}  // namespace hapticguide
