#include "hapticguide/calibration.hpp"

#include <doctest.h>

#include <cmath>

using namespace hapticguide;

namespace {

StudySetup noiseless_setup() {
  StudySetup s;
  s.operator_params = ideal_operator_params();
  s.confusion = ConfusionModel::identity();
  return s;
}

}  // namespace

TEST_SUITE("calibration") {

TEST_CASE("refitting a model's own output recovers it") {
  StudySetup truth = noiseless_setup();
  truth.operator_params.visual_depth_bias_mm = 2.0;
  truth.operator_params.multimodal_checking_delay_ms = 300.0;
  const Study2Targets targets = Study2Targets::from_summary(simulate_guidance_study(truth, 1, 4), 1);

  StudySetup start = truth;
  start.operator_params.visual_depth_bias_mm = 6.0;
  start.operator_params.multimodal_checking_delay_ms = 600.0;
  const SearchSpace space{{"visual_depth_bias_mm", {0.0, 2.0, 4.0, 6.0}},
                          {"multimodal_checking_delay_ms", {0.0, 300.0, 600.0}}};
  const CalibrationResult r = calibrate(targets, space, 4, start);
  CHECK(r.residual == doctest::Approx(0.0));
  CHECK(r.params.visual_depth_bias_mm == 2.0);
  CHECK(r.params.multimodal_checking_delay_ms == 300.0);
  CHECK(r.evaluations > 1);
}

TEST_CASE("result is no worse than the starting parameters") {
  Study2Targets targets;
  targets.participants = 1;
  const StudySetup base;
  const double at_defaults = calibration_residual(simulate_guidance_study(base, 1, 2), targets);
  const double v = base.operator_params.stop_tolerance(Condition::AROnly);
  const SearchSpace space{{"stop_tolerance_ar", {0.8 * v, v, 1.2 * v}}};
  const CalibrationResult r = calibrate(targets, space, 2, base, 1);
  CHECK(r.residual <= at_defaults);
  CHECK(calibration_residual(r.summary, targets) == r.residual);
}

TEST_CASE("deterministic in the seed") {
  Study2Targets targets;
  targets.participants = 1;
  const SearchSpace space{{"control_gain", {0.4, 0.5}}};
  const CalibrationResult a = calibrate(targets, space, 3, StudySetup{}, 1);
  const CalibrationResult b = calibrate(targets, space, 3, StudySetup{}, 1);
  CHECK(a.params == b.params);
  CHECK(a.residual == b.residual);
}

TEST_CASE("search space errors") {
  const Study2Targets targets;
  CHECK_THROWS_AS(calibrate(targets, {}, 1), std::invalid_argument);
  CHECK_THROWS_AS(calibrate(targets, {{"control_gain", {}}}, 1), std::invalid_argument);
  CHECK_THROWS_AS(calibrate(targets, {{"no_such_param", {1.0}}}, 1), std::invalid_argument);
}

TEST_CASE("non-finite residual is an error") {
  Study2Targets targets;
  targets.participants = 1;
  targets.error_mean_tolerance_mm = 0.0;
  CHECK_THROWS_AS(calibrate(targets, {{"control_gain", {0.5}}}, 1), std::domain_error);
}

TEST_CASE("invalid candidates are skipped") {
  Study2Targets targets;
  targets.participants = 1;
  const CalibrationResult r = calibrate(targets, {{"control_gain", {-1.0, 0.0}}}, 1, StudySetup{}, 1);
  CHECK(r.evaluations == 1);
  CHECK(r.params == calibrated_operator_params());
}

TEST_CASE("residual weighting: one tolerance costs one") {
  StudySummary s;
  s.protocol = Protocol::Guidance;
  Study2Targets t;
  for (Condition c : kAllConditions) {
    ConditionMetrics m;
    const std::size_t i = index_of(c);
    m.error_mean_mm = t.error_mean_mm[i];
    m.error_sd_mm = t.error_sd_mm[i];
    m.time_mean_s = t.time_mean_s[i];
    m.overshoot_rate = t.overshoot_rate[i].value_or(0.5);
    s.conditions[i] = m;
  }
  CHECK(calibration_residual(s, t) == 0.0);
  for (const TargetCheck& c : check_targets(s, t)) CHECK(c.ok());
  CHECK(check_targets(s, t).size() == 11);
  s.conditions[2]->error_mean_mm += 0.5;
  CHECK(calibration_residual(s, t) == doctest::Approx(1.0));
  s.conditions[1]->overshoot_rate += 0.1;
  CHECK(calibration_residual(s, t) == doctest::Approx(5.0));
}

TEST_CASE("parameter names") {
  OperatorParams p;
  for (std::string_view name : operator_param_names()) CHECK_NOTHROW(operator_param(p, name));
  operator_param(p, "stop_tolerance_multi") = 9.0;
  CHECK(p.perceived_stop_tolerance_mm[2] == 9.0);
  CHECK_THROWS_AS(operator_param(p, "bogus"), std::invalid_argument);
  const SearchSpace space = default_search_space(calibrated_operator_params());
  CHECK(space.size() == 8);
  for (const auto& axis : space) {
    CAPTURE(axis.name);
    CHECK(axis.values.size() == 5);
    CHECK(axis.values.front() < axis.values.back());
  }
}

}
