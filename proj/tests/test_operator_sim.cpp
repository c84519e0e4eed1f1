#include "hapticguide/operator_sim.hpp"
#include "hapticguide/study.hpp"

#include <doctest.h>

#include <cmath>

using namespace hapticguide;

namespace {

constexpr int kDraws = 100000;

std::array<int, 5> draw_counts(CueId cue, const ConfusionModel& m, std::uint64_t seed) {
  Rng rng(seed);
  std::array<int, 5> counts{};
  for (int i = 0; i < kDraws; ++i) ++counts[*identification_index(perceive_cue(cue, m, rng).perceived)];
  return counts;
}

// Chi-square 0.999 quantiles by degrees of freedom, from standard tables.
constexpr double kChi2Crit999[] = {0, 10.828, 13.816, 16.266, 18.467};

}  // namespace

TEST_SUITE("operator_sim") {

TEST_CASE("identity model never confuses") {
  const ConfusionModel m = ConfusionModel::identity();
  Rng rng(1);
  for (CueId c : kIdentificationCues) {
    for (int i = 0; i < 1000; ++i) CHECK(perceive_cue(c, m, rng).perceived == c);
  }
}

TEST_CASE("state accuracy of 0.98 over 1e5 draws") {
  ConfusionModel m = ConfusionModel::identity();
  m.rows[4] = {0.005, 0.005, 0.005, 0.005, 0.98};
  const auto counts = draw_counts(CueId::Success, m, 2);
  CHECK(std::abs(counts[4] / double(kDraws) - 0.98) <= 0.005);
}

TEST_CASE("Up row frequencies within 3 sigma") {
  ConfusionModel m = ConfusionModel::identity();
  m.rows[2] = {0.01, 0.01, 0.82, 0.15, 0.01};
  const auto counts = draw_counts(CueId::Up, m, 3);
  for (std::size_t j = 0; j < 5; ++j) {
    const double p = m.rows[2][j];
    const double sigma = std::sqrt(kDraws * p * (1 - p));
    CHECK(std::abs(counts[j] - kDraws * p) <= 3 * sigma);
  }
}

TEST_CASE("shipped rows pass chi-square at 0.001") {
  const ConfusionModel m = default_confusion_model();
  for (std::size_t row = 0; row < 5; ++row) {
    const auto counts = draw_counts(kIdentificationCues[row], m, 100 + row);
    double chi2 = 0;
    int cells = 0;
    for (std::size_t j = 0; j < 5; ++j) {
      const double expected = kDraws * m.rows[row][j];
      if (expected == 0) {
        CHECK(counts[j] == 0);
        continue;
      }
      chi2 += (counts[j] - expected) * (counts[j] - expected) / expected;
      ++cells;
    }
    CAPTURE(row);
    CHECK(chi2 < kChi2Crit999[cells - 1]);
  }
}

TEST_CASE("response times are truncated below") {
  const ConfusionModel m = default_confusion_model();
  Rng rng(4);
  double sum = 0;
  for (int i = 0; i < kDraws; ++i) {
    const double rt = sample_response_time(m, rng);
    CHECK(rt >= 0.2);
    sum += rt;
  }
  // truncation 3 SD below the mean moves it by ~1e-3 s
  CHECK(sum / kDraws == doctest::Approx(1.1).epsilon(0.005));
}

TEST_CASE("inverse-CDF identification") {
  const ConfusionModel m = default_confusion_model();
  CHECK(identify_cue(CueId::Left, m, 0.0) == CueId::Left);
  CHECK(identify_cue(CueId::Right, m, 0.0) == CueId::Left);
  CHECK(identify_cue(CueId::Right, m, 0.5) == CueId::Right);
  CHECK(identify_cue(CueId::Up, m, 0.9) == CueId::Down);
  CHECK(identify_cue(CueId::Success, m, 0.999999) == CueId::Success);
  CHECK_THROWS_AS(identify_cue(CueId::Left, m, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(identify_cue(CueId::Left, m, -0.1), std::invalid_argument);
  Rng rng(1);
  CHECK_THROWS_AS(perceive_cue(CueId::Forward, m, rng), std::invalid_argument);
}

TEST_CASE("confusion model validation") {
  ConfusionModel m = default_confusion_model();
  CHECK_NOTHROW(m.validate());
  m.rows[0][0] += 0.1;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m = default_confusion_model();
  m.rt_mean_s = 0;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  CHECK(default_confusion_model().correct_probability(CueId::Up) == m.rows[2][2]);
}

TEST_CASE("operator params validation") {
  CHECK_NOTHROW(calibrated_operator_params().validate());
  CHECK_NOTHROW(ideal_operator_params().validate());
  OperatorParams p = calibrated_operator_params();
  p.control_gain = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = calibrated_operator_params();
  p.motor_noise_mm = -1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = calibrated_operator_params();
  p.perceived_stop_tolerance_mm[1] = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = calibrated_operator_params();
  p.haptic_weight = 1.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("noiseless visual operator converges monotonically") {
  OperatorParams p = ideal_operator_params();
  TargetSpec target;
  target.center = Vec3(0, 0, 300);
  OperatorState s;
  s.tool = Vec3(10, 0, 300);
  Rng rng(1);
  s.estimate = initial_estimate(Condition::AROnly, target, s.tool, p, rng);
  CHECK(s.estimate == target.center);
  double last = euclidean_error(s.tool, target.center);
  for (Micros t = kPosePeriodUs; t < 30000000 && !s.declared_done; t += kPosePeriodUs) {
    operator_step(s, Condition::AROnly, t, kPosePeriodUs, p, rng);
    const double e = euclidean_error(s.tool, target.center);
    CHECK(e <= last);
    last = e;
  }
  CHECK(s.declared_done);
  CHECK(last < 0.1);
}

TEST_CASE("haptic-only belief starts at the home position laterally") {
  OperatorParams p = calibrated_operator_params();
  p.reference_depth_noise_mm = 0;
  TargetSpec target;
  target.center = Vec3(10, 0, 350);
  Rng rng(1);
  const Vec3 e = initial_estimate(Condition::HapticOnly, target, kHomePose, p, rng);
  CHECK(e == Vec3(0, 0, 350));
  const Vec3 v = initial_estimate(Condition::AROnly, target, kHomePose, ideal_operator_params(), rng);
  CHECK(v == target.center);
}

TEST_CASE("percepts arrive after the reaction delay and persisting cues are re-read") {
  OperatorParams p;
  p.reaction_delay_ms = 250;
  CuePerceiver identity(ConfusionModel::identity(), 400000);
  Rng rng(1);
  auto start = identity.perceive({1000, CueId::Left, CueEventKind::Start}, p, rng);
  REQUIRE(start.size() == 1);
  CHECK(start[0] == Percept{251000, CueId::Left, CueEventKind::Start});
  CHECK(identity.recheck(5000000, p, rng).empty());
  auto stop = identity.perceive({6000000, CueId::Left, CueEventKind::Stop}, p, rng);
  REQUIRE(stop.size() == 1);
  CHECK(stop[0].kind == CueEventKind::Stop);

  // A model that always reads Up as Down: Stop follows the misread cue.
  ConfusionModel flipped = ConfusionModel::identity();
  flipped.rows[2] = {0, 0, 0, 1, 0};
  CuePerceiver wrong(flipped, 400000);
  auto s = wrong.perceive({0, CueId::Up, CueEventKind::Start}, p, rng);
  REQUIRE(s.size() == 1);
  CHECK(s[0].cue == CueId::Down);
  auto e = wrong.perceive({100, CueId::Up, CueEventKind::Stop}, p, rng);
  REQUIRE(e.size() == 1);
  CHECK(e[0].cue == CueId::Down);

  // Depth cues bypass the confusion rows.
  auto f = wrong.perceive({0, CueId::Forward, CueEventKind::Start}, p, rng);
  REQUIRE(f.size() == 1);
  CHECK(f[0].cue == CueId::Forward);
}

TEST_CASE("re-identification corrects a misread on a later pulse") {
  ConfusionModel half = ConfusionModel::identity();
  half.rows[2] = {0, 0, 0.5, 0.5, 0};
  CuePerceiver perceiver(half, 400000);
  OperatorParams p;
  Rng rng(7);
  auto first = perceiver.perceive({0, CueId::Up, CueEventKind::Start}, p, rng);
  CueId current = first.at(0).cue;
  int switches = 0;
  for (Micros t = 400000; t <= 8000000; t += 400000) {
    const auto out = perceiver.recheck(t, p, rng);
    if (!out.empty()) {
      REQUIRE(out.size() == 2);
      CHECK(out[0] == Percept{t, current, CueEventKind::Stop});
      CHECK(out[1].kind == CueEventKind::Start);
      current = out[1].cue;
      ++switches;
    }
  }
  CHECK(switches > 0);
}

}
