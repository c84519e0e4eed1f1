#pragma once

#include "hapticguide/core.hpp"
#include "hapticguide/cue_policy.hpp"
#include "hapticguide/rng.hpp"

#include <array>
#include <deque>
#include <optional>
#include <string_view>
#include <vector>

namespace hapticguide {

enum class Condition : std::uint8_t { AROnly, HapticOnly, Multimodal };

inline constexpr std::array<Condition, 3> kAllConditions = {
    Condition::AROnly, Condition::HapticOnly, Condition::Multimodal};

std::string_view to_string(Condition c);
/// Short CLI name: ar, haptic, multi.
std::string_view short_name(Condition c);
/// Accepts either the long or the short name.
Condition condition_from_string(std::string_view name);
constexpr std::size_t index_of(Condition c) { return static_cast<std::size_t>(c); }

/// Perception model for the five identification cues. Row/column order
/// follows kIdentificationCues (Left, Right, Up, Down, Success).
struct ConfusionModel {
  std::array<std::array<double, 5>, 5> rows{};
  double rt_mean_s = 1.1;
  double rt_sd_s = 0.3;
  double rt_min_s = 0.2;

  void validate() const;
  double correct_probability(CueId cue) const;

  static ConfusionModel identity();
  bool operator==(const ConfusionModel&) const = default;
};

/// Row index of a cue in the identification subset, or nullopt.
std::optional<std::size_t> identification_index(CueId cue);

ConfusionModel default_confusion_model();

struct Perception {
  CueId perceived;
  double rt_s;
};

/// Samples an identification response. Throws std::invalid_argument for cues
/// outside the identification subset.
Perception perceive_cue(CueId true_cue, const ConfusionModel& model, Rng& rng);

/// Inverse-CDF lookup of the confusion row at quantile u in [0,1).
CueId identify_cue(CueId true_cue, const ConfusionModel& model, double u);
/// Truncated normal response time, resampled below rt_min_s.
double sample_response_time(const ConfusionModel& model, Rng& rng);

struct OperatorParams {
  double reaction_delay_ms = 0.0;
  double control_gain = 0.5;             // 1/s
  double motor_noise_mm = 0.0;           // per-step SD
  double visual_depth_bias_mm = 0.0;     // +z, overshoot direction
  double visual_lateral_noise_mm = 0.0;  // per-trial SD of the visual estimate, x and y
  double visual_depth_noise_mm = 0.0;    // per-trial SD of the visual estimate, z
  double reference_depth_noise_mm = 0.0; // per-trial SD of the HapticOnly depth reference reading
  double haptic_step_mm = 4.0;           // bang-bang step implied by a directional cue
  double haptic_stop_offset_mm = 2.0;    // believed target distance past a cue's Stop
  double haptic_weight = 1.0;            // Multimodal trust in haptic corrections, (0,1]
  std::array<double, 3> perceived_stop_tolerance_mm = {1.0, 1.0, 1.0};  // by Condition
  double multimodal_checking_delay_ms = 0.0;
  double stop_dwell_ms = 500.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
  double stop_tolerance(Condition c) const { return perceived_stop_tolerance_mm[index_of(c)]; }

  bool operator==(const OperatorParams&) const = default;
};

/// Shipped parameters, fit to the reported tool-guidance aggregates.
OperatorParams calibrated_operator_params();
/// Noise-free, bias-free operator.
OperatorParams ideal_operator_params();

struct Percept {
  Micros available_at_us = 0;
  CueId cue = CueId::Left;
  CueEventKind kind = CueEventKind::Start;

  bool operator==(const Percept&) const = default;
};

struct OperatorState {
  Vec3 tool = Vec3::Zero();
  Vec3 estimate = Vec3::Zero();  // where the operator believes the target is
  std::deque<Percept> pending;
  bool declared_done = false;
  std::array<int, 3> cued_sign{};  // perceived active directional cue per axis
  Micros paused_until_us = 0;
  std::optional<Micros> settled_since_us;
};

/// Operator's initial belief about the target for a trial. Visual conditions
/// see the target with bias and noise; HapticOnly has only a noisy depth
/// reference and no lateral information.
Vec3 initial_estimate(Condition condition, const TargetSpec& target, const Vec3& home,
                      const OperatorParams& params, Rng& rng);

/// Converts engine cue events into delayed, possibly confused percepts.
/// A directional cue that keeps playing is re-identified once per pulse
/// cycle, so a misread is corrected on a later pulse.
class CuePerceiver {
 public:
  CuePerceiver(ConfusionModel model, Micros recheck_period_us);

  /// Percepts caused by one engine event, in order.
  std::vector<Percept> perceive(const CueEvent& event, const OperatorParams& params, Rng& rng);
  /// Re-identifications due at or before now_us.
  std::vector<Percept> recheck(Micros now_us, const OperatorParams& params, Rng& rng);

 private:
  struct Tracked {
    CueId perceived;
    Micros next_check_us;
  };
  CueId identify(CueId cue, Rng& rng);

  ConfusionModel model_;
  Micros recheck_period_us_;
  std::array<std::optional<Tracked>, kCueCount> tracked_{};
};

/// Advances the operator by one tick ending at now_us. Consumes percepts that
/// have become available, updates the belief, moves the tool with first-order
/// dynamics plus motor noise, and evaluates the stop criterion.
void operator_step(OperatorState& state, Condition condition, Micros now_us, Micros dt_us,
                   const OperatorParams& params, Rng& rng);

}  // namespace hapticguide
