#pragma once

#include "hapticguide/actuation.hpp"
#include "hapticguide/core.hpp"
#include "hapticguide/cue_policy.hpp"
#include "hapticguide/operator_sim.hpp"
#include "hapticguide/stats.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace hapticguide {

enum class Protocol : std::uint8_t { CueIdentification, Guidance };
std::string_view to_string(Protocol p);
Protocol protocol_from_string(std::string_view name);

enum class SessionMode : std::uint8_t { Simulated, Interactive };
std::string_view to_string(SessionMode m);
SessionMode session_mode_from_string(std::string_view name);

inline constexpr std::array<double, 3> kTargetDepthsMm = {300.0, 350.0, 400.0};
inline constexpr std::array<double, 2> kLateralOffsetsMm = {-10.0, 10.0};
inline constexpr int kRepetitionsPerPosition = 3;
inline constexpr int kTrialsPerCondition = 18;  // 6 positions x 3 repetitions
inline constexpr int kCueRepetitions = 10;
inline constexpr int kCueTrialsPerSession = 50;
inline const Vec3 kHomePose{0.0, 0.0, 200.0};

struct TrialConfig {
  Protocol protocol = Protocol::Guidance;
  SessionMode mode = SessionMode::Simulated;
  std::uint32_t participant = 0;
  std::uint32_t trial_index = 0;  // position in the participant's session
  // Guidance
  Condition condition = Condition::Multimodal;
  double depth_mm = 350.0;
  double lateral_offset_mm = 10.0;
  std::uint32_t repetition = 0;
  double timeout_ms = 30000.0;
  // Cue identification
  CueId presented_cue = CueId::Left;
  double distractor_ms = 2000.0;
  double cue_window_ms = 2000.0;
  /// Quantile in [0,1) that picks the identification response; negative
  /// means drawn from the trial seed.
  double identification_quantile = -1.0;

  std::uint64_t seed = 0;

  TargetSpec target(const PolicyConfig& policy) const;
  bool operator==(const TrialConfig&) const = default;
};

struct PoseSample {
  Micros t_us = 0;
  Vec3 tool = Vec3::Zero();
  bool operator==(const PoseSample&) const = default;
};

struct FrameRecord {
  MotorFrame frame;
  bool delivered = true;
  bool operator==(const FrameRecord&) const = default;
};

struct PerceptRecord {
  Micros t_us = 0;
  CueId cue = CueId::Left;
  CueEventKind kind = CueEventKind::Start;
  bool operator==(const PerceptRecord&) const = default;
};

/// Cue identification answer. identified is empty for a missed window.
struct ResponseRecord {
  Micros t_us = 0;
  std::optional<CueId> identified;
  double rt_s = 0.0;
  bool operator==(const ResponseRecord&) const = default;
};

enum class OutcomeStatus : std::uint8_t { Completed, TimedOut, Aborted };
std::string_view to_string(OutcomeStatus s);
OutcomeStatus outcome_status_from_string(std::string_view name);

struct Outcome {
  OutcomeStatus status = OutcomeStatus::Completed;
  Micros t_us = 0;
  // Guidance
  double final_error_mm = 0.0;
  double completion_time_s = 0.0;
  bool overshoot = false;
  // Cue identification
  std::optional<CueId> identified;
  double rt_s = 0.0;
  bool correct = false;

  bool operator==(const Outcome&) const = default;
};

/// Everything needed to replay and score one trial.
struct TrialLog {
  TrialConfig config;
  PolicyConfig policy;
  std::optional<OperatorParams> operator_params;  // absent for interactive trials
  ConfusionModel confusion = default_confusion_model();
  Codebook codebook;

  std::vector<PoseSample> poses;
  std::vector<CueEvent> cues;
  std::vector<FrameRecord> frames;
  std::vector<PerceptRecord> percepts;
  std::vector<ResponseRecord> responses;
  std::optional<Outcome> outcome;

  bool operator==(const TrialLog&) const = default;
};

/// Models and engine configuration shared by every trial of a run.
struct StudySetup {
  PolicyConfig policy;
  Codebook codebook = default_codebook(PolicyConfig{});
  OperatorParams operator_params = calibrated_operator_params();
  ConfusionModel confusion = default_confusion_model();
  double timeout_ms = 30000.0;
  double distractor_ms = 2000.0;
  double cue_window_ms = 2000.0;
};

/// Overshoot: any pose sample strictly beyond the target depth.
bool pose_stream_overshoots(const std::vector<PoseSample>& poses, double target_z_mm);

/// Appends the cue window of a cue-id trial (events and frames) to the log,
/// using its config and codebook.
void present_cue(TrialLog& log);

TrialLog run_cue_id_trial(const TrialConfig& cfg, const StudySetup& setup);

/// 50 trials, 10 per identification cue, order shuffled by the seed. The ten
/// identification quantiles of a cue are stratified, one per tenth of [0,1).
std::vector<TrialLog> run_cue_id_session(std::uint32_t participant, std::uint64_t seed,
                                         const StudySetup& setup);

/// Simulated operator aligning the tool with one target.
TrialLog run_guidance_trial(const TrialConfig& cfg, const StudySetup& setup);

/// 18 trials per requested condition; condition order counterbalanced by
/// participant index, trial order within a condition shuffled by the seed.
std::vector<TrialLog> run_guidance_session(std::uint32_t participant, std::uint64_t seed,
                                           const StudySetup& setup,
                                           std::span<const Condition> conditions = kAllConditions);

/// Re-runs a simulated trial from its recorded configuration.
TrialLog rerun_trial(const TrialLog& log);

/// Re-drives the engine with a recorded interactive pose stream.
TrialLog replay_interactive(const TrialLog& log);

struct ConditionMetrics {
  std::size_t trials = 0;
  std::size_t timeouts = 0;
  double error_mean_mm = 0.0;
  double error_sd_mm = 0.0;
  double time_mean_s = 0.0;
  double time_sd_s = 0.0;
  double overshoot_rate = 0.0;

  bool operator==(const ConditionMetrics&) const = default;
};

struct CueIdMetrics {
  std::size_t trials = 0;
  std::size_t no_response = 0;
  double overall_accuracy = 0.0;
  std::array<double, 5> per_cue_accuracy{};  // kIdentificationCues order
  std::array<std::size_t, 5> per_cue_trials{};
  double rt_mean_s = 0.0;
  double rt_sd_s = 0.0;
  /// counts[presented][identified]; missed responses are not counted here.
  std::array<std::array<std::size_t, 5>, 5> confusion{};

  bool operator==(const CueIdMetrics&) const = default;
};

struct StudySummary {
  Protocol protocol = Protocol::Guidance;
  std::size_t trials = 0;
  std::size_t participants = 0;
  std::array<std::optional<ConditionMetrics>, 3> conditions{};
  std::optional<CueIdMetrics> cue_id;
  std::optional<AnovaResult> error_anova;
  std::optional<AnovaResult> time_anova;

  bool operator==(const StudySummary&) const = default;
};

/// Throws std::invalid_argument on empty or mixed-protocol input.
StudySummary compute_metrics(std::span<const TrialLog> logs);

enum class GuidanceMetric { Error, Time };

/// Participant x condition matrix of per-participant means, conditions in
/// Condition order restricted to those present. Throws if incomplete.
Eigen::MatrixXd participant_matrix(std::span<const TrialLog> logs, GuidanceMetric metric);

}  // namespace hapticguide
