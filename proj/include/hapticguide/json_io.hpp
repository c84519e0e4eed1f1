#pragma once

#include "hapticguide/actuation.hpp"
#include "hapticguide/cue_policy.hpp"
#include "hapticguide/operator_sim.hpp"
#include "hapticguide/study.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>

namespace hapticguide {

using nlohmann::json;

/// Bad configuration content or an unreadable config file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void to_json(json& j, const PolicyConfig& c);
void from_json(const json& j, PolicyConfig& c);
void to_json(json& j, const ActuationPattern& p);
void from_json(const json& j, ActuationPattern& p);
void to_json(json& j, const Codebook& c);
void to_json(json& j, const OperatorParams& p);
void from_json(const json& j, OperatorParams& p);
void to_json(json& j, const ConfusionModel& m);
void from_json(const json& j, ConfusionModel& m);
void to_json(json& j, const TrialConfig& c);
void from_json(const json& j, TrialConfig& c);
void to_json(json& j, const Outcome& o);
void from_json(const json& j, Outcome& o);
void to_json(json& j, const ConditionMetrics& m);
void to_json(json& j, const CueIdMetrics& m);
void to_json(json& j, const AnovaResult& a);
void to_json(json& j, const StudySummary& s);

/// Full codebook from a JSON object keyed by cue name. Missing cues are
/// taken from `base`.
Codebook codebook_from_json(const json& j, const Codebook& base);

/// Everything a run can be configured with. Sections: policy, codebook,
/// operator (with an optional nested confusion object) and protocol.
struct RunConfig {
  StudySetup setup;
  BandGeometry geometry;

  json to_json() const;
};

/// Missing keys keep their defaults; unknown keys are rejected. The codebook
/// is rebuilt from the policy before overrides are applied. Throws ConfigError.
RunConfig run_config_from_json(const json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace hapticguide
