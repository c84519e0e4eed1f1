#include "hapticguide/json_io.hpp"

#include <fstream>
#include <set>
#include <string>

namespace hapticguide {

namespace {

// Reads known keys from an object and rejects anything else, so a typo in a
// config file fails loudly instead of silently keeping a default.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename F>
auto wrap_invalid(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

void to_json(json& j, const PolicyConfig& c) {
  j = json{{"axis_threshold_mm", c.axis_threshold_mm},
           {"dwell_ms", c.dwell_ms},
           {"pulse_on_ms", c.pulse_on_ms},
           {"pulse_off_ms", c.pulse_off_ms},
           {"directional_intensity", c.directional_intensity},
           {"state_intensity", c.state_intensity},
           {"state_burst_ms", c.state_burst_ms},
           {"tolerance_radius_mm", c.tolerance_radius_mm},
           {"hysteresis_mm", c.hysteresis_mm},
           {"largest_axis_only", c.largest_axis_only}};
}

void from_json(const json& j, PolicyConfig& c) {
  Fields f(j, "policy");
  f.read("axis_threshold_mm", c.axis_threshold_mm);
  f.read("dwell_ms", c.dwell_ms);
  f.read("pulse_on_ms", c.pulse_on_ms);
  f.read("pulse_off_ms", c.pulse_off_ms);
  f.read("directional_intensity", c.directional_intensity);
  f.read("state_intensity", c.state_intensity);
  f.read("state_burst_ms", c.state_burst_ms);
  f.read("tolerance_radius_mm", c.tolerance_radius_mm);
  f.read("hysteresis_mm", c.hysteresis_mm);
  f.read("largest_axis_only", c.largest_axis_only);
  f.finish();
}

void to_json(json& j, const ActuationPattern& p) {
  json frames = json::array();
  for (const Keyframe& k : p.keyframes) {
    frames.push_back({{"duration_us", k.duration_us}, {"intensity", k.intensity}});
  }
  j = json{{"repeat", p.repeat}, {"keyframes", frames}};
}

void from_json(const json& j, ActuationPattern& p) {
  Fields f(j, "pattern");
  p = ActuationPattern{};
  f.read("repeat", p.repeat);
  if (const json* frames = f.sub("keyframes")) {
    if (!frames->is_array()) throw ConfigError("pattern.keyframes: expected an array");
    for (const json& k : *frames) {
      Fields kf(k, "keyframe");
      Keyframe key;
      double duration_ms = -1.0;
      kf.read("duration_us", key.duration_us);
      kf.read("duration_ms", duration_ms);
      if (duration_ms >= 0.0) key.duration_us = ms_to_us(duration_ms);
      std::array<int, kMotorCount> levels{};
      kf.read("intensity", levels);
      kf.finish();
      for (std::size_t m = 0; m < kMotorCount; ++m) {
        if (levels[m] < 0 || levels[m] > 255) throw ConfigError("keyframe.intensity: outside 0..255");
        key.intensity[m] = static_cast<std::uint8_t>(levels[m]);
      }
      p.keyframes.push_back(key);
    }
  }
  f.finish();
}

void to_json(json& j, const Codebook& c) {
  j = json::object();
  for (CueId cue : kAllCues) j[std::string(to_string(cue))] = c[cue];
}

Codebook codebook_from_json(const json& j, const Codebook& base) {
  if (!j.is_object()) throw ConfigError("codebook: expected an object");
  Codebook out = base;
  for (const auto& [name, value] : j.items()) {
    const CueId cue = wrap_invalid("codebook", [&] { return cue_from_string(name); });
    ActuationPattern pattern = value.get<ActuationPattern>();
    wrap_invalid("codebook." + name, [&] {
      out.set(cue, std::move(pattern));
      return 0;
    });
  }
  wrap_invalid("codebook", [&] {
    out.validate();
    return 0;
  });
  return out;
}

void to_json(json& j, const OperatorParams& p) {
  j = json{{"reaction_delay_ms", p.reaction_delay_ms},
           {"control_gain", p.control_gain},
           {"motor_noise_mm", p.motor_noise_mm},
           {"visual_depth_bias_mm", p.visual_depth_bias_mm},
           {"visual_lateral_noise_mm", p.visual_lateral_noise_mm},
           {"visual_depth_noise_mm", p.visual_depth_noise_mm},
           {"reference_depth_noise_mm", p.reference_depth_noise_mm},
           {"haptic_step_mm", p.haptic_step_mm},
           {"haptic_stop_offset_mm", p.haptic_stop_offset_mm},
           {"haptic_weight", p.haptic_weight},
           {"perceived_stop_tolerance_mm", p.perceived_stop_tolerance_mm},
           {"multimodal_checking_delay_ms", p.multimodal_checking_delay_ms},
           {"stop_dwell_ms", p.stop_dwell_ms},
           {"rng_seed", p.rng_seed}};
}

void from_json(const json& j, OperatorParams& p) {
  Fields f(j, "operator");
  f.read("reaction_delay_ms", p.reaction_delay_ms);
  f.read("control_gain", p.control_gain);
  f.read("motor_noise_mm", p.motor_noise_mm);
  f.read("visual_depth_bias_mm", p.visual_depth_bias_mm);
  f.read("visual_lateral_noise_mm", p.visual_lateral_noise_mm);
  f.read("visual_depth_noise_mm", p.visual_depth_noise_mm);
  f.read("reference_depth_noise_mm", p.reference_depth_noise_mm);
  f.read("haptic_step_mm", p.haptic_step_mm);
  f.read("haptic_stop_offset_mm", p.haptic_stop_offset_mm);
  f.read("haptic_weight", p.haptic_weight);
  f.read("perceived_stop_tolerance_mm", p.perceived_stop_tolerance_mm);
  f.read("multimodal_checking_delay_ms", p.multimodal_checking_delay_ms);
  f.read("stop_dwell_ms", p.stop_dwell_ms);
  f.read("rng_seed", p.rng_seed);
  f.sub("confusion");  // handled by the run config loader
  f.finish();
}

void to_json(json& j, const ConfusionModel& m) {
  j = json{{"rows", m.rows}, {"rt_mean_s", m.rt_mean_s}, {"rt_sd_s", m.rt_sd_s}, {"rt_min_s", m.rt_min_s}};
}

void from_json(const json& j, ConfusionModel& m) {
  Fields f(j, "confusion");
  f.read("rows", m.rows);
  f.read("rt_mean_s", m.rt_mean_s);
  f.read("rt_sd_s", m.rt_sd_s);
  f.read("rt_min_s", m.rt_min_s);
  f.finish();
}

void to_json(json& j, const TrialConfig& c) {
  j = json{{"protocol", to_string(c.protocol)},
           {"mode", to_string(c.mode)},
           {"participant", c.participant},
           {"trial_index", c.trial_index},
           {"condition", to_string(c.condition)},
           {"depth_mm", c.depth_mm},
           {"lateral_offset_mm", c.lateral_offset_mm},
           {"repetition", c.repetition},
           {"timeout_ms", c.timeout_ms},
           {"presented_cue", to_string(c.presented_cue)},
           {"distractor_ms", c.distractor_ms},
           {"cue_window_ms", c.cue_window_ms},
           {"identification_quantile", c.identification_quantile},
           {"seed", c.seed}};
}

void from_json(const json& j, TrialConfig& c) {
  Fields f(j, "config");
  std::string protocol(to_string(c.protocol)), mode(to_string(c.mode));
  std::string condition(to_string(c.condition)), cue(to_string(c.presented_cue));
  f.read("protocol", protocol);
  f.read("mode", mode);
  f.read("participant", c.participant);
  f.read("trial_index", c.trial_index);
  f.read("condition", condition);
  f.read("depth_mm", c.depth_mm);
  f.read("lateral_offset_mm", c.lateral_offset_mm);
  f.read("repetition", c.repetition);
  f.read("timeout_ms", c.timeout_ms);
  f.read("presented_cue", cue);
  f.read("distractor_ms", c.distractor_ms);
  f.read("cue_window_ms", c.cue_window_ms);
  f.read("identification_quantile", c.identification_quantile);
  f.read("seed", c.seed);
  f.finish();
  wrap_invalid("config", [&] {
    c.protocol = protocol_from_string(protocol);
    c.mode = session_mode_from_string(mode);
    c.condition = condition_from_string(condition);
    c.presented_cue = cue_from_string(cue);
    return 0;
  });
}

void to_json(json& j, const Outcome& o) {
  j = json{{"status", to_string(o.status)},
           {"t_us", o.t_us},
           {"final_error_mm", o.final_error_mm},
           {"completion_time_s", o.completion_time_s},
           {"overshoot", o.overshoot},
           {"identified", o.identified ? json(to_string(*o.identified)) : json(nullptr)},
           {"rt_s", o.rt_s},
           {"correct", o.correct}};
}

void from_json(const json& j, Outcome& o) {
  Fields f(j, "outcome");
  std::string status(to_string(o.status));
  json identified;
  f.read("status", status);
  f.read("t_us", o.t_us);
  f.read("final_error_mm", o.final_error_mm);
  f.read("completion_time_s", o.completion_time_s);
  f.read("overshoot", o.overshoot);
  f.read("identified", identified);
  f.read("rt_s", o.rt_s);
  f.read("correct", o.correct);
  f.finish();
  wrap_invalid("outcome", [&] {
    o.status = outcome_status_from_string(status);
    if (identified.is_string()) {
      o.identified = cue_from_string(identified.get<std::string>());
    } else {
      o.identified.reset();
    }
    return 0;
  });
}

void to_json(json& j, const ConditionMetrics& m) {
  j = json{{"trials", m.trials},
           {"timeouts", m.timeouts},
           {"error_mean_mm", m.error_mean_mm},
           {"error_sd_mm", m.error_sd_mm},
           {"time_mean_s", m.time_mean_s},
           {"time_sd_s", m.time_sd_s},
           {"overshoot_rate", m.overshoot_rate}};
}

void to_json(json& j, const CueIdMetrics& m) {
  j = json{{"trials", m.trials},
           {"no_response", m.no_response},
           {"overall_accuracy", m.overall_accuracy},
           {"per_cue_accuracy", m.per_cue_accuracy},
           {"per_cue_trials", m.per_cue_trials},
           {"rt_mean_s", m.rt_mean_s},
           {"rt_sd_s", m.rt_sd_s},
           {"confusion", m.confusion}};
}

void to_json(json& j, const AnovaResult& a) {
  // inf is not representable in JSON; infinite_f carries that case.
  j = json{{"f", a.infinite_f ? json(nullptr) : json(a.f)},
           {"df_condition", a.df_condition},
           {"df_error", a.df_error},
           {"p", a.p},
           {"ss_condition", a.ss_condition},
           {"ss_subject", a.ss_subject},
           {"ss_error", a.ss_error},
           {"infinite_f", a.infinite_f}};
}

void to_json(json& j, const StudySummary& s) {
  j = json{{"protocol", to_string(s.protocol)}, {"trials", s.trials}, {"participants", s.participants}};
  json conditions = json::object();
  for (Condition c : kAllConditions) {
    if (s.conditions[index_of(c)]) conditions[std::string(to_string(c))] = *s.conditions[index_of(c)];
  }
  if (!conditions.empty()) j["conditions"] = conditions;
  if (s.cue_id) j["cue_id"] = *s.cue_id;
  if (s.error_anova) j["error_anova"] = *s.error_anova;
  if (s.time_anova) j["time_anova"] = *s.time_anova;
}

json RunConfig::to_json() const {
  json op = setup.operator_params;
  op["confusion"] = setup.confusion;
  return json{{"policy", setup.policy},
              {"codebook", {{"geometry", {{"motor_angles_deg", geometry.motor_angles_deg}}},
                            {"patterns", setup.codebook}}},
              {"operator", op},
              {"protocol",
               {{"timeout_ms", setup.timeout_ms},
                {"distractor_ms", setup.distractor_ms},
                {"cue_window_ms", setup.cue_window_ms}}}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig rc;
  Fields top(j, "config");
  if (const json* p = top.sub("policy")) from_json(*p, rc.setup.policy);
  wrap_invalid("policy", [&] {
    rc.setup.policy.validate();
    return 0;
  });

  json patterns = json::object();
  if (const json* cb = top.sub("codebook")) {
    Fields f(*cb, "codebook");
    if (const json* g = f.sub("geometry")) {
      Fields gf(*g, "codebook.geometry");
      gf.read("motor_angles_deg", rc.geometry.motor_angles_deg);
      gf.finish();
    }
    if (const json* pats = f.sub("patterns")) patterns = *pats;
    f.finish();
  }
  const Codebook base = wrap_invalid("codebook", [&] {
    rc.geometry.validate();
    return default_codebook(rc.setup.policy, rc.geometry);
  });
  rc.setup.codebook = codebook_from_json(patterns, base);

  if (const json* op = top.sub("operator")) {
    from_json(*op, rc.setup.operator_params);
    if (auto it = op->find("confusion"); it != op->end()) from_json(*it, rc.setup.confusion);
  }
  wrap_invalid("operator", [&] {
    rc.setup.operator_params.validate();
    rc.setup.confusion.validate();
    return 0;
  });

  if (const json* pr = top.sub("protocol")) {
    Fields f(*pr, "protocol");
    f.read("timeout_ms", rc.setup.timeout_ms);
    f.read("distractor_ms", rc.setup.distractor_ms);
    f.read("cue_window_ms", rc.setup.cue_window_ms);
    f.finish();
    if (!(rc.setup.timeout_ms > 0.0 && rc.setup.distractor_ms >= 0.0 && rc.setup.cue_window_ms > 0.0)) {
      throw ConfigError("protocol: durations out of range");
    }
  }
  top.finish();
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace hapticguide
