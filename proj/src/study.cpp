#include "hapticguide/study.hpp"

#include "hapticguide/engine.hpp"
#include "hapticguide/rng.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

namespace hapticguide {

std::string_view to_string(Protocol p) {
  return p == Protocol::Guidance ? "Guidance" : "CueIdentification";
}

Protocol protocol_from_string(std::string_view name) {
  if (name == "Guidance" || name == "guidance") return Protocol::Guidance;
  if (name == "CueIdentification" || name == "cue-id") return Protocol::CueIdentification;
  throw std::invalid_argument("unknown protocol: " + std::string(name));
}

std::string_view to_string(SessionMode m) {
  return m == SessionMode::Simulated ? "Simulated" : "Interactive";
}

SessionMode session_mode_from_string(std::string_view name) {
  if (name == "Simulated") return SessionMode::Simulated;
  if (name == "Interactive") return SessionMode::Interactive;
  throw std::invalid_argument("unknown session mode: " + std::string(name));
}

std::string_view to_string(OutcomeStatus s) {
  switch (s) {
    case OutcomeStatus::Completed: return "Completed";
    case OutcomeStatus::TimedOut: return "TimedOut";
    case OutcomeStatus::Aborted: return "Aborted";
  }
  return "?";
}

OutcomeStatus outcome_status_from_string(std::string_view name) {
  if (name == "Completed") return OutcomeStatus::Completed;
  if (name == "TimedOut") return OutcomeStatus::TimedOut;
  if (name == "Aborted") return OutcomeStatus::Aborted;
  throw std::invalid_argument("unknown outcome status: " + std::string(name));
}

TargetSpec TrialConfig::target(const PolicyConfig& policy) const {
  TargetSpec t;
  t.center = Vec3(lateral_offset_mm, 0.0, depth_mm);
  t.tolerance_radius_mm = policy.tolerance_radius_mm;
  return t;
}

bool pose_stream_overshoots(const std::vector<PoseSample>& poses, double target_z_mm) {
  return std::any_of(poses.begin(), poses.end(),
                     [&](const PoseSample& p) { return p.tool.z() > target_z_mm; });
}

namespace {

TrialLog make_log(const TrialConfig& cfg, const StudySetup& setup) {
  TrialLog log;
  log.config = cfg;
  log.policy = setup.policy;
  log.operator_params = setup.operator_params;
  log.confusion = setup.confusion;
  log.codebook = setup.codebook;
  return log;
}

StudySetup setup_from_log(const TrialLog& log) {
  StudySetup s;
  s.policy = log.policy;
  s.codebook = log.codebook;
  if (log.operator_params) s.operator_params = *log.operator_params;
  s.confusion = log.confusion;
  s.timeout_ms = log.config.timeout_ms;
  s.distractor_ms = log.config.distractor_ms;
  s.cue_window_ms = log.config.cue_window_ms;
  return s;
}

// Keeps the percept queue ordered by availability, stable for ties.
void enqueue(OperatorState& op, const Percept& p) {
  auto it = std::upper_bound(op.pending.begin(), op.pending.end(), p.available_at_us,
                             [](Micros t, const Percept& q) { return t < q.available_at_us; });
  op.pending.insert(it, p);
}

}  // namespace

void present_cue(TrialLog& log) {
  const TrialConfig& cfg = log.config;
  const Micros onset = ms_to_us(cfg.distractor_ms);
  const Micros window_end = onset + ms_to_us(cfg.cue_window_ms);
  FrameRenderer renderer(log.codebook);
  const CueEventKind kind =
      cfg.presented_cue == CueId::Success ? CueEventKind::Burst : CueEventKind::Start;
  const CueEvent start{onset, cfg.presented_cue, kind};
  renderer.apply(start);
  log.cues.push_back(start);
  for (Micros t = onset; t < window_end; t += kFramePeriodUs) {
    log.frames.push_back({renderer.render(t), true});
  }
  if (kind == CueEventKind::Start) log.cues.push_back({window_end, cfg.presented_cue, CueEventKind::Stop});
}

TrialLog run_cue_id_trial(const TrialConfig& cfg, const StudySetup& setup) {
  if (cfg.protocol != Protocol::CueIdentification) throw std::invalid_argument("not a cue-id trial");
  if (!identification_index(cfg.presented_cue)) throw std::invalid_argument("cue not in identification set");
  TrialLog log = make_log(cfg, setup);
  log.operator_params.reset();
  Rng rng(cfg.seed);

  const Micros onset = ms_to_us(cfg.distractor_ms);
  const Micros window_end = onset + ms_to_us(cfg.cue_window_ms);
  present_cue(log);

  Perception perception;
  if (cfg.identification_quantile >= 0.0) {
    perception.perceived = identify_cue(cfg.presented_cue, setup.confusion, cfg.identification_quantile);
    perception.rt_s = sample_response_time(setup.confusion, rng);
  } else {
    perception = perceive_cue(cfg.presented_cue, setup.confusion, rng);
  }
  ResponseRecord response;
  response.rt_s = perception.rt_s;
  const Micros rt_us = static_cast<Micros>(perception.rt_s * 1e6);
  Outcome outcome;
  if (rt_us <= window_end - onset) {
    response.identified = perception.perceived;
    response.t_us = onset + rt_us;
  } else {
    response.t_us = window_end;
  }
  log.responses.push_back(response);

  outcome.t_us = window_end;
  outcome.identified = response.identified;
  outcome.rt_s = response.identified ? response.rt_s : 0.0;
  outcome.correct = response.identified == cfg.presented_cue;
  log.outcome = outcome;
  return log;
}

std::vector<TrialLog> run_cue_id_session(std::uint32_t participant, std::uint64_t seed,
                                         const StudySetup& setup) {
  setup.confusion.validate();
  std::vector<CueId> order;
  for (CueId c : kIdentificationCues) order.insert(order.end(), kCueRepetitions, c);
  const std::uint64_t session_seed = derive_seed(seed, {0xC0E1D, participant});
  Rng rng(session_seed);
  rng.shuffle(order);

  std::array<std::vector<double>, 5> quantiles;
  for (auto& q : quantiles) {
    for (int k = 0; k < kCueRepetitions; ++k) q.push_back((k + rng.uniform()) / kCueRepetitions);
    rng.shuffle(q);
  }

  std::vector<TrialLog> logs;
  logs.reserve(order.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) {
    TrialConfig cfg;
    auto& q = quantiles[*identification_index(order[i])];
    cfg.identification_quantile = q.back();
    q.pop_back();
    cfg.protocol = Protocol::CueIdentification;
    cfg.participant = participant;
    cfg.trial_index = i;
    cfg.presented_cue = order[i];
    cfg.distractor_ms = setup.distractor_ms;
    cfg.cue_window_ms = setup.cue_window_ms;
    cfg.seed = derive_seed(session_seed, {i});
    logs.push_back(run_cue_id_trial(cfg, setup));
  }
  return logs;
}

TrialLog run_guidance_trial(const TrialConfig& cfg, const StudySetup& setup) {
  if (cfg.protocol != Protocol::Guidance || cfg.mode != SessionMode::Simulated) {
    throw std::invalid_argument("not a simulated guidance trial");
  }
  const OperatorParams& params = setup.operator_params;
  params.validate();
  TrialLog log = make_log(cfg, setup);
  Rng rng(derive_seed(cfg.seed, {params.rng_seed}));

  const TargetSpec target = cfg.target(setup.policy);
  GuidanceEngine engine(setup.policy, setup.codebook, target);
  CuePerceiver perceiver(setup.confusion,
                         ms_to_us(setup.policy.pulse_on_ms + setup.policy.pulse_off_ms));
  const bool haptics_delivered = cfg.condition != Condition::AROnly;

  OperatorState op;
  op.tool = kHomePose;
  op.estimate = initial_estimate(cfg.condition, target, kHomePose, params, rng);

  const Micros timeout = ms_to_us(cfg.timeout_ms);
  Outcome outcome;
  outcome.status = OutcomeStatus::TimedOut;
  for (Micros t = 0; t <= timeout; t += kPosePeriodUs) {
    if (t > 0) {
      std::vector<Percept> due;
      for (const Percept& p : op.pending) {
        if (p.available_at_us > t) break;
        due.push_back(p);
      }
      const std::size_t before = op.pending.size();
      operator_step(op, cfg.condition, t, kPosePeriodUs, params, rng);
      const std::size_t consumed = before - op.pending.size();
      for (std::size_t i = 0; i < consumed; ++i) log.percepts.push_back({t, due[i].cue, due[i].kind});
    }
    log.poses.push_back({t, op.tool});
    GuidanceEngine::Output out = engine.on_pose(t, op.tool);
    if (haptics_delivered) {
      for (const Percept& p : perceiver.recheck(t, params, rng)) enqueue(op, p);
    }
    for (const CueEvent& e : out.events) {
      log.cues.push_back(e);
      if (!haptics_delivered) continue;
      for (const Percept& p : perceiver.perceive(e, params, rng)) enqueue(op, p);
    }
    for (const MotorFrame& f : out.frames) log.frames.push_back({f, haptics_delivered});
    outcome.t_us = t;
    if (op.declared_done) {
      outcome.status = OutcomeStatus::Completed;
      break;
    }
  }
  outcome.final_error_mm = euclidean_error(log.poses.back().tool, target.center);
  outcome.completion_time_s = us_to_s(outcome.t_us);
  outcome.overshoot = pose_stream_overshoots(log.poses, target.center.z());
  log.outcome = outcome;
  return log;
}

std::vector<TrialLog> run_guidance_session(std::uint32_t participant, std::uint64_t seed,
                                           const StudySetup& setup,
                                           std::span<const Condition> conditions) {
  // Counterbalancing: the six orders of three conditions, cycled by participant.
  static constexpr std::array<std::array<int, 3>, 6> kOrders = {
      {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {0, 2, 1}, {2, 1, 0}, {1, 0, 2}}};
  std::vector<Condition> ordered;
  for (int idx : kOrders[participant % kOrders.size()]) {
    const Condition c = kAllConditions[idx];
    if (std::find(conditions.begin(), conditions.end(), c) != conditions.end()) ordered.push_back(c);
  }

  std::vector<TrialLog> logs;
  std::uint32_t trial_index = 0;
  for (Condition condition : ordered) {
    struct Slot {
      std::uint32_t position;
      std::uint32_t repetition;
    };
    std::vector<Slot> slots;
    for (std::uint32_t pos = 0; pos < kTargetDepthsMm.size() * kLateralOffsetsMm.size(); ++pos) {
      for (std::uint32_t rep = 0; rep < kRepetitionsPerPosition; ++rep) slots.push_back({pos, rep});
    }
    Rng order_rng(derive_seed(seed, {0x6D1DE, participant, index_of(condition)}));
    order_rng.shuffle(slots);
    for (const Slot& slot : slots) {
      TrialConfig cfg;
      cfg.protocol = Protocol::Guidance;
      cfg.participant = participant;
      cfg.trial_index = trial_index++;
      cfg.condition = condition;
      cfg.depth_mm = kTargetDepthsMm[slot.position / kLateralOffsetsMm.size()];
      cfg.lateral_offset_mm = kLateralOffsetsMm[slot.position % kLateralOffsetsMm.size()];
      cfg.repetition = slot.repetition;
      cfg.timeout_ms = setup.timeout_ms;
      cfg.seed = derive_seed(seed, {0x7A1A1, participant, index_of(condition), slot.position,
                                    slot.repetition});
      logs.push_back(run_guidance_trial(cfg, setup));
    }
  }
  return logs;
}

TrialLog rerun_trial(const TrialLog& log) {
  if (log.config.mode == SessionMode::Interactive) return replay_interactive(log);
  const StudySetup setup = setup_from_log(log);
  if (log.config.protocol == Protocol::CueIdentification) return run_cue_id_trial(log.config, setup);
  if (!log.operator_params) throw std::invalid_argument("simulated guidance log lacks operator params");
  return run_guidance_trial(log.config, setup);
}

TrialLog replay_interactive(const TrialLog& log) {
  TrialLog out = log;
  out.cues.clear();
  out.frames.clear();
  if (log.config.protocol != Protocol::Guidance) {
    // Interactive cue-id trials carry no engine-derived state beyond playback.
    present_cue(out);
    return out;
  }
  const TargetSpec target = log.config.target(log.policy);
  GuidanceEngine engine(log.policy, log.codebook, target);
  for (const PoseSample& p : log.poses) {
    GuidanceEngine::Output o = engine.on_pose(p.t_us, p.tool);
    out.cues.insert(out.cues.end(), o.events.begin(), o.events.end());
    for (const MotorFrame& f : o.frames) out.frames.push_back({f, true});
  }
  if (log.outcome) {
    Outcome oc = *log.outcome;
    if (!log.poses.empty()) {
      oc.final_error_mm = euclidean_error(log.poses.back().tool, target.center);
      oc.overshoot = pose_stream_overshoots(log.poses, target.center.z());
    }
    out.outcome = oc;
  }
  return out;
}

namespace {

void require_homogeneous(std::span<const TrialLog> logs) {
  if (logs.empty()) throw std::invalid_argument("compute_metrics: no trials");
  const Protocol p = logs.front().config.protocol;
  for (const TrialLog& l : logs) {
    if (l.config.protocol != p) throw std::invalid_argument("compute_metrics: mixed protocols");
  }
}

bool scored(const TrialLog& l) {
  return l.outcome && l.outcome->status != OutcomeStatus::Aborted;
}

}  // namespace

StudySummary compute_metrics(std::span<const TrialLog> logs) {
  require_homogeneous(logs);
  StudySummary summary;
  summary.protocol = logs.front().config.protocol;
  std::set<std::uint32_t> participants;
  for (const TrialLog& l : logs) participants.insert(l.config.participant);
  summary.participants = participants.size();

  if (summary.protocol == Protocol::CueIdentification) {
    CueIdMetrics m;
    std::array<std::size_t, 5> correct{};
    std::vector<double> rts;
    for (const TrialLog& l : logs) {
      if (!scored(l)) continue;
      const std::size_t row = *identification_index(l.config.presented_cue);
      ++m.trials;
      ++m.per_cue_trials[row];
      if (!l.outcome->identified) {
        ++m.no_response;
        continue;
      }
      const std::size_t col = *identification_index(*l.outcome->identified);
      ++m.confusion[row][col];
      if (row == col) ++correct[row];
      rts.push_back(l.outcome->rt_s);
    }
    std::size_t total_correct = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      total_correct += correct[i];
      m.per_cue_accuracy[i] =
          m.per_cue_trials[i] ? static_cast<double>(correct[i]) / static_cast<double>(m.per_cue_trials[i]) : 0.0;
    }
    m.overall_accuracy = m.trials ? static_cast<double>(total_correct) / static_cast<double>(m.trials) : 0.0;
    m.rt_mean_s = stable_mean(rts);
    m.rt_sd_s = sample_sd(rts);
    summary.trials = m.trials;
    summary.cue_id = m;
    return summary;
  }

  for (Condition c : kAllConditions) {
    std::vector<double> errors, times;
    std::size_t overshoots = 0, timeouts = 0;
    for (const TrialLog& l : logs) {
      if (l.config.condition != c || !scored(l)) continue;
      errors.push_back(l.outcome->final_error_mm);
      times.push_back(l.outcome->completion_time_s);
      if (pose_stream_overshoots(l.poses, l.config.depth_mm)) ++overshoots;
      if (l.outcome->status == OutcomeStatus::TimedOut) ++timeouts;
    }
    if (errors.empty()) continue;
    ConditionMetrics m;
    m.trials = errors.size();
    m.timeouts = timeouts;
    m.error_mean_mm = stable_mean(errors);
    m.error_sd_mm = sample_sd(errors);
    m.time_mean_s = stable_mean(times);
    m.time_sd_s = sample_sd(times);
    m.overshoot_rate = static_cast<double>(overshoots) / static_cast<double>(m.trials);
    summary.trials += m.trials;
    summary.conditions[index_of(c)] = m;
  }
  try {
    const Eigen::MatrixXd err = participant_matrix(logs, GuidanceMetric::Error);
    const Eigen::MatrixXd time = participant_matrix(logs, GuidanceMetric::Time);
    if (err.rows() >= 2 && err.cols() >= 2) {
      summary.error_anova = rm_anova(err);
      summary.time_anova = rm_anova(time);
    }
  } catch (const std::invalid_argument&) {
    // Incomplete designs get descriptive statistics only.
  }
  return summary;
}

Eigen::MatrixXd participant_matrix(std::span<const TrialLog> logs, GuidanceMetric metric) {
  std::map<std::uint32_t, std::array<std::vector<double>, 3>> cells;
  std::array<bool, 3> present{};
  for (const TrialLog& l : logs) {
    if (l.config.protocol != Protocol::Guidance || !scored(l)) continue;
    const double v = metric == GuidanceMetric::Error ? l.outcome->final_error_mm
                                                     : l.outcome->completion_time_s;
    cells[l.config.participant][index_of(l.config.condition)].push_back(v);
    present[index_of(l.config.condition)] = true;
  }
  std::vector<std::size_t> columns;
  for (std::size_t c = 0; c < 3; ++c) {
    if (present[c]) columns.push_back(c);
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(cells.size()), static_cast<Eigen::Index>(columns.size()));
  Eigen::Index row = 0;
  for (const auto& [participant, by_condition] : cells) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      const auto& values = by_condition[columns[j]];
      if (values.empty()) {
        throw std::invalid_argument("participant " + std::to_string(participant) +
                                    " has no trials in a condition");
      }
      m(row, static_cast<Eigen::Index>(j)) = stable_mean(values);
    }
    ++row;
  }
  return m;
}

}  // namespace hapticguide
