#include "hapticguide/session.hpp"

#include "hapticguide/json_io.hpp"
#include "hapticguide/log_io.hpp"

#include <cmath>
#include <stdexcept>

namespace hapticguide {

namespace {

// Client protocol violation; ends the session.
class Malformed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejected message; the session continues.
class Rejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
T required(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw Malformed(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Malformed(std::string("bad field '") + key + "'");
  }
}

template <typename T>
T optional_field(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Malformed(std::string("bad field '") + key + "'");
  }
}

}  // namespace

DeviceSink::DeviceSink(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::app) {
  if (!out_) throw std::runtime_error("cannot open device sink " + path.string());
}

void DeviceSink::write(const MotorFrame& frame) {
  const WireFrame bytes = encode_frame(frame);
  std::lock_guard lock(mutex_);
  out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out_.flush();
  ++count_;
}

std::size_t DeviceSink::frames_written() const {
  std::lock_guard lock(mutex_);
  return count_;
}

json live_metrics(const TrialLog& log) {
  json j;
  if (log.outcome) j["outcome"] = *log.outcome;
  try {
    j["summary"] = compute_metrics(std::span<const TrialLog>(&log, 1));
  } catch (const std::invalid_argument&) {
    j["summary"] = nullptr;
  }
  return j;
}

Session::Session(std::string id, StudySetup setup, std::optional<std::filesystem::path> log_dir,
                 std::shared_ptr<DeviceSink> sink)
    : id_(std::move(id)), setup_(std::move(setup)), log_dir_(std::move(log_dir)), sink_(std::move(sink)) {
  descriptor_.id = id_;
  if (log_dir_) std::filesystem::create_directories(*log_dir_);
}

json Session::message(const char* type, Micros t_us) const {
  return json{{"type", type}, {"session", id_}, {"t_us", t_us}};
}

std::vector<json> Session::open() {
  json m = message("TrialState", 0);
  m["phase"] = "connected";
  return {m};
}

std::vector<json> Session::handle(const std::string& text) {
  Out out;
  if (closed_) return out;
  try {
    json msg;
    try {
      msg = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Malformed(std::string("unparseable message: ") + e.what());
    }
    if (!msg.is_object()) throw Malformed("message is not an object");
    if (required<std::string>(msg, "session") != id_) throw Malformed("session id mismatch");
    dispatch(msg, out);
  } catch (const Rejected& e) {
    json m = message("Error", trial_ && !trial_->poses.empty() ? trial_->poses.back().t_us : 0);
    m["reason"] = e.what();
    out.push_back(m);
  } catch (const Malformed& e) {
    abort_trial(e.what(), out);
    closed_ = true;
  }
  return out;
}

void Session::dispatch(const json& msg, Out& out) {
  const std::string type = required<std::string>(msg, "type");
  if (type == "PoseUpdate") {
    pose(msg, out);
    return;
  }
  if (type != "Control") throw Malformed("unknown message type '" + type + "'");
  const std::string action = required<std::string>(msg, "action");
  if (action == "start") {
    start(msg, out);
  } else if (action == "finish") {
    if (!trial_ || trial_->config.protocol != Protocol::Guidance) throw Rejected("no guidance trial running");
    finish(out);
  } else if (action == "respond") {
    respond(msg, out);
  } else if (action == "abort") {
    if (!trial_) throw Rejected("no trial running");
    abort_trial("aborted by client", out);
  } else {
    throw Malformed("unknown control action '" + action + "'");
  }
}

void Session::start(const json& msg, Out& out) {
  if (trial_) throw Rejected("a trial is already running");
  TrialConfig cfg;
  try {
    cfg.protocol = protocol_from_string(optional_field<std::string>(msg, "protocol", "guidance"));
    const std::string mode = optional_field<std::string>(msg, "mode", "interactive");
    if (mode == "interactive" || mode == "Interactive") {
      cfg.mode = SessionMode::Interactive;
    } else if (mode == "simulated" || mode == "Simulated") {
      cfg.mode = SessionMode::Simulated;
    } else {
      throw std::invalid_argument("unknown mode '" + mode + "'");
    }
    cfg.condition = condition_from_string(optional_field<std::string>(msg, "condition", "multi"));
    cfg.presented_cue = cue_from_string(optional_field<std::string>(msg, "presented_cue", "Left"));
  } catch (const std::invalid_argument& e) {
    throw Malformed(e.what());
  }
  cfg.participant = optional_field<std::uint32_t>(msg, "participant", 0);
  cfg.trial_index = optional_field<std::uint32_t>(msg, "trial_index", trials_started_);
  cfg.depth_mm = optional_field<double>(msg, "depth_mm", 350.0);
  cfg.lateral_offset_mm = optional_field<double>(msg, "lateral_offset_mm", 10.0);
  cfg.repetition = optional_field<std::uint32_t>(msg, "repetition", 0);
  cfg.seed = optional_field<std::uint64_t>(msg, "seed", 0);
  cfg.timeout_ms = setup_.timeout_ms;
  cfg.distractor_ms = setup_.distractor_ms;
  cfg.cue_window_ms = setup_.cue_window_ms;
  if (!std::isfinite(cfg.depth_mm) || !std::isfinite(cfg.lateral_offset_mm)) throw Malformed("non-finite target");
  if (cfg.protocol == Protocol::CueIdentification && !identification_index(cfg.presented_cue)) {
    throw Malformed("presented_cue outside the identification set");
  }
  ++trials_started_;

  descriptor_.protocol = cfg.protocol;
  descriptor_.condition = cfg.condition;
  descriptor_.mode = cfg.mode;
  descriptor_.operator_params.reset();

  TrialLog log;
  log.config = cfg;
  log.policy = setup_.policy;
  log.confusion = setup_.confusion;
  log.codebook = setup_.codebook;
  trial_ = std::move(log);

  if (cfg.mode == SessionMode::Simulated) {
    descriptor_.operator_params = setup_.operator_params;
    run_simulated(out);
    return;
  }

  json state = message("TrialState", 0);
  state["phase"] = "running";
  state["config"] = cfg;
  out.push_back(state);

  if (cfg.protocol == Protocol::Guidance) {
    engine_ = std::make_unique<GuidanceEngine>(setup_.policy, setup_.codebook, cfg.target(setup_.policy));
    return;
  }
  present_cue(*trial_);
  for (const CueEvent& e : trial_->cues) {
    if (e.kind != CueEventKind::Stop) emit_cue(e, out);
  }
  for (const FrameRecord& f : trial_->frames) emit_frame(f.frame, out);
  for (const CueEvent& e : trial_->cues) {
    if (e.kind == CueEventKind::Stop) emit_cue(e, out);
  }
}

void Session::pose(const json& msg, Out& out) {
  if (!trial_ || !engine_) throw Rejected("no interactive guidance trial running");
  const Micros t = required<Micros>(msg, "t_us");
  const auto tool = required<std::array<double, 3>>(msg, "tool");
  const Vec3 p(tool[0], tool[1], tool[2]);
  if (!is_finite(p)) throw Malformed("non-finite tool position");
  if (!trial_->poses.empty() && t < trial_->poses.back().t_us) throw Rejected("pose timestamp regression");
  if (t < 0) throw Rejected("negative pose timestamp");

  trial_->poses.push_back({t, p});
  const GuidanceEngine::Output o = engine_->on_pose(t, p);
  for (const MotorFrame& f : o.frames) {
    trial_->frames.push_back({f, true});
    emit_frame(f, out);
  }
  for (const CueEvent& e : o.events) {
    trial_->cues.push_back(e);
    emit_cue(e, out);
  }
  if (!o.events.empty()) {
    json state = message("TrialState", t);
    state["phase"] = "running";
    state["error_mm"] = euclidean_error(p, trial_->config.target(trial_->policy).center);
    out.push_back(state);
  }
  if (t >= ms_to_us(trial_->config.timeout_ms)) {
    Outcome oc;
    oc.status = OutcomeStatus::TimedOut;
    trial_->outcome = oc;
    finish(out);
  }
}

void Session::finish(Out& out) {
  TrialLog& log = *trial_;
  Outcome oc = log.outcome.value_or(Outcome{});
  const TargetSpec target = log.config.target(log.policy);
  if (!log.poses.empty()) {
    oc.t_us = log.poses.back().t_us;
    oc.final_error_mm = euclidean_error(log.poses.back().tool, target.center);
    oc.completion_time_s = us_to_s(oc.t_us);
    oc.overshoot = pose_stream_overshoots(log.poses, target.center.z());
  } else {
    oc.status = OutcomeStatus::Aborted;
  }
  log.outcome = oc;
  close_trial(out, oc.status == OutcomeStatus::Aborted ? "aborted" : "completed");
}

void Session::respond(const json& msg, Out& out) {
  if (!trial_ || trial_->config.protocol != Protocol::CueIdentification) {
    throw Rejected("no cue identification trial running");
  }
  TrialLog& log = *trial_;
  const Micros t = required<Micros>(msg, "t_us");
  const Micros onset = ms_to_us(log.config.distractor_ms);
  const Micros window_end = onset + ms_to_us(log.config.cue_window_ms);
  std::optional<CueId> answer;
  if (auto it = msg.find("cue"); it != msg.end() && !it->is_null()) {
    try {
      answer = cue_from_string(it->get<std::string>());
    } catch (const std::exception&) {
      throw Malformed("bad field 'cue'");
    }
    if (!identification_index(*answer)) throw Malformed("response outside the identification set");
  }
  ResponseRecord r;
  r.t_us = t;
  r.rt_s = us_to_s(t - onset);
  const bool in_window = t >= onset && t <= window_end;
  if (in_window) r.identified = answer;
  log.responses.push_back(r);

  Outcome oc;
  oc.t_us = window_end;
  oc.identified = r.identified;
  oc.rt_s = r.identified ? r.rt_s : 0.0;
  oc.correct = r.identified == log.config.presented_cue;
  log.outcome = oc;
  close_trial(out, "completed");
}

void Session::abort_trial(const std::string& diagnostic, Out& out) {
  if (!trial_) {
    json m = message("TrialState", 0);
    m["phase"] = "aborted";
    m["diagnostic"] = diagnostic;
    out.push_back(m);
    return;
  }
  Outcome oc = trial_->outcome.value_or(Outcome{});
  oc.status = OutcomeStatus::Aborted;
  if (!trial_->poses.empty()) oc.t_us = trial_->poses.back().t_us;
  trial_->outcome = oc;
  close_trial(out, "aborted");
  out.back()["diagnostic"] = diagnostic;
}

void Session::disconnect() {
  Out ignored;
  if (trial_) abort_trial("client disconnected", ignored);
  closed_ = true;
}

void Session::run_simulated(Out& out) {
  TrialLog& log = *trial_;
  const TrialConfig cfg = log.config;
  if (cfg.protocol == Protocol::Guidance) {
    log = run_guidance_trial(cfg, setup_);
  } else {
    log = run_cue_id_trial(cfg, setup_);
  }
  json state = message("TrialState", 0);
  state["phase"] = "running";
  state["config"] = cfg;
  out.push_back(state);

  // Observation stream: poses, cue events and delivered frames merged by time.
  std::size_t pi = 0, ci = 0, fi = 0;
  auto next_frame = [&] {
    while (fi < log.frames.size() && !log.frames[fi].delivered) ++fi;
  };
  next_frame();
  for (;;) {
    const Micros tp = pi < log.poses.size() ? log.poses[pi].t_us : INT64_MAX;
    const Micros tc = ci < log.cues.size() ? log.cues[ci].at_us : INT64_MAX;
    const Micros tf = fi < log.frames.size() ? log.frames[fi].frame.at_us : INT64_MAX;
    if (tp == INT64_MAX && tc == INT64_MAX && tf == INT64_MAX) break;
    if (tp <= tc && tp <= tf) {
      json m = message("PoseUpdate", tp);
      const Vec3& tool = log.poses[pi++].tool;
      m["tool"] = {tool.x(), tool.y(), tool.z()};
      out.push_back(m);
    } else if (tc <= tf) {
      emit_cue(log.cues[ci++], out);
    } else {
      emit_frame(log.frames[fi++].frame, out);
      next_frame();
    }
  }
  close_trial(out, "completed");
}

void Session::close_trial(Out& out, const char* phase) {
  TrialLog& log = *trial_;
  json state = message("TrialState", log.outcome ? log.outcome->t_us : 0);
  state["phase"] = phase;
  state["metrics"] = live_metrics(log);
  if (log_dir_) {
    const std::filesystem::path path = *log_dir_ / log_file_name(log.config);
    persist_log(log, path);
    written_.push_back(path);
    state["log"] = path.filename().string();
  }
  out.push_back(state);
  last_log_ = std::move(log);
  trial_.reset();
  engine_.reset();
}

void Session::emit_frame(const MotorFrame& f, Out& out) {
  json m = message("FrameOut", f.at_us);
  m["seq"] = f.seq;
  m["intensity"] = f.intensity;
  out.push_back(m);
  if (sink_) sink_->write(f);
}

void Session::emit_cue(const CueEvent& e, Out& out) {
  json m = message("CueEventOut", e.at_us);
  m["cue"] = to_string(e.cue);
  m["kind"] = to_string(e.kind);
  out.push_back(m);
}

}  // namespace hapticguide
