#pragma once

#include "hapticguide/engine.hpp"
#include "hapticguide/study.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace hapticguide {

/// Append-only sink for encoded 9-byte device frames, shared across sessions.
class DeviceSink {
 public:
  explicit DeviceSink(const std::filesystem::path& path);
  void write(const MotorFrame& frame);
  std::size_t frames_written() const;

 private:
  mutable std::mutex mutex_;
  std::ofstream out_;
  std::size_t count_ = 0;
};

/// Identity and configuration of one client session.
struct SessionDescriptor {
  std::string id;
  Protocol protocol = Protocol::Guidance;
  Condition condition = Condition::Multimodal;
  SessionMode mode = SessionMode::Interactive;
  std::optional<OperatorParams> operator_params;  // never set for Interactive
};

/// Message-level state machine behind one service connection. Transport
/// agnostic: feed it client messages, send back what it returns.
///
/// Client messages: {"type":"Control","action":"start"|"finish"|"abort"|"respond",...}
/// and {"type":"PoseUpdate","t_us":..,"tool":[x,y,z]}. Server messages:
/// FrameOut, CueEventOut, PoseUpdate (simulated runs only), TrialState, Error.
/// Every message carries "session".
class Session {
 public:
  Session(std::string id, StudySetup setup, std::optional<std::filesystem::path> log_dir = {},
          std::shared_ptr<DeviceSink> sink = nullptr);

  /// Greeting sent when the connection opens.
  std::vector<nlohmann::json> open();
  std::vector<nlohmann::json> handle(const std::string& text);
  /// Transport closed under a running trial: abort and persist what exists.
  void disconnect();

  bool closed() const { return closed_; }
  const std::string& id() const { return id_; }
  const SessionDescriptor& descriptor() const { return descriptor_; }
  /// Most recent finished (or aborted) trial.
  const std::optional<TrialLog>& last_log() const { return last_log_; }
  const std::vector<std::filesystem::path>& written_logs() const { return written_; }

 private:
  using Out = std::vector<nlohmann::json>;

  void dispatch(const nlohmann::json& msg, Out& out);
  void start(const nlohmann::json& msg, Out& out);
  void pose(const nlohmann::json& msg, Out& out);
  void finish(Out& out);
  void respond(const nlohmann::json& msg, Out& out);
  void abort_trial(const std::string& diagnostic, Out& out);
  void run_simulated(Out& out);
  void close_trial(Out& out, const char* phase);

  nlohmann::json message(const char* type, Micros t_us) const;
  void emit_frame(const MotorFrame& f, Out& out);
  void emit_cue(const CueEvent& e, Out& out);

  std::string id_;
  StudySetup setup_;
  std::optional<std::filesystem::path> log_dir_;
  std::shared_ptr<DeviceSink> sink_;
  SessionDescriptor descriptor_;
  bool closed_ = false;

  std::optional<TrialLog> trial_;
  std::unique_ptr<GuidanceEngine> engine_;
  std::optional<TrialLog> last_log_;
  std::vector<std::filesystem::path> written_;
  std::uint32_t trials_started_ = 0;
};

/// Metrics of one finished trial, as reported in its final TrialState.
nlohmann::json live_metrics(const TrialLog& log);

}  // namespace hapticguide
