#pragma once

#include "hapticguide/session.hpp"
#include "hapticguide/study.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>

namespace hapticguide {

struct ServiceOptions {
  StudySetup setup;
  std::optional<std::filesystem::path> log_dir;  // per-session subdirectories
  std::shared_ptr<DeviceSink> device_sink;
  std::string address = "127.0.0.1";
};

/// WebSocket session service. Each connection is one Session, handled on
/// its own thread; messages are JSON text frames.
class SessionServer {
 public:
  explicit SessionServer(ServiceOptions options);
  ~SessionServer();

  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  /// Binds and listens; port 0 picks a free port. Returns the bound port.
  /// Throws std::runtime_error if the port is unavailable.
  std::uint16_t listen(std::uint16_t port);
  /// Accepts connections until stop(). Blocks.
  void run();
  /// Closes the listener and all open connections, then joins them.
  void stop();

  std::size_t sessions_started() const { return sessions_started_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::atomic<std::size_t> sessions_started_{0};
};

}  // namespace hapticguide
