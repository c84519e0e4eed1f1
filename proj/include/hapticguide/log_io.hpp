#pragma once

#include "hapticguide/study.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace hapticguide {

inline constexpr int kLogFormatVersion = 1;

class LogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trial log as line-delimited JSON: a header line with the configuration,
/// then one record per event merged by timestamp, then the outcome.
std::string serialize_log(const TrialLog& log);

struct LoadedLog {
  TrialLog log;
  std::size_t warnings = 0;         // incomplete trailing lines skipped
  std::size_t last_valid_line = 0;  // 1-based
};

/// Inverse of serialize_log. A damaged final line (a truncated write) is
/// skipped and counted; anything else malformed throws LogError, as does a
/// version mismatch.
LoadedLog parse_log(const std::string& text);

void persist_log(const TrialLog& log, const std::filesystem::path& path);
LoadedLog load_log(const std::filesystem::path& path);

/// Canonical file name for a trial, e.g. p03_t017_multi.jsonl.
std::string log_file_name(const TrialConfig& cfg);

}  // namespace hapticguide
