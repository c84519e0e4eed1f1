#include "hapticguide/log_io.hpp"

#include "hapticguide/json_io.hpp"

#include <fmt/format.h>

#include <array>
#include <fstream>
#include <sstream>
#include <string_view>

namespace hapticguide {

namespace {

constexpr std::string_view kFormatName = "hapticguide-trial";

// Shortest round-trip text, always with a fraction or exponent so the value
// parses back as a double (keeps -0.0 and integral values typed).
void put_double(fmt::memory_buffer& out, double v) {
  const std::size_t start = out.size();
  fmt::format_to(std::back_inserter(out), "{}", v);
  const std::string_view s(out.data() + start, out.size() - start);
  if (s.find_first_of(".eEni") == std::string_view::npos) fmt::format_to(std::back_inserter(out), ".0");
}

void put_intensities(fmt::memory_buffer& out, const Intensities& in) {
  fmt::format_to(std::back_inserter(out), "[{},{},{},{},{},{}]", in[0], in[1], in[2], in[3], in[4], in[5]);
}

enum class Stream : int { Percept, Pose, Cue, Frame, Response, Count };

void put_record(fmt::memory_buffer& out, const TrialLog& log, Stream s, std::size_t i) {
  auto it = std::back_inserter(out);
  switch (s) {
    case Stream::Pose: {
      const PoseSample& p = log.poses[i];
      fmt::format_to(it, "{{\"t\":{},\"type\":\"pose\",\"tool\":[", p.t_us);
      put_double(out, p.tool.x());
      out.push_back(',');
      put_double(out, p.tool.y());
      out.push_back(',');
      put_double(out, p.tool.z());
      fmt::format_to(it, "]}}\n");
      break;
    }
    case Stream::Cue: {
      const CueEvent& e = log.cues[i];
      fmt::format_to(it, "{{\"t\":{},\"type\":\"cue\",\"cue\":\"{}\",\"kind\":\"{}\"}}\n", e.at_us,
                     to_string(e.cue), to_string(e.kind));
      break;
    }
    case Stream::Frame: {
      const FrameRecord& f = log.frames[i];
      fmt::format_to(it, "{{\"t\":{},\"type\":\"frame\",\"seq\":{},\"intensity\":", f.frame.at_us, f.frame.seq);
      put_intensities(out, f.frame.intensity);
      fmt::format_to(it, ",\"delivered\":{}}}\n", f.delivered);
      break;
    }
    case Stream::Percept: {
      const PerceptRecord& p = log.percepts[i];
      fmt::format_to(it, "{{\"t\":{},\"type\":\"percept\",\"cue\":\"{}\",\"kind\":\"{}\"}}\n", p.t_us,
                     to_string(p.cue), to_string(p.kind));
      break;
    }
    case Stream::Response: {
      const ResponseRecord& r = log.responses[i];
      fmt::format_to(it, "{{\"t\":{},\"type\":\"response\",\"identified\":", r.t_us);
      if (r.identified) {
        fmt::format_to(it, "\"{}\"", to_string(*r.identified));
      } else {
        fmt::format_to(it, "null");
      }
      fmt::format_to(it, ",\"rt_s\":");
      put_double(out, r.rt_s);
      fmt::format_to(it, "}}\n");
      break;
    }
    case Stream::Count: break;
  }
}

Micros stamp(const TrialLog& log, Stream s, std::size_t i) {
  switch (s) {
    case Stream::Pose: return log.poses[i].t_us;
    case Stream::Cue: return log.cues[i].at_us;
    case Stream::Frame: return log.frames[i].frame.at_us;
    case Stream::Percept: return log.percepts[i].t_us;
    case Stream::Response: return log.responses[i].t_us;
    case Stream::Count: break;
  }
  return 0;
}

}  // namespace

std::string serialize_log(const TrialLog& log) {
  fmt::memory_buffer out;
  const json header{{"type", "header"},
                    {"format", kFormatName},
                    {"version", kLogFormatVersion},
                    {"config", log.config},
                    {"policy", log.policy},
                    {"operator", log.operator_params ? json(*log.operator_params) : json(nullptr)},
                    {"confusion", log.confusion},
                    {"codebook", log.codebook}};
  const std::string h = header.dump();
  out.append(h.data(), h.data() + h.size());
  out.push_back('\n');

  // Merge the streams by timestamp; ties resolve in Stream order.
  constexpr std::size_t kStreams = static_cast<std::size_t>(Stream::Count);
  const std::array<std::size_t, kStreams> sizes = {log.percepts.size(), log.poses.size(), log.cues.size(),
                                                   log.frames.size(), log.responses.size()};
  std::array<std::size_t, kStreams> next{};
  for (;;) {
    int pick = -1;
    Micros best = 0;
    for (std::size_t s = 0; s < kStreams; ++s) {
      if (next[s] >= sizes[s]) continue;
      const Micros t = stamp(log, static_cast<Stream>(s), next[s]);
      if (pick < 0 || t < best) {
        pick = static_cast<int>(s);
        best = t;
      }
    }
    if (pick < 0) break;
    put_record(out, log, static_cast<Stream>(pick), next[pick]++);
  }

  if (log.outcome) {
    json o = *log.outcome;
    o["type"] = "outcome";
    const std::string line = o.dump();
    out.append(line.data(), line.data() + line.size());
    out.push_back('\n');
  }
  return fmt::to_string(out);
}

namespace {

template <typename T>
T field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw LogError(std::string("record lacks '") + key + "'");
  return it->get<T>();
}

void apply_record(TrialLog& log, const json& j) {
  const std::string type = field<std::string>(j, "type");
  if (type == "outcome") {
    json o = j;
    o.erase("type");
    log.outcome = o.get<Outcome>();
    return;
  }
  const Micros t = field<Micros>(j, "t");
  if (type == "pose") {
    const auto p = field<std::array<double, 3>>(j, "tool");
    log.poses.push_back({t, Vec3(p[0], p[1], p[2])});
  } else if (type == "cue") {
    log.cues.push_back({t, cue_from_string(field<std::string>(j, "cue")),
                        cue_event_kind_from_string(field<std::string>(j, "kind"))});
  } else if (type == "frame") {
    FrameRecord f;
    f.frame.at_us = t;
    f.frame.seq = field<std::uint8_t>(j, "seq");
    f.frame.intensity = field<Intensities>(j, "intensity");
    f.delivered = field<bool>(j, "delivered");
    log.frames.push_back(f);
  } else if (type == "percept") {
    log.percepts.push_back({t, cue_from_string(field<std::string>(j, "cue")),
                            cue_event_kind_from_string(field<std::string>(j, "kind"))});
  } else if (type == "response") {
    ResponseRecord r;
    r.t_us = t;
    const json& id = j.at("identified");
    if (!id.is_null()) r.identified = cue_from_string(id.get<std::string>());
    r.rt_s = field<double>(j, "rt_s");
    log.responses.push_back(r);
  } else {
    throw LogError("unknown record type '" + type + "'");
  }
}

TrialLog header_to_log(const json& h) {
  if (field<std::string>(h, "type") != "header" || field<std::string>(h, "format") != kFormatName) {
    throw LogError("first line is not a trial log header");
  }
  const int version = field<int>(h, "version");
  if (version != kLogFormatVersion) {
    throw LogError(fmt::format("log format version {} is not supported (expected {})", version,
                               kLogFormatVersion));
  }
  TrialLog log;
  log.config = field<TrialConfig>(h, "config");
  log.policy = field<PolicyConfig>(h, "policy");
  if (const json& op = h.at("operator"); !op.is_null()) log.operator_params = op.get<OperatorParams>();
  log.confusion = field<ConfusionModel>(h, "confusion");
  log.codebook = codebook_from_json(h.at("codebook"), Codebook{});
  return log;
}

}  // namespace

LoadedLog parse_log(const std::string& text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string::npos ? text.size() : nl;
    lines.emplace_back(text.data() + pos, end - pos);
    pos = end + 1;
  }
  if (lines.empty()) throw LogError("empty log");

  LoadedLog out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const bool last = i + 1 == lines.size();
    try {
      const json j = json::parse(lines[i]);
      if (i == 0) {
        out.log = header_to_log(j);
      } else {
        apply_record(out.log, j);
      }
      out.last_valid_line = i + 1;
    } catch (const LogError&) {
      throw;
    } catch (const std::exception& e) {
      if (!last || i == 0) {
        throw LogError(fmt::format("line {}: {}", i + 1, e.what()));
      }
      ++out.warnings;
    }
  }
  return out;
}

void persist_log(const TrialLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LogError("cannot write " + path.string());
  const std::string text = serialize_log(log);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw LogError("write failed: " + path.string());
}

LoadedLog load_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LogError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_log(ss.str());
}

std::string log_file_name(const TrialConfig& cfg) {
  if (cfg.protocol == Protocol::CueIdentification) {
    return fmt::format("p{:02}_t{:03}_cue-id.jsonl", cfg.participant, cfg.trial_index);
  }
  return fmt::format("p{:02}_t{:03}_{}.jsonl", cfg.participant, cfg.trial_index, short_name(cfg.condition));
}

}  // namespace hapticguide
