#include "hapticguide/json_io.hpp"
#include "hapticguide/log_io.hpp"
#include "hapticguide/session.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace hapticguide;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string start_msg(const std::string& session, const json& extra = json::object()) {
  json m{{"type", "Control"}, {"session", session}, {"action", "start"}};
  m.update(extra);
  return m.dump();
}

std::string pose_msg(const std::string& session, Micros t, const Vec3& p) {
  return json{{"type", "PoseUpdate"}, {"session", session}, {"t_us", t}, {"tool", {p.x(), p.y(), p.z()}}}.dump();
}

std::string control(const std::string& session, const char* action, const json& extra = json::object()) {
  json m{{"type", "Control"}, {"session", session}, {"action", action}};
  m.update(extra);
  return m.dump();
}

std::size_t count(const std::vector<json>& out, const char* type) {
  return static_cast<std::size_t>(
      std::count_if(out.begin(), out.end(), [&](const json& m) { return m["type"] == type; }));
}

void append(std::vector<json>& all, const std::vector<json>& more) { all.insert(all.end(), more.begin(), more.end()); }

// target of the default start message: (10, 0, 350)
const Vec3 kTarget(10, 0, 350);

}  // namespace

TEST_SUITE("session") {

TEST_CASE("greeting and common fields") {
  Session s("s0001", StudySetup{});
  const auto hello = s.open();
  REQUIRE(hello.size() == 1);
  CHECK(hello[0]["type"] == "TrialState");
  CHECK(hello[0]["phase"] == "connected");
  CHECK(hello[0]["session"] == "s0001");
}

TEST_CASE("holding the target for 600 ms gives one Success") {
  Session s("a", StudySetup{});
  std::vector<json> all;
  append(all, s.handle(start_msg("a")));
  for (Micros t = 0; t <= 600000; t += kPosePeriodUs) append(all, s.handle(pose_msg("a", t, kTarget)));
  int successes = 0;
  for (const json& m : all) {
    if (m["type"] == "CueEventOut" && m["cue"] == "Success") {
      ++successes;
      CHECK(m["kind"] == "Burst");
    }
  }
  CHECK(successes == 1);
  // the burst frame lights all six motors at full intensity
  bool flash = false;
  for (const json& m : all)
    if (m["type"] == "FrameOut" && m["intensity"] == json::array({255, 255, 255, 255, 255, 255})) flash = true;
  CHECK(flash);
}

TEST_CASE("120 Hz poses for one second give 100 frames") {
  Session s("a", StudySetup{});
  std::vector<json> all;
  s.handle(start_msg("a"));
  for (Micros t = 0; t < 1000000; t += kPosePeriodUs) append(all, s.handle(pose_msg("a", t, Vec3(0, 0, 300))));
  const std::size_t frames = count(all, "FrameOut");
  CHECK(frames >= 99);
  CHECK(frames <= 101);
  Micros last = -kFramePeriodUs;
  int seq = -1;
  for (const json& m : all) {
    if (m["type"] != "FrameOut") continue;
    CHECK(m["t_us"].get<Micros>() - last == kFramePeriodUs);
    last = m["t_us"];
    if (seq >= 0) CHECK(m["seq"].get<int>() == (seq + 1) % 256);
    seq = m["seq"];
  }
}

TEST_CASE("timestamp regression is rejected and the session continues") {
  Session s("a", StudySetup{});
  s.handle(start_msg("a"));
  s.handle(pose_msg("a", 100000, kTarget));
  const auto r = s.handle(pose_msg("a", 50000, kTarget));
  REQUIRE(r.size() == 1);
  CHECK(r[0]["type"] == "Error");
  CHECK_FALSE(s.closed());
  CHECK(s.handle(pose_msg("a", 110000, kTarget)).size() >= 1);
  const auto done = s.handle(control("a", "finish"));
  CHECK(done.back()["phase"] == "completed");
  REQUIRE(s.last_log());
  CHECK(s.last_log()->poses.size() == 2);
}

TEST_CASE("messages outside a trial are rejected") {
  Session s("a", StudySetup{});
  CHECK(s.handle(pose_msg("a", 0, kTarget))[0]["type"] == "Error");
  CHECK(s.handle(control("a", "finish"))[0]["type"] == "Error");
  CHECK(s.handle(control("a", "abort"))[0]["type"] == "Error");
  CHECK_FALSE(s.closed());
}

TEST_CASE("malformed messages abort and persist the partial log") {
  TempDir dir("hg_session_malformed");
  const char* bad[] = {
      "not json",
      R"({"type":"PoseUpdate","session":"other","t_us":1,"tool":[0,0,0]})",
      R"({"type":"Teleport","session":"a"})",
      R"({"type":"Control","session":"a","action":"dance"})",
      R"({"type":"PoseUpdate","session":"a","t_us":20000})",
      R"({"type":"PoseUpdate","session":"a","t_us":20000,"tool":[0,"x",0]})",
      R"(["PoseUpdate"])",
  };
  for (const char* text : bad) {
    CAPTURE(text);
    Session s("a", StudySetup{}, dir.path);
    s.handle(start_msg("a"));
    s.handle(pose_msg("a", 0, Vec3(0, 0, 200)));
    s.handle(pose_msg("a", 10000, Vec3(0, 0, 210)));
    const auto out = s.handle(text);
    REQUIRE(!out.empty());
    CHECK(out.back()["phase"] == "aborted");
    CHECK(out.back().contains("diagnostic"));
    CHECK(s.closed());
    CHECK(s.handle(pose_msg("a", 30000, kTarget)).empty());
    REQUIRE(s.written_logs().size() == 1);
    const TrialLog saved = load_log(s.written_logs()[0]).log;
    CHECK(saved.outcome->status == OutcomeStatus::Aborted);
    CHECK(saved.poses.size() == 2);
    fs::remove(s.written_logs()[0]);
  }
}

TEST_CASE("disconnect aborts a running trial") {
  TempDir dir("hg_session_disconnect");
  Session s("a", StudySetup{}, dir.path);
  s.handle(start_msg("a"));
  s.handle(pose_msg("a", 0, Vec3(0, 0, 200)));
  s.disconnect();
  CHECK(s.closed());
  REQUIRE(s.written_logs().size() == 1);
  CHECK(load_log(s.written_logs()[0]).log.outcome->status == OutcomeStatus::Aborted);
}

TEST_CASE("interactive log replays to the same bytes and metrics") {
  TempDir dir("hg_session_replay");
  Session s("a", StudySetup{}, dir.path);
  s.handle(start_msg("a", {{"condition", "haptic"}, {"participant", 2}}));
  // a scripted approach: overshoot in depth, then settle 1 mm off
  std::vector<json> all;
  for (int i = 0; i <= 360; ++i) {
    const double u = std::min(1.0, i / 240.0);
    const Vec3 p = Vec3(0, 0, 200) + u * (kTarget + Vec3(1, 0, 4) - Vec3(0, 0, 200)) - (i > 240 ? Vec3(0, 0, 3) : Vec3::Zero());
    append(all, s.handle(pose_msg("a", i * kPosePeriodUs, p)));
  }
  append(all, s.handle(control("a", "finish")));
  const json& final_state = all.back();
  REQUIRE(final_state["phase"] == "completed");
  REQUIRE(s.written_logs().size() == 1);

  const std::string bytes = [&] {
    std::ifstream in(s.written_logs()[0]);
    return std::string(std::istreambuf_iterator<char>(in), {});
  }();
  const TrialLog loaded = parse_log(bytes).log;
  CHECK(serialize_log(replay_interactive(loaded)) == bytes);
  CHECK(serialize_log(rerun_trial(loaded)) == bytes);
  CHECK(live_metrics(loaded) == final_state["metrics"]);
  CHECK(loaded.outcome->overshoot);
  CHECK(loaded.outcome->final_error_mm == doctest::Approx(std::sqrt(1.0 + 1.0)));
  CHECK_FALSE(loaded.operator_params.has_value());
}

TEST_CASE("timeout finishes an interactive trial") {
  StudySetup setup;
  setup.timeout_ms = 100;
  Session s("a", setup);
  s.handle(start_msg("a"));
  std::vector<json> all;
  for (Micros t = 0; t <= 120000 && !all.size(); t += kPosePeriodUs) {
    auto out = s.handle(pose_msg("a", t, Vec3(0, 0, 200)));
    for (const json& m : out)
      if (m["type"] == "TrialState" && m["phase"] == "completed") all.push_back(m);
  }
  REQUIRE(all.size() == 1);
  CHECK(all[0]["metrics"]["outcome"]["status"] == "TimedOut");
}

TEST_CASE("interactive cue identification") {
  Session s("a", StudySetup{});
  const auto played = s.handle(start_msg("a", {{"protocol", "cue-id"}, {"presented_cue", "Up"}}));
  CHECK(count(played, "FrameOut") == 200);
  CHECK(count(played, "CueEventOut") == 2);
  const auto done = s.handle(control("a", "respond", {{"cue", "Up"}, {"t_us", 3100000}}));
  CHECK(done.back()["phase"] == "completed");
  CHECK(s.last_log()->outcome->correct);
  CHECK(s.last_log()->outcome->rt_s == doctest::Approx(1.1));

  s.handle(start_msg("a", {{"protocol", "cue-id"}, {"presented_cue", "Down"}}));
  s.handle(control("a", "respond", {{"cue", "Down"}, {"t_us", 4500000}}));
  CHECK_FALSE(s.last_log()->outcome->identified.has_value());
  CHECK_FALSE(s.last_log()->outcome->correct);
  // the replayed cue window matches what was played
  CHECK(serialize_log(replay_interactive(*s.last_log())) == serialize_log(*s.last_log()));

  Session t("b", StudySetup{});
  const auto bad = t.handle(start_msg("b", {{"protocol", "cue-id"}, {"presented_cue", "Forward"}}));
  CHECK(bad.back()["phase"] == "aborted");
}

TEST_CASE("simulated mode streams the operator's trial") {
  Session s("a", StudySetup{});
  const auto out = s.handle(start_msg("a", {{"mode", "simulated"}, {"condition", "multi"}, {"seed", 9}}));
  CHECK(out.front()["phase"] == "running");
  CHECK(out.back()["phase"] == "completed");
  CHECK(count(out, "PoseUpdate") == s.last_log()->poses.size());
  CHECK(count(out, "FrameOut") == s.last_log()->frames.size());
  CHECK(s.descriptor().operator_params.has_value());
  TrialConfig cfg = s.last_log()->config;
  CHECK(serialize_log(run_guidance_trial(cfg, StudySetup{})) == serialize_log(*s.last_log()));

  Session ar("b", StudySetup{});
  const auto silent = ar.handle(start_msg("b", {{"mode", "simulated"}, {"condition", "ar"}}));
  CHECK(count(silent, "FrameOut") == 0);

  Session i("c", StudySetup{});
  i.handle(start_msg("c"));
  CHECK_FALSE(i.descriptor().operator_params.has_value());
}

TEST_CASE("device sink receives encoded frames") {
  TempDir dir("hg_session_sink");
  auto sink = std::make_shared<DeviceSink>(dir.path / "band.bin");
  Session s("a", StudySetup{}, std::nullopt, sink);
  s.handle(start_msg("a"));
  for (Micros t = 0; t < 100000; t += kPosePeriodUs) s.handle(pose_msg("a", t, Vec3(0, 0, 200)));
  CHECK(sink->frames_written() == 10);
  CHECK(fs::file_size(dir.path / "band.bin") == 90);
  std::ifstream in(dir.path / "band.bin", std::ios::binary);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
  for (std::size_t i = 0; i < 10; ++i) {
    const auto d = decode_frame(std::span(bytes).subspan(i * 9, 9));
    REQUIRE(std::holds_alternative<MotorFrame>(d));
    CHECK(std::get<MotorFrame>(d).seq == i);
  }
}

}
