#include "hapticguide/log_io.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hapticguide;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

TrialLog sample_guidance() {
  TrialConfig cfg;
  cfg.condition = Condition::HapticOnly;
  cfg.participant = 3;
  cfg.trial_index = 17;
  cfg.seed = 42;
  return run_guidance_trial(cfg, StudySetup{});
}

}  // namespace

TEST_SUITE("log_io") {

TEST_CASE("serialize then parse is the identity") {
  const TrialLog g = sample_guidance();
  const LoadedLog back = parse_log(serialize_log(g));
  CHECK(back.warnings == 0);
  CHECK(back.log == g);
  const TrialLog c = run_cue_id_session(2, 5, StudySetup{})[7];
  CHECK(parse_log(serialize_log(c)).log == c);
}

TEST_CASE("doubles keep their exact values") {
  TrialLog l;
  l.config.depth_mm = 0.1 + 0.2;
  l.codebook = default_codebook(l.policy);
  l.poses = {{0, Vec3(-0.0, 1e-300, 12345678.901234567)}, {1, Vec3(3, 4, 5)}};
  l.outcome = Outcome{};
  const TrialLog back = parse_log(serialize_log(l)).log;
  CHECK(back == l);
  CHECK(std::signbit(back.poses[0].tool.x()));
}

TEST_CASE("records are ordered by timestamp") {
  const std::string text = serialize_log(sample_guidance());
  const auto lines = lines_of(text);
  REQUIRE(lines.size() > 3);
  CHECK(nlohmann::json::parse(lines.front())["type"] == "header");
  CHECK(nlohmann::json::parse(lines.back())["type"] == "outcome");
  std::int64_t last = -1;
  for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
    const auto j = nlohmann::json::parse(lines[i]);
    const std::int64_t t = j["t"];
    CHECK(t >= last);
    last = t;
  }
}

TEST_CASE("a truncated last line is skipped with a warning") {
  const TrialLog g = sample_guidance();
  const std::string text = serialize_log(g);
  const auto lines = lines_of(text);
  // cut in the middle of the outcome line
  const std::string cut = text.substr(0, text.size() - lines.back().size() / 2 - 1);
  const LoadedLog loaded = parse_log(cut);
  CHECK(loaded.warnings == 1);
  CHECK(loaded.last_valid_line == lines.size() - 1);
  CHECK_FALSE(loaded.log.outcome.has_value());
  CHECK(loaded.log.poses == g.poses);
}

TEST_CASE("damage before the last line or a version change is an error") {
  const std::string text = serialize_log(sample_guidance());
  auto lines = lines_of(text);
  auto join = [](const std::vector<std::string>& ls) {
    std::string s;
    for (const auto& l : ls) s += l + "\n";
    return s;
  };
  auto broken = lines;
  broken[3] = "{\"t\": 5, \"type\"";
  CHECK_THROWS_AS(parse_log(join(broken)), LogError);

  auto header = nlohmann::json::parse(lines[0]);
  header["version"] = kLogFormatVersion + 1;
  auto versioned = lines;
  versioned[0] = header.dump();
  CHECK_THROWS_AS(parse_log(join(versioned)), LogError);

  CHECK_THROWS_AS(parse_log(""), LogError);
  CHECK_THROWS_AS(parse_log("{\"type\":\"pose\",\"t\":0}\n"), LogError);
}

TEST_CASE("persist and load") {
  const auto dir = std::filesystem::temp_directory_path() / "hg_log_io_test";
  std::filesystem::create_directories(dir);
  const TrialLog g = sample_guidance();
  const auto path = dir / log_file_name(g.config);
  CHECK(path.filename() == "p03_t017_haptic.jsonl");
  persist_log(g, path);
  CHECK(load_log(path).log == g);
  CHECK_THROWS_AS(load_log(dir / "nope.jsonl"), LogError);
  std::filesystem::remove_all(dir);

  TrialConfig c;
  c.protocol = Protocol::CueIdentification;
  CHECK(log_file_name(c) == "p00_t000_cue-id.jsonl");
}

TEST_CASE("shipped fixture logs replay byte for byte") {
  std::size_t n = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(HG_FIXTURE_DIR)) {
    if (e.path().extension() != ".jsonl") continue;
    CAPTURE(e.path().string());
    std::ifstream in(e.path(), std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const TrialLog log = parse_log(bytes).log;
    CHECK(serialize_log(rerun_trial(log)) == bytes);
    ++n;
  }
  CHECK(n >= 5);
}

}
