#include "hapticguide/log_io.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
};

Result run(const std::string& args) {
  const fs::path capture = fs::temp_directory_path() / "hg_cli_stdout.txt";
  const std::string cmd = std::string(HG_CLI_PATH) + " " + args + " > " + capture.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  std::ifstream in(capture);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::size_t count_files(const fs::path& dir) {
  return static_cast<std::size_t>(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}));
}

struct Workspace {
  fs::path root = fs::temp_directory_path() / "hg_cli";
  Workspace() {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
  std::string operator/(const std::string& name) const { return (root / name).string(); }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("simulate guidance --participants 0").code == 2);
  CHECK(run("simulate guidance --condition sideways").code == 2);
  CHECK(run("replay").code == 2);
  CHECK(run("--help").code == 0);
}

TEST_CASE("configuration errors") {
  Workspace ws;
  CHECK(run("simulate cue-id --participants 1 --config " + (ws / "missing.json")).code == 3);
  std::ofstream(ws / "bad.json") << R"({"policy":{"axis_threshold_mm":-1}})";
  CHECK(run("simulate cue-id --participants 1 --config " + (ws / "bad.json")).code == 3);
  std::ofstream(ws / "typo.json") << R"({"polcy":{}})";
  CHECK(run("simulate cue-id --participants 1 --config " + (ws / "typo.json")).code == 3);
}

TEST_CASE("simulate, report and replay") {
  Workspace ws;
  const std::string out = ws / "guidance";
  const Result sim = run("simulate guidance --participants 2 --seed 5 --out " + out);
  REQUIRE(sim.code == 0);
  CHECK(sim.out.find("\"conditions\"") != std::string::npos);
  CHECK(count_files(fs::path(out) / "trials") == 2 * 54);
  CHECK(fs::exists(fs::path(out) / "run.json"));
  CHECK(fs::exists(fs::path(out) / "summary.json"));

  const Result report = run("report " + out + " --stats " + (ws / "stats.csv"));
  REQUIRE(report.code == 0);
  CHECK(count_lines(report.out) == 1 + 9);
  CHECK(report.out.rfind("figure,condition,metric,mean,sd,n\n", 0) == 0);
  std::ifstream stats(ws / "stats.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(stats, line)) ++rows;
  CHECK(rows == 1 + 2 * (1 + 3));

  const Result replay = run("replay " + out);
  CHECK(replay.code == 0);
  CHECK(replay.out.find("108 identical, 0 mismatched") != std::string::npos);

  SUBCASE("same seed collides") { CHECK(run("simulate guidance --participants 1 --seed 5 --out " + out).code == 4); }
  SUBCASE("other seed needs --overwrite") {
    CHECK(run("simulate guidance --participants 1 --seed 6 --out " + out).code == 8);
    CHECK(run("simulate guidance --participants 1 --seed 6 --overwrite --condition ar --out " + out).code == 0);
    CHECK(count_files(fs::path(out) / "trials") == 18);
  }
  SUBCASE("tampered log mismatches") {
    const fs::path victim = *fs::directory_iterator(fs::path(out) / "trials");
    hapticguide::LoadedLog l = hapticguide::load_log(victim);
    l.log.outcome->final_error_mm += 1.0;
    hapticguide::persist_log(l.log, victim);
    CHECK(run("replay " + victim.string()).code == 5);
    CHECK(run("replay " + out).code == 5);
  }
  SUBCASE("damaged log is rejected") {
    const fs::path victim = *fs::directory_iterator(fs::path(out) / "trials");
    std::ofstream(victim, std::ios::trunc) << "{\"broken\n{}\n";
    CHECK(run("replay " + victim.string()).code == 6);
    CHECK(run("report " + out).code == 6);
  }
}

TEST_CASE("cue identification run") {
  Workspace ws;
  const std::string out = ws / "cue";
  REQUIRE(run("simulate cue-id --participants 3 --seed 2 --out " + out).code == 0);
  CHECK(count_files(fs::path(out) / "trials") == 3 * 50);
  const Result report = run("report " + out);
  REQUIRE(report.code == 0);
  CHECK(count_lines(report.out) == 1 + 12);
  CHECK(run("replay " + out).code == 0);
}

TEST_CASE("device sink receives delivered frames") {
  Workspace ws;
  REQUIRE(run("simulate guidance --participants 1 --condition haptic --device-sink " + (ws / "band.bin")).code == 0);
  const auto size = fs::file_size(ws / "band.bin");
  CHECK(size > 0);
  CHECK(size % 9 == 0);
}

TEST_CASE("missing inputs are bad logs") {
  Workspace ws;
  CHECK(run("replay " + (ws / "nothing")).code == 6);
  CHECK(run("report " + ws.root.string()).code == 6);
}

}
