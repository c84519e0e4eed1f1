#include "hapticguide/calibration.hpp"
#include "hapticguide/json_io.hpp"
#include "hapticguide/log_io.hpp"
#include "hapticguide/session.hpp"
#include "hapticguide/stats.hpp"
#include "hapticguide/study.hpp"
#include "hapticguide/ws_server.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <thread>

namespace fs = std::filesystem;
using namespace hapticguide;

namespace {

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kSeedCollision = 4,
  kReplayMismatch = 5,
  kBadLog = 6,
  kService = 7,
  kOutputInUse = 8,
};

struct ExitError : std::runtime_error {
  ExitError(int c, const std::string& what) : std::runtime_error(what), code(c) {}
  int code;
};

RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return RunConfig{};
  try {
    return load_run_config(path);
  } catch (const ConfigError& e) {
    throw ExitError(kConfig, e.what());
  }
}

std::vector<fs::path> find_logs(const fs::path& root) {
  std::vector<fs::path> out;
  if (fs::is_regular_file(root)) return {root};
  if (!fs::is_directory(root)) throw ExitError(kBadLog, "no such file or directory: " + root.string());
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ExitError(kInternal, "cannot write " + path.string());
  out << text;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::size_t participants = 0;
  std::uint64_t seed = 1;
  std::string out;
  std::string config;
  std::string device_sink;
  std::vector<std::string> conditions;
  bool overwrite = false;
};

// Refuses to mix two runs in one directory; the manifest records the seed.
void check_output(const SimulateArgs& a) {
  if (a.out.empty()) return;
  const fs::path dir(a.out);
  const fs::path manifest_path = dir / "run.json";
  if (fs::exists(manifest_path) && !a.overwrite) {
    std::ifstream in(manifest_path);
    json previous;
    try {
      previous = json::parse(in);
    } catch (const std::exception&) {
      throw ExitError(kOutputInUse, "unreadable run manifest in " + dir.string());
    }
    if (previous.value("seed", std::uint64_t{0}) == a.seed) {
      throw ExitError(kSeedCollision,
                      fmt::format("seed collision: {} already holds a run with seed {}", dir.string(), a.seed));
    }
    throw ExitError(kOutputInUse, fmt::format("{} already holds a run with seed {}; use --overwrite",
                                              dir.string(), previous.value("seed", std::uint64_t{0})));
  }
}

void prepare_output(const SimulateArgs& a, const json& manifest) {
  const fs::path dir(a.out);
  const fs::path manifest_path = dir / "run.json";
  check_output(a);
  if (a.overwrite) fs::remove_all(dir / "trials");
  fs::create_directories(dir / "trials");
  write_text(manifest_path, manifest.dump(2) + "\n");
}

int finish_simulation(const SimulateArgs& a, const json& manifest, const std::vector<TrialLog>& logs) {
  std::shared_ptr<DeviceSink> sink;
  if (!a.device_sink.empty()) sink = std::make_shared<DeviceSink>(a.device_sink);
  if (sink) {
    for (const TrialLog& l : logs) {
      for (const FrameRecord& f : l.frames) {
        if (f.delivered) sink->write(f.frame);
      }
    }
  }
  const StudySummary summary = compute_metrics(logs);
  const json summary_json = summary;
  if (!a.out.empty()) {
    prepare_output(a, manifest);
    for (const TrialLog& l : logs) persist_log(l, fs::path(a.out) / "trials" / log_file_name(l.config));
    write_text(fs::path(a.out) / "summary.json", summary_json.dump(2) + "\n");
  }
  fmt::print("{}\n", summary_json.dump(2));
  fmt::print(stderr, "{} trials from {} participants\n", logs.size(), summary.participants);
  return kOk;
}

int simulate_cue_id(const SimulateArgs& a) {
  const RunConfig rc = load_config_or_default(a.config);
  check_output(a);
  std::vector<TrialLog> logs;
  for (std::uint32_t p = 0; p < a.participants; ++p) {
    auto session = run_cue_id_session(p, a.seed, rc.setup);
    logs.insert(logs.end(), std::make_move_iterator(session.begin()), std::make_move_iterator(session.end()));
  }
  const json manifest{{"protocol", "cue-id"}, {"participants", a.participants}, {"seed", a.seed},
                      {"config", rc.to_json()}};
  return finish_simulation(a, manifest, logs);
}

int simulate_guidance(const SimulateArgs& a) {
  const RunConfig rc = load_config_or_default(a.config);
  std::vector<Condition> conditions;
  for (const std::string& c : a.conditions) {
    if (c == "all") {
      conditions.assign(kAllConditions.begin(), kAllConditions.end());
      continue;
    }
    const Condition cond = condition_from_string(c);
    if (std::find(conditions.begin(), conditions.end(), cond) == conditions.end()) conditions.push_back(cond);
  }
  if (conditions.empty()) conditions.assign(kAllConditions.begin(), kAllConditions.end());
  check_output(a);
  std::vector<TrialLog> logs;
  for (std::uint32_t p = 0; p < a.participants; ++p) {
    auto session = run_guidance_session(p, a.seed, rc.setup, conditions);
    logs.insert(logs.end(), std::make_move_iterator(session.begin()), std::make_move_iterator(session.end()));
  }
  json names = json::array();
  for (Condition c : kAllConditions) {
    if (std::find(conditions.begin(), conditions.end(), c) != conditions.end()) names.push_back(short_name(c));
  }
  const json manifest{{"protocol", "guidance"}, {"participants", a.participants}, {"seed", a.seed},
                      {"conditions", names}, {"config", rc.to_json()}};
  return finish_simulation(a, manifest, logs);
}

// ---- replay ---------------------------------------------------------------

int replay(const std::string& target) {
  std::size_t identical = 0, mismatched = 0;
  for (const fs::path& path : find_logs(target)) {
    LoadedLog loaded;
    try {
      loaded = load_log(path);
    } catch (const std::exception& e) {
      throw ExitError(kBadLog, path.string() + ": " + e.what());
    }
    std::ifstream in(path, std::ios::binary);
    const std::string original((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string again = serialize_log(rerun_trial(loaded.log));
    if (loaded.warnings) fmt::print(stderr, "{}: {} truncated line(s) skipped\n", path.string(), loaded.warnings);
    if (again == original) {
      ++identical;
    } else {
      ++mismatched;
      fmt::print(stderr, "MISMATCH {}\n", path.string());
    }
  }
  fmt::print("replayed {} log(s): {} identical, {} mismatched\n", identical + mismatched, identical, mismatched);
  if (identical + mismatched == 0) throw ExitError(kBadLog, "no logs found under " + target);
  return mismatched ? kReplayMismatch : kOk;
}

// ---- report ---------------------------------------------------------------

std::vector<TrialLog> load_all(const std::string& dir, std::size_t& warnings) {
  std::vector<TrialLog> logs;
  for (const fs::path& path : find_logs(dir)) {
    try {
      LoadedLog l = load_log(path);
      warnings += l.warnings;
      logs.push_back(std::move(l.log));
    } catch (const std::exception& e) {
      throw ExitError(kBadLog, path.string() + ": " + e.what());
    }
  }
  if (logs.empty()) throw ExitError(kBadLog, "no logs found under " + dir);
  return logs;
}

std::string csv_number(double v) { return fmt::format("{:.6g}", v); }

std::string guidance_csv(std::span<const TrialLog> logs) {
  const StudySummary s = compute_metrics(logs);
  std::string out = "figure,condition,metric,mean,sd,n\n";
  for (Condition c : kAllConditions) {
    const auto& m = s.conditions[index_of(c)];
    if (!m) continue;
    const std::string name(to_string(c));
    out += fmt::format("error,{},error_mm,{},{},{}\n", name, csv_number(m->error_mean_mm),
                       csv_number(m->error_sd_mm), m->trials);
    out += fmt::format("time,{},time_s,{},{},{}\n", name, csv_number(m->time_mean_s), csv_number(m->time_sd_s),
                       m->trials);
    out += fmt::format("overshoot,{},overshoot_rate,{},,{}\n", name, csv_number(m->overshoot_rate), m->trials);
  }
  return out;
}

std::string guidance_stats_csv(std::span<const TrialLog> logs) {
  std::string out = "test,metric,first,second,statistic,df1,df2,p\n";
  for (auto [metric, name] : {std::pair{GuidanceMetric::Error, "error_mm"}, std::pair{GuidanceMetric::Time, "time_s"}}) {
    Eigen::MatrixXd m;
    try {
      m = participant_matrix(logs, metric);
    } catch (const std::invalid_argument&) {
      return out;
    }
    if (m.rows() < 2 || m.cols() < 2) return out;
    std::vector<std::string> names;
    for (Condition c : kAllConditions) {
      for (const TrialLog& l : logs) {
        if (l.config.condition == c) {
          names.emplace_back(to_string(c));
          break;
        }
      }
    }
    const AnovaResult a = rm_anova(m);
    out += fmt::format("rm_anova,{},,,{},{},{},{}\n", name, a.infinite_f ? "inf" : csv_number(a.f),
                       csv_number(a.df_condition), csv_number(a.df_error), csv_number(a.p));
    for (const PairedComparison& c : paired_comparisons(m, Correction::Bonferroni)) {
      out += fmt::format("paired_t_bonferroni,{},{},{},{},{},,{}\n", name, names[c.first], names[c.second],
                         csv_number(c.t), csv_number(c.df), csv_number(c.p));
    }
  }
  return out;
}

std::string cue_id_csv(std::span<const TrialLog> logs) {
  // Per-participant accuracy and mean RT, then mean and SD across participants.
  std::map<std::uint32_t, std::array<std::vector<double>, 6>> acc, rt;  // index 5 = all cues
  for (const TrialLog& l : logs) {
    if (!l.outcome || l.outcome->status == OutcomeStatus::Aborted) continue;
    const std::size_t i = *identification_index(l.config.presented_cue);
    const double hit = l.outcome->correct ? 1.0 : 0.0;
    acc[l.config.participant][i].push_back(hit);
    acc[l.config.participant][5].push_back(hit);
    if (l.outcome->identified) {
      rt[l.config.participant][i].push_back(l.outcome->rt_s);
      rt[l.config.participant][5].push_back(l.outcome->rt_s);
    }
  }
  std::string out = "figure,cue,metric,mean,sd,n\n";
  for (std::size_t i = 0; i < 6; ++i) {
    const std::string cue = i < 5 ? std::string(to_string(kIdentificationCues[i])) : "All";
    std::vector<double> a, r;
    for (const auto& [p, cells] : acc) {
      if (!cells[i].empty()) a.push_back(stable_mean(cells[i]));
    }
    for (const auto& [p, cells] : rt) {
      if (!cells[i].empty()) r.push_back(stable_mean(cells[i]));
    }
    out += fmt::format("accuracy,{},accuracy,{},{},{}\n", cue, csv_number(stable_mean(a)), csv_number(sample_sd(a)),
                       a.size());
    out += fmt::format("response_time,{},rt_s,{},{},{}\n", cue, csv_number(stable_mean(r)), csv_number(sample_sd(r)),
                       r.size());
  }
  return out;
}

int report(const std::string& dir, const std::string& out_path, const std::string& stats_path) {
  std::size_t warnings = 0;
  const std::vector<TrialLog> logs = load_all(dir, warnings);
  if (warnings) fmt::print(stderr, "{} truncated line(s) skipped\n", warnings);
  const Protocol protocol = logs.front().config.protocol;
  for (const TrialLog& l : logs) {
    if (l.config.protocol != protocol) throw ExitError(kBadLog, "mixed protocols under " + dir);
  }
  const std::string csv = protocol == Protocol::Guidance ? guidance_csv(logs) : cue_id_csv(logs);
  if (out_path.empty()) {
    fmt::print("{}", csv);
  } else {
    write_text(out_path, csv);
  }
  if (!stats_path.empty() && protocol == Protocol::Guidance) write_text(stats_path, guidance_stats_csv(logs));
  return kOk;
}

// ---- calibrate ------------------------------------------------------------

int calibrate_cmd(std::size_t participants, std::uint64_t seed, int sweeps, const std::string& config,
                  const std::string& out_path) {
  const RunConfig rc = load_config_or_default(config);
  Study2Targets targets;
  targets.participants = participants;
  const CalibrationResult r =
      calibrate(targets, default_search_space(rc.setup.operator_params), seed, rc.setup, sweeps);
  for (const TargetCheck& c : check_targets(r.summary, targets)) {
    fmt::print(stderr, "{:<28} sim {:8.3f}  target {:8.3f}  +/- {:5.2f}  {}\n", c.name, c.simulated, c.target,
               c.tolerance, c.ok() ? "ok" : "off");
  }
  fmt::print(stderr, "residual {:.4f} after {} evaluations\n", r.residual, r.evaluations);
  const json params = r.params;
  if (!out_path.empty()) write_text(out_path, json{{"operator", params}}.dump(2) + "\n");
  fmt::print("{}\n", params.dump(2));
  return kOk;
}

// ---- serve ----------------------------------------------------------------

int serve(std::uint16_t port, const std::string& config, const std::string& log_dir, const std::string& sink) {
  ServiceOptions options;
  options.setup = load_config_or_default(config).setup;
  if (!log_dir.empty()) options.log_dir = fs::path(log_dir);
  if (!sink.empty()) options.device_sink = std::make_shared<DeviceSink>(sink);

  // Handle SIGINT/SIGTERM on a dedicated thread so stop() runs outside a signal handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  SessionServer server(options);
  std::uint16_t bound = 0;
  try {
    bound = server.listen(port);
  } catch (const std::runtime_error& e) {
    throw ExitError(kService, e.what());
  }
  fmt::print("listening on ws://127.0.0.1:{}\n", bound);
  std::fflush(stdout);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.run();
  if (waiter.joinable()) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wrist haptic guidance engine and simulated study platform"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "Run a simulated study");
  simulate->require_subcommand(1);
  SimulateArgs sim;
  auto add_common = [&](CLI::App* cmd, std::size_t default_participants) {
    sim.participants = default_participants;
    cmd->add_option("--participants", sim.participants, "Number of simulated participants")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", sim.seed, "Master seed");
    cmd->add_option("--out", sim.out, "Output directory for trial logs and summary");
    cmd->add_option("--config", sim.config, "JSON configuration file");
    cmd->add_option("--device-sink", sim.device_sink, "Append encoded device frames to this file");
    cmd->add_flag("--overwrite", sim.overwrite, "Replace a previous run in the output directory");
  };
  auto* cue_id = simulate->add_subcommand("cue-id", "Cue identification protocol");
  add_common(cue_id, 21);
  auto* guidance = simulate->add_subcommand("guidance", "Tool guidance protocol");
  add_common(guidance, 27);
  guidance->add_option("--condition", sim.conditions, "ar, haptic, multi or all (repeatable)")
      ->check(CLI::IsMember({"ar", "haptic", "multi", "all", "AROnly", "HapticOnly", "Multimodal"}));
  // The guidance default must win when both subcommands registered one.
  guidance->preparse_callback([&](std::size_t) { sim.participants = 27; });
  cue_id->preparse_callback([&](std::size_t) { sim.participants = 21; });

  auto* replay_cmd = app.add_subcommand("replay", "Re-execute logs and verify byte identity");
  std::string replay_target;
  replay_cmd->add_option("log", replay_target, "Log file or directory")->required();

  auto* report_cmd = app.add_subcommand("report", "Summary tables as CSV");
  std::string report_dir, report_out, report_stats;
  report_cmd->add_option("dir", report_dir, "Directory of trial logs")->required();
  report_cmd->add_option("--out", report_out, "CSV file (default stdout)");
  report_cmd->add_option("--stats", report_stats, "Also write ANOVA and paired tests to this CSV");

  auto* calibrate_sub = app.add_subcommand("calibrate", "Fit operator parameters to the guidance targets");
  std::size_t cal_participants = 27;
  std::uint64_t cal_seed = 1;
  int cal_sweeps = 2;
  std::string cal_config, cal_out;
  calibrate_sub->add_option("--participants", cal_participants)->check(CLI::PositiveNumber);
  calibrate_sub->add_option("--seed", cal_seed);
  calibrate_sub->add_option("--sweeps", cal_sweeps)->check(CLI::PositiveNumber);
  calibrate_sub->add_option("--config", cal_config, "Starting configuration");
  calibrate_sub->add_option("--out", cal_out, "Write fitted parameters as a config fragment");

  auto* serve_cmd = app.add_subcommand("serve", "WebSocket session service");
  std::uint16_t port = 8765;
  std::string serve_config, serve_logs, serve_sink;
  serve_cmd->add_option("--port", port);
  serve_cmd->add_option("--config", serve_config);
  serve_cmd->add_option("--log-dir", serve_logs, "Persist session logs under this directory");
  serve_cmd->add_option("--device-sink", serve_sink, "Append encoded device frames to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*cue_id) return simulate_cue_id(sim);
    if (*guidance) return simulate_guidance(sim);
    if (*replay_cmd) return replay(replay_target);
    if (*report_cmd) return report(report_dir, report_out, report_stats);
    if (*calibrate_sub) return calibrate_cmd(cal_participants, cal_seed, cal_sweeps, cal_config, cal_out);
    if (*serve_cmd) return serve(port, serve_config, serve_logs, serve_sink);
  } catch (const ExitError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return e.code;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kInternal;
  }
  return kUsage;
}
