// cavtraj: solve single-vehicle trajectories from presets or scenario files.
//
//   cavtraj solve case1 --out results --oracle
//   cavtraj solve my_scenario.json --gamma 1.5 --dt 0.05
//   cavtraj solve --batch scenarios/ --out results
//
// Exit codes: 0 solved, 1 infeasible / best-effort / solver failure,
// 2 input error, 3 I/O error. A batch returns the largest code of its runs.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "cavtraj/io.h"
#include "cavtraj/sim.h"

namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kInfeasible = 1, kInputError = 2, kIoError = 3 };

struct RunConfig {
  std::string input;
  std::string batch_dir;
  std::string out_dir = ".";
  double sample_dt = 0.01;
  bool oracle = false;
  int oracle_n = 2600;
  cavtraj::Calibration calibration;
};

int CodeFor(const absl::Status& st) {
  switch (st.code()) {
    case absl::StatusCode::kOk:
      return kOk;
    case absl::StatusCode::kInvalidArgument:
    case absl::StatusCode::kNotFound:
      return kInputError;
    case absl::StatusCode::kUnavailable:
      return kIoError;
    default:
      return kInfeasible;
  }
}

struct Loaded {
  std::string id;
  cavtraj::Scenario scenario;
};

absl::StatusOr<Loaded> Load(const std::string& input,
                            const cavtraj::Calibration& calibration) {
  const std::vector<std::string> ids = cavtraj::PresetIds();
  if (std::find(ids.begin(), ids.end(), input) != ids.end()) {
    absl::StatusOr<cavtraj::CasePreset> preset =
        cavtraj::MakePreset(input, calibration);
    if (!preset.ok()) return preset.status();
    return Loaded{preset->id, preset->scenario};
  }
  if (!fs::exists(input)) {
    std::string known;
    for (const std::string& id : ids) known += " " + id;
    return absl::NotFoundError("no such file, and not a preset id (known:" +
                               known + ")");
  }
  absl::StatusOr<cavtraj::Scenario> scenario = cavtraj::LoadScenario(input);
  if (!scenario.ok()) return scenario.status();
  cavtraj::Scenario s = *scenario;
  if (!calibration.empty()) s = cavtraj::ApplyCalibration(s, calibration);
  return Loaded{fs::path(input).stem().string(), s};
}

void Report(std::mutex& mu, const std::string& line) {
  std::lock_guard<std::mutex> lock(mu);
  std::fprintf(stderr, "%s\n", line.c_str());
}

int RunOne(const std::string& input, const RunConfig& cfg, std::mutex& mu) {
  absl::StatusOr<Loaded> loaded = Load(input, cfg.calibration);
  if (!loaded.ok()) {
    Report(mu, input + ": " + std::string(loaded.status().message()));
    return CodeFor(loaded.status());
  }
  cavtraj::RunOptions opts;
  opts.oracle = cfg.oracle;
  opts.oracle_n = cfg.oracle_n;
  cavtraj::CaseResult result =
      cavtraj::RunScenario(loaded->scenario, loaded->id, opts);

  const fs::path base = fs::path(cfg.out_dir) / loaded->id;
  if (result.outcome.trajectory) {
    absl::StatusOr<size_t> rows = cavtraj::ExportTrajectory(
        *result.outcome.trajectory, cfg.sample_dt, base.string() + ".csv");
    if (!rows.ok()) {
      Report(mu, loaded->id + ": " + std::string(rows.status().message()));
      return kIoError;
    }
  }
  absl::Status st =
      cavtraj::EmitSummary(result.summary, base.string() + ".summary.json");
  if (!st.ok()) {
    Report(mu, loaded->id + ": " + std::string(st.message()));
    return kIoError;
  }

  const absl::Status& solve = result.outcome.status;
  std::string line = loaded->id + ": ";
  if (solve.ok()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "cost %.6g, %zu arc(s)",
                  result.summary.total_cost, result.summary.arcs.size());
    line += buf;
  } else {
    line += std::string(solve.message());
  }
  Report(mu, line);
  return CodeFor(solve);
}

std::vector<std::string> BatchInputs(const std::string& dir) {
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      out.push_back(entry.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int Solve(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) {
    std::fprintf(stderr, "cannot create %s: %s\n", cfg.out_dir.c_str(),
                 ec.message().c_str());
    return kIoError;
  }
  std::mutex mu;
  if (cfg.batch_dir.empty()) return RunOne(cfg.input, cfg, mu);

  if (!fs::is_directory(cfg.batch_dir)) {
    std::fprintf(stderr, "%s is not a directory\n", cfg.batch_dir.c_str());
    return kInputError;
  }
  const std::vector<std::string> inputs = BatchInputs(cfg.batch_dir);
  std::atomic<size_t> next{0};
  std::atomic<int> worst{kOk};
  auto worker = [&] {
    for (size_t i = next++; i < inputs.size(); i = next++) {
      const int code = RunOne(inputs[i], cfg, mu);
      int prev = worst.load();
      while (code > prev && !worst.compare_exchange_weak(prev, code)) {
      }
    }
  };
  const size_t n_threads = std::clamp<size_t>(
      std::thread::hardware_concurrency(), 1, std::max<size_t>(1, inputs.size()));
  std::vector<std::thread> pool;
  for (size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  return worst.load();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-optimal vehicle trajectories under a rear-end safety constraint"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::optional<double> gamma, rho, xi, vmin, vmax;
  CLI::App* solve = app.add_subcommand("solve", "Solve a preset or scenario file");
  std::string presets;
  for (const std::string& id : cavtraj::PresetIds()) {
    presets += (presets.empty() ? "" : ", ") + id;
  }
  solve->add_option("input", cfg.input, "Preset id (" + presets + ") or JSON scenario file");
  solve->add_option("--batch", cfg.batch_dir, "Solve every *.json scenario in DIR");
  solve->add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
  solve->add_option("--dt", cfg.sample_dt, "CSV sample step [s]")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  solve->add_flag("--oracle", cfg.oracle, "Compare against the transcribed QP");
  solve->add_option("--oracle-n", cfg.oracle_n, "QP grid size")
      ->capture_default_str()
      ->check(CLI::Range(2, 1000000));
  solve->add_option("--gamma", gamma, "Standstill distance [m]");
  solve->add_option("--rho", rho, "Minimum time gap [s]");
  solve->add_option("--xi", xi, "Headway dynamics scale");
  solve->add_option("--vmin", vmin, "Minimum speed [m/s]");
  solve->add_option("--vmax", vmax, "Maximum speed [m/s]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }
  if (cfg.input.empty() == cfg.batch_dir.empty()) {
    std::fprintf(stderr, "solve: give either an input or --batch DIR\n");
    return kInputError;
  }
  cfg.calibration = {gamma, rho, xi, vmin, vmax};
  return Solve(cfg);
}
