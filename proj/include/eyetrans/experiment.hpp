#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eyetrans/planted.hpp"
#include "eyetrans/trainer.hpp"
#include "json.hpp"

namespace eyetrans {

struct GridCell {
  double drop_rate = 0;
  double noise = 0;
  bool operator==(const GridCell&) const = default;
};

// "R0,N0;R1,N1;..."
std::vector<GridCell> parse_grid(const std::string& text);

enum class RunMode { eyetrans, baseline };
std::string_view mode_name(RunMode m);

struct ExperimentConfig {
  TaskKind task = TaskKind::functional;
  std::filesystem::path dataset;             // directory from `eyetrans dataset`
  std::optional<PlantedTaskConfig> planted;  // replaces `dataset` when set
  std::filesystem::path output = "runs";
  std::string tier = "original";  // rows outside the tier are dropped
  std::vector<std::uint64_t> seeds{0, 1, 42, 123, 12345};
  std::vector<RunMode> modes{RunMode::eyetrans};
  std::vector<GridCell> grid{{0, 0}};
  ApplyAt apply_at = ApplyAt::both;
  TrainConfig train;
  ModelConfig model;
  bool save_checkpoints = true;
  bool resume = true;  // continue from a run's checkpoint when one exists
  int threads = 1;
};

// Unknown keys raise ConfigError naming the key.
ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json experiment_to_json(const ExperimentConfig& c);

struct RunResult {
  RunMode mode = RunMode::eyetrans;
  GridCell cell;
  std::uint64_t seed = 0;
  std::vector<EpochLog> log;
  std::vector<std::pair<std::string, double>> final_metrics;
  std::filesystem::path checkpoint;
};

struct ExperimentResult {
  std::vector<RunResult> runs;  // mode-major, then cell, then seed
  nlohmann::json report;
};

std::filesystem::path run_checkpoint_path(const ExperimentConfig& c, RunMode mode, const GridCell& cell,
                                          std::uint64_t seed);

// Trains every (mode, cell, seed) combination and writes
//   <output>/<mode>/log.csv, <output>/<mode>/ckpt/*.eytr,
//   <output>/report.csv, <output>/report.json.
// Runs are spread over `threads` workers; files are written in a fixed
// order after all runs finish.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Per-seed rows, a mean row per (mode, cell), and an improvement_pct row
// per cell when both modes ran.
nlohmann::json build_report(const ExperimentConfig& cfg, const std::vector<RunResult>& runs);
std::string report_csv(const nlohmann::json& report);

// EYETRANS_THREADS, defaulting to 1.
int env_threads();

}  // namespace eyetrans
