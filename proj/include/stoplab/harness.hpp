#pragma once

// Subcommands of the stoplab CLI. Each returns a process exit code:
// 0 success, 1 run failure(s), 2 usage or configuration error.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stoplab/config.hpp"
#include "stoplab/evaluation.hpp"
#include "stoplab/trainer.hpp"

namespace stoplab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRunFailure = 1;
inline constexpr int kExitUsage = 2;

/// Everything a training run reads, built once and shared read-only.
struct Dataset {
  LabeledPaths train_paths;  // train + validation paths
  LabeledPaths test_paths;
  FeatureMap features;
  std::vector<std::size_t> val_index;  // into train_paths, sorted
  TrajectorySet train;
  std::vector<EvalPath> val_eval;
  std::vector<EvalPath> test_eval;
};

/// Simulates and labels (or ingests) the data described by cfg.
Dataset make_dataset(const RunConfig& cfg);
/// Rebuilds a Dataset from labelled path sets and the configured split.
Dataset assemble_dataset(const RunConfig& cfg, LabeledPaths train_paths, LabeledPaths test_paths);
/// Reads the files written by cmd_gen_data.
Dataset load_dataset(const RunConfig& cfg);

struct RunOutcome {
  Algorithm algorithm = Algorithm::Iqs;
  std::uint64_t seed = 0;
  bool ok = false;
  bool skipped = false;
  std::string error;
  TrainResult result;
  double seconds = 0.0;
};

TrainConfig run_train_config(const RunConfig& cfg, Algorithm algo, std::uint64_t seed);
std::filesystem::path run_dir(const RunConfig& cfg, Algorithm algo, std::uint64_t seed);

/// Trains one (algorithm, seed) pair; never throws.
RunOutcome run_one(const RunConfig& cfg, const Dataset& data, Algorithm algo, std::uint64_t seed);

/// Writes checkpoint.bin (on success), curves.csv and status.txt of a run.
void write_run_artifacts(const RunConfig& cfg, const RunOutcome& run);

struct MetricsRow {
  std::string algorithm;
  std::string env;
  std::uint64_t seed = 0;
  double balanced_accuracy = 0.0;
  std::optional<double> m_tte;
  std::optional<double> m_emr;
  int best_epoch = -1;
  Confusion counts;
};

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows);
/// Mean +- two sample standard deviations per (algorithm, env), one row per
/// algorithm and one column per env, in first-seen order.
void write_table(std::ostream& os, const std::vector<MetricsRow>& rows);

int cmd_gen_data(const RunConfig& cfg, std::ostream& log);
int cmd_train(const RunConfig& cfg, bool resume, std::ostream& log);
int cmd_evaluate(const RunConfig& cfg, std::ostream& log);
int cmd_export_heatmaps(const RunConfig& cfg, std::ostream& log);
/// gen-data (when its manifest is absent), train, evaluate.
int cmd_sweep(const RunConfig& cfg, bool resume, std::ostream& log);

}  // namespace stoplab
