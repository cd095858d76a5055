#pragma once

// Run configuration: a flat text file of [section] blocks holding key = value
// lines. Grammar and keys are listed in docs/config.md.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stoplab/data.hpp"
#include "stoplab/environments.hpp"
#include "stoplab/expert.hpp"
#include "stoplab/trainer.hpp"

namespace stoplab {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DataConfig {
  int train_paths = 175;
  int test_paths = 75;
  double val_frac = 0.30;
  std::uint64_t seed = 2024;
};

/// External data replacing the simulator. Both files use the same schema.
struct IngestConfig {
  std::filesystem::path train_csv;
  std::filesystem::path test_csv;
  IngestSchema schema;
  int downsample = 1;
  bool standardize = true;
};

struct HeatmapConfig {
  std::vector<int> times{25};
  int resolution = 81;
  double extent = 2.0;
  bool normalize = true;
};

struct RunConfig {
  EnvSpec env = EnvSpec::defaults(EnvKind::BmG);
  ExpertConfig expert;
  DataConfig data;
  std::optional<IngestConfig> ingest;
  std::vector<Algorithm> algorithms{Algorithm::Iqs};
  std::vector<std::uint64_t> seeds{0};
  TrainConfig train;
  HeatmapConfig heatmap;
  std::filesystem::path out_dir = "out";
  int jobs = 0;  // 0 = all available cores

  /// Throws ConfigError on an inconsistent setting.
  void validate() const;
};

RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::filesystem::path& file);

/// STOPLAB_OUT_DIR and STOPLAB_JOBS override out_dir and jobs.
void apply_env_overrides(RunConfig& cfg);

/// Writes a config that parse_config reads back to the same values.
void write_config(std::ostream& os, const RunConfig& cfg);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace stoplab
