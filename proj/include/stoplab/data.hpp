#pragma once

// Expert transition records, path stacking, splitting, CSV ingestion and
// history-aware batch sampling.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "stoplab/environments.hpp"
#include "stoplab/expert.hpp"
#include "stoplab/smdp.hpp"

namespace stoplab {

struct TransitionRecord {
  StatePoint s;
  Action a = Action::Continue;
  StatePoint s_next;
  int path_id = 0;
  int time_index = 0;
  double confidence = 1.0;
  bool synthetic = false;
};

enum class SplitTag { Train, Val, Test };

/// Stacked records of many paths. Path p owns records [offsets[p], offsets[p+1]).
struct TrajectorySet {
  std::vector<TransitionRecord> records;
  std::vector<std::size_t> offsets{0};
  std::vector<int> path_ids;
  SplitTag tag = SplitTag::Train;

  std::size_t n_paths() const { return path_ids.size(); }
  std::size_t size() const { return records.size(); }
  std::size_t feature_dim() const { return records.empty() ? 0 : records.front().s.dim(); }
  /// Index of the path that owns record i.
  std::size_t path_of(std::size_t record) const;
  std::size_t count_action(Action a) const;
};

/// Maps a raw state at time t to the learner's feature vector (optionally with
/// t / horizon appended).
struct FeatureMap {
  bool include_time = false;
  int horizon = 1;

  std::vector<double> operator()(const StatePoint& s, int t) const;
  std::size_t dim(std::size_t state_dim) const { return state_dim + (include_time ? 1 : 0); }
};

/// Stacks labelled paths into (s, a, s') records; stop records point at the
/// zero cemetery, continue records at the path's next state. path_id of path i
/// is first_path_id + i.
TrajectorySet preprocess(const std::vector<RawPath>& paths, const std::vector<ExpertLabeling>& labels,
                         const FeatureMap& features, int first_path_id = 0);

struct SplitResult {
  TrajectorySet train;
  TrajectorySet val;
};

/// Path-atomic seeded split; the validation set gets nearbyint(val_frac * paths)
/// paths.
SplitResult split(const TrajectorySet& ts, double val_frac, std::uint64_t seed);

/// Same split at the level of raw paths, returning the chosen validation
/// indices (sorted).
std::vector<std::size_t> split_indices(std::size_t n_paths, double val_frac, std::uint64_t seed);

/// Prefix s_0..s_{t+1} of the path that owns `record` (the last entry is the
/// record's successor, the cemetery for a stop record).
std::vector<StatePoint> history(const TrajectorySet& ts, std::size_t record);

struct Batch {
  std::vector<std::size_t> indices;
  std::vector<std::vector<StatePoint>> histories;  // empty unless requested
};

/// Epoch-wise sampler: every epoch is a fresh seeded permutation cut into
/// ceil(n / B) batches, so records are drawn without replacement.
class BatchSampler {
 public:
  BatchSampler(std::size_t n_records, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::vector<std::size_t>> epoch();
  std::size_t batches_per_epoch() const;

 private:
  std::size_t n_;
  std::size_t batch_;
  std::mt19937_64 rng_;
};

/// One uniformly sampled batch of B distinct records.
Batch sample_batch(const TrajectorySet& ts, std::size_t batch_size, bool need_history, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Labelled-trajectory CSV (path_id, t, s_0.., a, event_time). States after the
// stop are written with an empty action cell.

struct LabeledPaths {
  std::vector<RawPath> paths;
  std::vector<ExpertLabeling> labels;
  std::vector<int> path_ids;
};

void write_labeled_csv(std::ostream& os, const LabeledPaths& lp);
LabeledPaths read_labeled_csv(std::istream& is);

/// Audit dump of records (path_id, t, s_*, a, s_next_*, confidence, synthetic).
void write_records_csv(std::ostream& os, const TrajectorySet& ts);

// ---------------------------------------------------------------------------
// External CSV ingestion.

struct IngestSchema {
  std::string path_column = "path_id";
  std::string time_column = "t";
  std::vector<std::string> feature_columns;
  std::string event_column = "event";  // 1 on the hazardous-event row
};

struct IngestResult {
  LabeledPaths data;
  std::vector<std::string> diagnostics;  // one line per rejected path
};

/// Reads a CSV with a mandatory header row. Paths with missing values or
/// non-increasing time are rejected with a diagnostic; throws only when no
/// path survives or a schema column is absent.
IngestResult ingest_csv(std::istream& is, const IngestSchema& schema, int downsample_every);
IngestResult ingest_csv(const std::filesystem::path& file, const IngestSchema& schema, int downsample_every);

/// Per-feature standardisation fitted on one set of paths.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const std::vector<RawPath>& paths);
  void apply(std::vector<RawPath>& paths) const;
};

}  // namespace stoplab
