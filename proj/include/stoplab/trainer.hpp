#pragma once

// Training loops for the classifier baseline and the inverse soft-Q stopping
// family, from plain IQS to the dynamics-aware variant with local bootstrap.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "stoplab/data.hpp"
#include "stoplab/evaluation.hpp"
#include "stoplab/losses.hpp"
#include "stoplab/nn.hpp"
#include "stoplab/oversampling.hpp"

namespace stoplab {

enum class Algorithm {
  Classifier,
  ClassifierSmote,
  Iqs,
  IqsSmote,
  IqsCsSmote,
  MbIqs,
  MbIqsSmote,
  MbIqsCsSmote,
  DoIqs,
  DoIqsLb,
};

std::string_view algorithm_name(Algorithm a);
Algorithm parse_algorithm(std::string_view tag);
const std::vector<Algorithm>& all_algorithms();

struct AlgorithmTraits {
  bool classifier = false;
  bool smote = false;
  bool confidence = false;      // synthetic weight follows the alpha schedule
  bool model_based = false;     // dynamics head and bi-level updates
  bool augmented = false;       // cumulative-gain state and g network
  bool local_bootstrap = false;
};
AlgorithmTraits traits(Algorithm a);

/// Successor fed to the soft value of continue records in model-based runs.
enum class SuccessorSource { Observed, Predicted };

struct TrainConfig {
  Algorithm algorithm = Algorithm::Iqs;
  double gamma = 0.99;
  double eps0 = 0.1;
  double eps_decay = 0.9999;
  double lr0 = 0.01;
  double lr_decay = 0.9999;
  int epochs = 200;
  std::size_t batch_size = 128;
  double c_reg = 0.5;
  SmoteConfig smote;
  std::vector<int> trunk{64, 64};
  std::vector<int> g_hidden{32, 32};
  bool freeze_trunk_in_dyn_step = true;
  bool share_trunk = true;
  SuccessorSource successor = SuccessorSource::Predicted;
  bool dynamics_step = true;  // ablation switch for the P update
  bool train_g = true;        // ablation switch: false keeps g frozen
  bool zero_g = false;        // ablation: g network outputs forced to 0
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double iq_term = 0.0;
  double value_term = 0.0;
  double fake_term = 0.0;
  double dyn_loss = 0.0;
  double g_loss = 0.0;
  double total = 0.0;
  double val_ba = 0.0;
  double lr = 0.0;
  double eps = 0.0;
  double alpha = 0.0;
};

struct TrainResult {
  StopModel best_model;
  std::optional<MultiHeadNet> best_dynamics;  // separate dynamics net when the trunk is not shared
  int best_epoch = -1;
  double best_val_ba = -1.0;
  std::vector<EpochStats> curves;
  bool diverged = false;
  std::string error;

  Checkpoint checkpoint(const TrainConfig& cfg) const;
};

/// Runs cfg.epochs epochs and keeps the parameters of the epoch with the best
/// validation balanced accuracy (first one on ties).
TrainResult train(const TrainConfig& cfg, const TrajectorySet& train_set, const std::vector<EvalPath>& val);

/// Rebuilds the decision model stored by TrainResult::checkpoint.
StopModel model_from_checkpoint(const Checkpoint& ck);

void write_curves_csv(std::ostream& os, const std::vector<EpochStats>& curves);

/// Continuation gain implied by a Q pair: Q(s,continue) - gamma V(s') - y_prev,
/// y_prev being the discounted gain collected before s.
double gain_target(double q_continue, double v_next, double y_prev, double gamma);

/// Derives independent stream seeds from one run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace stoplab
