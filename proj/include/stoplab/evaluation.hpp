#pragma once

// Stopping-region recovery from trained networks and the metrics used to
// judge it.

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "stoplab/contour.hpp"
#include "stoplab/data.hpp"
#include "stoplab/nn.hpp"

namespace stoplab {

/// A frozen decision model: the Q network, plus the gain network for models
/// trained on states augmented with the cumulative gain y.
struct StopModel {
  MultiHeadNet q_net;
  std::optional<MultiHeadNet> g_net;
  double gamma = 0.99;

  bool augmented() const { return g_net.has_value(); }
  /// Width of the bare state the model expects (before y is appended).
  int state_dim() const { return q_net.config().input_dim - (augmented() ? 1 : 0); }

  /// Q pairs (2 x n) of bare states. Throws for augmented models.
  Eigen::MatrixXd q_values(const Eigen::MatrixXd& states) const;
  /// Q pairs along one path (states in time order); augmented models roll
  /// y_t = sum_{k<=t} gamma^k g(s_k) along the prefix.
  Eigen::MatrixXd q_values_path(const Eigen::MatrixXd& path_states) const;
};

/// Greedy labels (true = stop) of bare states.
std::vector<bool> recover_region(const StopModel& model, const Eigen::MatrixXd& states);
/// Greedy labels along a path.
std::vector<bool> recover_path(const StopModel& model, const Eigen::MatrixXd& path_states);

/// First predicted stop index, if any.
std::optional<int> first_stop(const std::vector<bool>& labels);

struct Confusion {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  double tpr() const;
  double tnr() const;
  double balanced_accuracy() const { return 0.5 * (tpr() + tnr()); }
};

/// Stop is the positive class. Throws on empty or mismatched input.
Confusion confusion(const std::vector<bool>& predicted_stop, const std::vector<bool>& expert_stop);
double balanced_accuracy(const std::vector<bool>& predicted_stop, const std::vector<bool>& expert_stop);

struct Tradeoff {
  std::optional<double> m_tte;  // empty when every path is a miss
  std::optional<double> m_emr;  // empty when no path has a reference event
};

/// A path is a miss when it never stops or stops after its reference event.
/// Paths without a reference are skipped.
Tradeoff tradeoff_metrics(const std::vector<std::optional<int>>& reference,
                          const std::vector<std::optional<int>>& predicted);

/// One path ready for evaluation: featurised states of the whole raw path,
/// the expert labels of its first n_labeled states and its reference event.
struct EvalPath {
  Eigen::MatrixXd states;  // feature_dim x length
  int n_labeled = 0;
  std::optional<int> tau;
  std::optional<int> reference;
};

std::vector<EvalPath> build_eval_set(const LabeledPaths& lp, const FeatureMap& features);

struct EvalReport {
  Confusion counts;
  double balanced_accuracy = 0.0;
  Tradeoff tradeoff;
  std::vector<std::optional<int>> predicted_tau;
};

enum class EvalMode { Serial, Parallel };

EvalReport evaluate(const StopModel& model, const std::vector<EvalPath>& paths, EvalMode mode = EvalMode::Serial);

struct GridSpec {
  double x_min = -2.0, x_max = 2.0;
  double y_min = -2.0, y_max = 2.0;
  int nx = 81, ny = 81;
  int horizon = 50;         // time feature scale
  bool time_feature = false;
  double y_value = 0.0;     // cumulative gain fed to augmented models
  bool normalize = false;   // divide by the largest |Q| on the slice

  std::vector<double> xs() const;
  std::vector<double> ys() const;
};

struct SurfaceSlice {
  int t = 0;
  Eigen::MatrixXd q_stop;      // ny x nx
  Eigen::MatrixXd q_continue;
  Eigen::MatrixXd diff;        // q_stop - q_continue
  std::vector<Polyline> boundary;
};

/// Q surfaces on a regular grid for each requested time plus the zero-level
/// boundary of Q(s,stop) - Q(s,continue). The model must take 2-D states
/// (plus the time feature when the grid asks for it).
std::vector<SurfaceSlice> export_surfaces(const StopModel& model, const GridSpec& grid, const std::vector<int>& times,
                                          EvalMode mode = EvalMode::Parallel);

/// Maps model inputs (columns) to Q pairs (2 x n).
using QFunction = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

/// Same export for an arbitrary Q function of (x, y[, t/horizon][, y_value]).
std::vector<SurfaceSlice> export_surfaces(const QFunction& q, int input_dim, const GridSpec& grid,
                                          const std::vector<int>& times, EvalMode mode = EvalMode::Parallel);

void write_surface_csv(std::ostream& os, const SurfaceSlice& slice, const GridSpec& grid);
void write_boundaries_csv(std::ostream& os, const std::vector<SurfaceSlice>& slices);

}  // namespace stoplab
