#pragma once

// Expert stopping rules: exact backward induction on finite chains,
// cross-sectional k-NN backward induction on simulated paths, and the
// rule-based stoppers of the change-point and region examples.

#include <functional>
#include <optional>
#include <vector>

#include "stoplab/environments.hpp"
#include "stoplab/smdp.hpp"

namespace stoplab {

struct FiniteOSProblem {
  std::vector<std::vector<double>> P;  // continue-action transition matrix
  std::vector<double> g;
  std::vector<double> G;
  double gamma = 1.0;
  int horizon = 1;

  std::size_t n_states() const { return g.size(); }
  void validate() const;
};

struct ExactSolution {
  std::vector<std::vector<double>> V;     // [t][s], t = 0..horizon
  std::vector<std::vector<bool>> stop;    // [t][s], all true at the horizon
};

/// V_H = G, V_t = max(G, g + gamma P V_{t+1}); stop where G wins (ties stop).
ExactSolution backward_induction_exact(const FiniteOSProblem& p);

struct GainSpec {
  std::function<double(const StatePoint&)> g;
  std::function<double(const StatePoint&)> G;
  double gamma = 0.99;
};

/// Gains the expert optimises in each environment. bmG ignores the continuation
/// gain; bmgG uses both.
GainSpec expert_gains(const EnvSpec& spec, double gamma);

/// Stopping time and the per-state actions it implies. States after tau are
/// not labelled; an unstopped path is labelled all-continue.
struct ExpertLabeling {
  std::optional<int> tau;
  int n_labeled = 0;

  std::vector<int> actions() const;
  bool stopped() const { return tau.has_value(); }
};

/// Stop table produced by the path-wise backward induction; stop[i][t] for
/// t < length - 1 (the terminal step is never a stop decision).
struct RegressionResult {
  std::vector<ExpertLabeling> labels;
  std::vector<std::vector<bool>> stop;
};

enum class KernelMode { Serial, Parallel };

/// Approximate DP across the time-t cross-sections of `paths`. The continuation
/// value at each state is the k-NN average of gamma * V_{t+1}.
RegressionResult backward_induction_regression(const std::vector<RawPath>& paths, const GainSpec& gains, int k,
                                               KernelMode mode = KernelMode::Parallel);

/// Change-point paths stop two steps after the change (clamped to the last
/// state); region paths stop at their first exit.
ExpertLabeling rule_based_stop(const RawPath& path, const EnvSpec& spec);

struct ExpertConfig {
  double gamma = 0.99;
  int knn_k = 50;
};

/// Labels a batch of paths with the expert appropriate to spec.kind.
std::vector<ExpertLabeling> label_paths(const std::vector<RawPath>& paths, const EnvSpec& spec,
                                        const ExpertConfig& cfg);

}  // namespace stoplab
