#pragma once

// SMOTE and confidence-scored SMOTE for the stop class.

#include <cstdint>
#include <optional>
#include <vector>

#include "stoplab/data.hpp"

namespace stoplab {

struct SmoteConfig {
  int k_neighbors = 12;
  std::optional<std::size_t> n_synthetic;  // empty = balance the classes
  double alpha0 = 0.99;
  double alpha_decay = 0.95;

  void validate() const;
  /// Confidence of synthetic records during `epoch` (0-based).
  double alpha_at(int epoch) const;
};

/// x + u (x_nn - x) with x a uniformly drawn minority point, x_nn one of its k
/// nearest minority neighbours and u ~ U(0,1).
std::vector<std::vector<double>> smote_generate(const std::vector<std::vector<double>>& minority, int k,
                                                std::size_t count, std::uint64_t seed);

/// Same draw, with u forced to a constant (used to pin the interpolation).
std::vector<std::vector<double>> smote_generate_fixed_u(const std::vector<std::vector<double>>& minority, int k,
                                                        std::size_t count, double u, std::uint64_t seed);

/// Number of synthetic records the config asks for, given the class counts.
std::size_t synthetic_count(const SmoteConfig& cfg, std::size_t minority, std::size_t majority);

/// Stop records at the cemetery with the given confidence, flagged synthetic.
std::vector<TransitionRecord> build_synthetic_records(const std::vector<std::vector<double>>& points,
                                                      double alpha, int first_path_id = -1);

/// Generates synthetic stop records from the stop states of `train`.
std::vector<TransitionRecord> oversample_stops(const TrajectorySet& train, const SmoteConfig& cfg,
                                               std::uint64_t seed);

}  // namespace stoplab
