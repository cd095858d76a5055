#pragma once

// Seeded generators for the synthetic stopping problems.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stoplab/smdp.hpp"

namespace stoplab {

enum class EnvKind { BmG, BmgG, Cp1, Cp2, Cp3, Radial, Star };

std::string_view env_name(EnvKind k);
/// Throws std::invalid_argument on an unknown tag.
EnvKind parse_env_kind(std::string_view tag);

bool is_bm(EnvKind k);
bool is_cp(EnvKind k);
bool is_region(EnvKind k);

/// Change-point regime parameters; "before" and "after" describe the two noise
/// / autoregressive regimes.
struct ChangePointParams {
  double omega = 1.0;
  double mu_before = 0.5;
  double mu_after = 0.5;
  double sigma_before = 1.0;
  double sigma_after = 1.0;
  double ar1_before = 0.0;
  double ar2_before = 0.0;
  double ar1_after = 0.0;
  double ar2_after = 0.0;
  int raw_length = 51;
  double change_lo = 0.7;   // change point drawn in [lo, hi] fraction of the raw path
  double change_hi = 0.9;
  double start_hi = 0.5;    // first kept observation drawn in [0, start_hi]
};

struct EnvSpec {
  EnvKind kind = EnvKind::BmG;
  int dim = 2;
  int horizon = 50;
  double dt = 1.0 / 50.0;
  bool include_time_in_state = false;
  int n_angles = 5;
  double radius0 = 0.5;      // r[t] = radius0 + radius_slope * t
  double radius_slope = 0.05;
  double inner_ratio = 0.5;  // star inner radius as a fraction of the outer one
  ChangePointParams cp;

  /// Paper defaults for the given kind (time feature on for cp/radial/star).
  static EnvSpec defaults(EnvKind kind);
  void validate() const;
};

struct RawPath {
  std::vector<StatePoint> states;
  std::optional<int> event_time;
  std::uint64_t rng_seed = 0;

  int length() const { return static_cast<int>(states.size()); }
};

struct GainValues {
  double g = 0.0;
  double G = 0.0;
};

/// Brownian motion from the origin with N(0, dt I) increments.
RawPath simulate_bm_path(const EnvSpec& spec, std::uint64_t seed);

/// Gains of the 2-D Brownian examples: G = |s|^2, g = 5 dt inside the unit disc,
/// -400 dt on or outside it.
GainValues bm_gains(const StatePoint& s, double dt);

RawPath simulate_cp_path(const EnvSpec& spec, std::uint64_t seed);

double region_radius(const EnvSpec& spec, int t);

/// Star outline at time t: 2 * n_angles vertices alternating outer/inner radius,
/// the first outer vertex on the positive x axis.
std::vector<std::pair<double, double>> star_vertices(const EnvSpec& spec, int t);

/// True when s lies strictly inside the continuation region at time t. The
/// region boundary counts as exit.
bool region_membership(const EnvSpec& spec, const StatePoint& s, int t);

/// Brownian motion from the origin with N(0, dt I) increments, event_time at
/// the first exit.
RawPath simulate_region_path(const EnvSpec& spec, std::uint64_t seed);

/// Dispatches on spec.kind.
RawPath simulate_path(const EnvSpec& spec, std::uint64_t seed);

}  // namespace stoplab
