#include "stoplab/environments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace stoplab {

std::string_view env_name(EnvKind k) {
  switch (k) {
    case EnvKind::BmG: return "bmG";
    case EnvKind::BmgG: return "bmgG";
    case EnvKind::Cp1: return "cp1";
    case EnvKind::Cp2: return "cp2";
    case EnvKind::Cp3: return "cp3";
    case EnvKind::Radial: return "radial";
    case EnvKind::Star: return "star";
  }
  return "?";
}

EnvKind parse_env_kind(std::string_view tag) {
  for (auto k : {EnvKind::BmG, EnvKind::BmgG, EnvKind::Cp1, EnvKind::Cp2, EnvKind::Cp3, EnvKind::Radial,
                 EnvKind::Star}) {
    if (env_name(k) == tag) return k;
  }
  throw std::invalid_argument("unknown environment '" + std::string(tag) + "'");
}

bool is_bm(EnvKind k) { return k == EnvKind::BmG || k == EnvKind::BmgG; }
bool is_cp(EnvKind k) { return k == EnvKind::Cp1 || k == EnvKind::Cp2 || k == EnvKind::Cp3; }
bool is_region(EnvKind k) { return k == EnvKind::Radial || k == EnvKind::Star; }

EnvSpec EnvSpec::defaults(EnvKind kind) {
  EnvSpec s;
  s.kind = kind;
  if (is_bm(kind)) {
    s.dim = 2;
    s.horizon = 50;
    s.dt = 1.0 / 50.0;
    s.include_time_in_state = false;
  } else if (is_cp(kind)) {
    s.dim = 1;
    s.horizon = 51;
    s.dt = 1.0;
    s.include_time_in_state = true;
    auto& cp = s.cp;
    switch (kind) {
      case EnvKind::Cp1:
        cp.mu_before = 0.5;
        cp.mu_after = 5.0;
        break;
      case EnvKind::Cp2:
        cp.ar1_before = 0.25;
        cp.ar2_before = 0.05;
        cp.ar1_after = 0.75;
        cp.ar2_after = 0.5;
        break;
      case EnvKind::Cp3:
        cp.sigma_before = 1.0;
        cp.sigma_after = 5.0;
        break;
      default: break;
    }
  } else {
    s.dim = 2;
    s.horizon = 50;
    s.dt = 1.0 / 50.0;
    s.include_time_in_state = true;
  }
  return s;
}

void EnvSpec::validate() const {
  if (horizon < 2) throw std::invalid_argument("horizon must be at least 2");
  if (dim < 1) throw std::invalid_argument("dim must be at least 1");
  if ((is_bm(kind) || is_region(kind)) && !(dt > 0.0)) {
    throw std::invalid_argument("dt must be positive for Brownian environments");
  }
  if (is_bm(kind) && dim != 2) throw std::invalid_argument("Brownian gain examples are two-dimensional");
  if (kind == EnvKind::Star) {
    if (dim != 2) throw std::invalid_argument("star region is two-dimensional");
    if (n_angles < 3) throw std::invalid_argument("star needs n_angles >= 3");
    if (!(inner_ratio > 0.0 && inner_ratio < 1.0)) throw std::invalid_argument("star inner_ratio must be in (0,1)");
  }
  if (is_region(kind) && !(radius0 > 0.0 && radius_slope >= 0.0)) {
    throw std::invalid_argument("region radius must stay positive");
  }
  if (is_cp(kind)) {
    if (cp.raw_length < 4) throw std::invalid_argument("change-point raw_length too short");
    if (!(0.0 <= cp.change_lo && cp.change_lo <= cp.change_hi && cp.change_hi < 1.0)) {
      throw std::invalid_argument("change-point window must satisfy 0 <= lo <= hi < 1");
    }
  }
}

namespace {

RawPath brownian_from_origin(const EnvSpec& spec, std::uint64_t seed, double step_var) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = std::sqrt(step_var);
  RawPath path;
  path.rng_seed = seed;
  path.states.reserve(static_cast<std::size_t>(spec.horizon));
  std::vector<double> cur(static_cast<std::size_t>(spec.dim), 0.0);
  path.states.emplace_back(cur);
  for (int t = 1; t < spec.horizon; ++t) {
    for (auto& c : cur) c += scale * normal(rng);
    path.states.emplace_back(cur);
  }
  return path;
}

double norm2(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

}  // namespace

RawPath simulate_bm_path(const EnvSpec& spec, std::uint64_t seed) {
  if (!is_bm(spec.kind)) throw std::invalid_argument("simulate_bm_path needs a bm environment");
  spec.validate();
  return brownian_from_origin(spec, seed, spec.dt);
}

GainValues bm_gains(const StatePoint& s, double dt) {
  if (s.is_cemetery) return {};
  if (s.dim() < 2) throw std::invalid_argument("bm gains need a 2-D state");
  const double sq = s.coords[0] * s.coords[0] + s.coords[1] * s.coords[1];
  GainValues out;
  out.G = sq;
  out.g = (std::sqrt(sq) < 1.0 ? 5.0 : -400.0) * dt;
  return out;
}

RawPath simulate_cp_path(const EnvSpec& spec, std::uint64_t seed) {
  if (!is_cp(spec.kind)) throw std::invalid_argument("simulate_cp_path needs a change-point environment");
  spec.validate();
  const auto& cp = spec.cp;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const int n = cp.raw_length;
  const int change_lo = static_cast<int>(std::ceil(cp.change_lo * n));
  const int change_hi = std::min(n - 1, static_cast<int>(std::floor(cp.change_hi * n)));
  const int change = std::uniform_int_distribution<int>(change_lo, change_hi)(rng);
  const int start = std::uniform_int_distribution<int>(0, static_cast<int>(std::floor(cp.start_hi * n)))(rng);

  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  for (int t = 0; t < n; ++t) {
    const bool after = t >= change;
    const double mu = after ? cp.mu_after : cp.mu_before;
    const double sigma = after ? cp.sigma_after : cp.sigma_before;
    const double b1 = after ? cp.ar1_after : cp.ar1_before;
    const double b2 = after ? cp.ar2_after : cp.ar2_before;
    const double lag1 = t >= 1 ? x[static_cast<std::size_t>(t - 1)] : 0.0;
    const double lag2 = t >= 2 ? x[static_cast<std::size_t>(t - 2)] : 0.0;
    x[static_cast<std::size_t>(t)] =
        std::sin(cp.omega * t) + b1 * lag1 + b2 * lag2 + mu + sigma * normal(rng);
  }

  RawPath path;
  path.rng_seed = seed;
  for (int t = start; t < n; ++t) path.states.emplace_back(std::vector<double>{x[static_cast<std::size_t>(t)]});
  path.event_time = change - start;
  return path;
}

double region_radius(const EnvSpec& spec, int t) { return spec.radius0 + spec.radius_slope * t; }

std::vector<std::pair<double, double>> star_vertices(const EnvSpec& spec, int t) {
  const double outer = region_radius(spec, t);
  const double inner = spec.inner_ratio * outer;
  const int n = spec.n_angles;
  std::vector<std::pair<double, double>> v;
  v.reserve(static_cast<std::size_t>(2 * n));
  for (int k = 0; k < 2 * n; ++k) {
    const double ang = std::numbers::pi * k / n;
    const double r = (k % 2 == 0) ? outer : inner;
    v.emplace_back(r * std::cos(ang), r * std::sin(ang));
  }
  return v;
}

namespace {

// Distance from the origin to the star outline along the direction of (x, y).
// The star is star-shaped about the origin, so one edge is hit.
double star_boundary_radius(const EnvSpec& spec, int t, double x, double y) {
  const double outer = region_radius(spec, t);
  const double inner = spec.inner_ratio * outer;
  const int n = spec.n_angles;
  const double sector = std::numbers::pi / n;
  double ang = std::atan2(y, x);
  if (ang < 0.0) ang += 2.0 * std::numbers::pi;
  const int k = std::min(2 * n - 1, static_cast<int>(std::floor(ang / sector)));
  const double a0 = sector * k;
  const double a1 = sector * (k + 1);
  const double r0 = (k % 2 == 0) ? outer : inner;
  const double r1 = (k % 2 == 0) ? inner : outer;
  const double px = r0 * std::cos(a0), py = r0 * std::sin(a0);
  const double qx = r1 * std::cos(a1), qy = r1 * std::sin(a1);
  // Solve lambda * (c, s) = p + mu * (q - p) for lambda.
  const double c = std::cos(ang), s = std::sin(ang);
  const double ex = qx - px, ey = qy - py;
  const double det = c * (-ey) - s * (-ex);
  return (px * (-ey) - py * (-ex)) / det;
}

}  // namespace

bool region_membership(const EnvSpec& spec, const StatePoint& s, int t) {
  if (!is_region(spec.kind)) throw std::invalid_argument("region_membership needs radial or star");
  if (s.is_cemetery) return false;
  const auto spatial = static_cast<std::size_t>(spec.dim);
  if (s.dim() < spatial) throw std::invalid_argument("state narrower than the environment dimension");
  std::vector<double> xs(s.coords.begin(), s.coords.begin() + static_cast<std::ptrdiff_t>(spatial));
  const double r = std::sqrt(norm2(xs));
  if (spec.kind == EnvKind::Radial) return r < region_radius(spec, t);
  if (r == 0.0) return true;
  return r < star_boundary_radius(spec, t, xs[0], xs[1]);
}

RawPath simulate_region_path(const EnvSpec& spec, std::uint64_t seed) {
  if (!is_region(spec.kind)) throw std::invalid_argument("simulate_region_path needs radial or star");
  spec.validate();
  RawPath path = brownian_from_origin(spec, seed, spec.dt);
  for (int t = 0; t < path.length(); ++t) {
    if (!region_membership(spec, path.states[static_cast<std::size_t>(t)], t)) {
      path.event_time = t;
      break;
    }
  }
  return path;
}

RawPath simulate_path(const EnvSpec& spec, std::uint64_t seed) {
  if (is_bm(spec.kind)) return simulate_bm_path(spec, seed);
  if (is_cp(spec.kind)) return simulate_cp_path(spec, seed);
  return simulate_region_path(spec, seed);
}

}  // namespace stoplab
