#include "stoplab/oversampling.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "stoplab/knn.hpp"

namespace stoplab {

void SmoteConfig::validate() const {
  if (k_neighbors < 1) throw std::invalid_argument("SMOTE k must be >= 1");
  if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw std::invalid_argument("alpha0 must be in (0,1]");
  if (!(alpha_decay > 0.0 && alpha_decay <= 1.0)) throw std::invalid_argument("alpha_decay must be in (0,1]");
}

double SmoteConfig::alpha_at(int epoch) const { return alpha0 * std::pow(alpha_decay, epoch); }

namespace {

std::vector<std::vector<double>> generate(const std::vector<std::vector<double>>& minority, int k,
                                          std::size_t count, std::optional<double> fixed_u, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("SMOTE k must be >= 1");
  if (minority.size() <= static_cast<std::size_t>(k)) {
    throw std::invalid_argument("SMOTE needs more minority points (" + std::to_string(minority.size()) +
                                ") than neighbours (" + std::to_string(k) + ")");
  }
  const std::size_t d = minority.front().size();
  PointCloud cloud(minority.size(), d);
  for (std::size_t i = 0; i < minority.size(); ++i) {
    if (minority[i].size() != d) throw std::invalid_argument("SMOTE: ragged minority set");
    std::copy(minority[i].begin(), minority[i].end(), cloud.row(i));
  }
  const auto nbrs = knn_indices_parallel(cloud, k);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_point(0, minority.size() - 1);
  std::uniform_int_distribution<int> pick_nbr(0, k - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::size_t m = 0; m < count; ++m) {
    const auto i = pick_point(rng);
    const auto j = nbrs[i][static_cast<std::size_t>(pick_nbr(rng))];
    const double u = fixed_u ? *fixed_u : unif(rng);
    std::vector<double> x(d);
    for (std::size_t c = 0; c < d; ++c) x[c] = minority[i][c] + u * (minority[j][c] - minority[i][c]);
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> smote_generate(const std::vector<std::vector<double>>& minority, int k,
                                                std::size_t count, std::uint64_t seed) {
  return generate(minority, k, count, std::nullopt, seed);
}

std::vector<std::vector<double>> smote_generate_fixed_u(const std::vector<std::vector<double>>& minority, int k,
                                                        std::size_t count, double u, std::uint64_t seed) {
  return generate(minority, k, count, u, seed);
}

std::size_t synthetic_count(const SmoteConfig& cfg, std::size_t minority, std::size_t majority) {
  if (cfg.n_synthetic) return *cfg.n_synthetic;
  return majority > minority ? majority - minority : 0;
}

std::vector<TransitionRecord> build_synthetic_records(const std::vector<std::vector<double>>& points, double alpha,
                                                      int first_path_id) {
  std::vector<TransitionRecord> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    TransitionRecord r;
    r.s = StatePoint(p);
    r.a = Action::Stop;
    r.s_next = StatePoint::cemetery(p.size());
    r.path_id = first_path_id;
    r.time_index = 0;
    r.confidence = alpha;
    r.synthetic = true;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TransitionRecord> oversample_stops(const TrajectorySet& train, const SmoteConfig& cfg,
                                               std::uint64_t seed) {
  cfg.validate();
  std::vector<std::vector<double>> stops;
  for (const auto& r : train.records) {
    if (r.a == Action::Stop && !r.synthetic) stops.push_back(r.s.coords);
  }
  const std::size_t n = synthetic_count(cfg, stops.size(), train.count_action(Action::Continue));
  if (n == 0) return {};
  return build_synthetic_records(smote_generate(stops, cfg.k_neighbors, n, seed), cfg.alpha_at(0));
}

}  // namespace stoplab
