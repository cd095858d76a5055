#include "stoplab/expert.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "stoplab/knn.hpp"

namespace stoplab {

void FiniteOSProblem::validate() const {
  const std::size_t n = g.size();
  if (n == 0) throw std::invalid_argument("finite problem needs at least one state");
  if (G.size() != n || P.size() != n) throw std::invalid_argument("finite problem: g, G and P sizes differ");
  if (horizon < 0) throw std::invalid_argument("finite problem: negative horizon");
  for (std::size_t s = 0; s < n; ++s) {
    if (P[s].size() != n) throw std::invalid_argument("finite problem: P must be square");
    double row = 0.0;
    for (double p : P[s]) {
      if (p < 0.0) throw std::invalid_argument("finite problem: negative transition probability");
      row += p;
    }
    if (std::abs(row - 1.0) > 1e-9) {
      throw std::invalid_argument("finite problem: row " + std::to_string(s) + " of P does not sum to 1");
    }
  }
}

ExactSolution backward_induction_exact(const FiniteOSProblem& p) {
  p.validate();
  const std::size_t n = p.n_states();
  const auto H = static_cast<std::size_t>(p.horizon);
  ExactSolution sol;
  sol.V.assign(H + 1, std::vector<double>(n, 0.0));
  sol.stop.assign(H + 1, std::vector<bool>(n, true));
  sol.V[H] = p.G;
  for (std::size_t t = H; t-- > 0;) {
    for (std::size_t s = 0; s < n; ++s) {
      double expected = 0.0;
      for (std::size_t s2 = 0; s2 < n; ++s2) expected += p.P[s][s2] * sol.V[t + 1][s2];
      const double cont = p.g[s] + p.gamma * expected;
      sol.stop[t][s] = p.G[s] >= cont;
      sol.V[t][s] = std::max(p.G[s], cont);
    }
  }
  return sol;
}

GainSpec expert_gains(const EnvSpec& spec, double gamma) {
  GainSpec gs;
  gs.gamma = gamma;
  const double dt = spec.dt;
  switch (spec.kind) {
    case EnvKind::BmG:
      gs.g = [](const StatePoint&) { return 0.0; };
      gs.G = [dt](const StatePoint& s) { return bm_gains(s, dt).G; };
      break;
    case EnvKind::BmgG:
      gs.g = [dt](const StatePoint& s) { return bm_gains(s, dt).g; };
      gs.G = [dt](const StatePoint& s) { return bm_gains(s, dt).G; };
      break;
    default:
      throw std::invalid_argument("expert gains are defined for the Brownian gain examples only");
  }
  return gs;
}

std::vector<int> ExpertLabeling::actions() const {
  std::vector<int> a(static_cast<std::size_t>(n_labeled), 1);
  if (tau) a[static_cast<std::size_t>(*tau)] = 0;
  return a;
}

RegressionResult backward_induction_regression(const std::vector<RawPath>& paths, const GainSpec& gains, int k,
                                               KernelMode mode) {
  if (paths.empty()) throw std::invalid_argument("regression DP needs paths");
  if (k < 1 || static_cast<std::size_t>(k) > paths.size()) {
    throw std::invalid_argument("regression DP: fewer paths (" + std::to_string(paths.size()) + ") than k (" +
                                std::to_string(k) + ")");
  }
  const int len = paths.front().length();
  const std::size_t d = paths.front().states.front().dim();
  for (const auto& p : paths) {
    if (p.length() != len) throw std::invalid_argument("regression DP: paths must share the horizon");
  }
  if (len < 1) throw std::invalid_argument("regression DP: empty paths");
  const std::size_t n = paths.size();

  RegressionResult out;
  out.stop.assign(n, std::vector<bool>(static_cast<std::size_t>(std::max(len - 1, 0)), false));

  std::vector<double> value(n);
  for (std::size_t i = 0; i < n; ++i) value[i] = gains.G(paths[i].states.back());

  PointCloud cloud(n, d);
  std::vector<double> discounted(n);
  for (int t = len - 2; t >= 0; --t) {
    const auto ts = static_cast<std::size_t>(t);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = paths[i].states[ts].coords;
      std::copy(c.begin(), c.end(), cloud.row(i));
      discounted[i] = gains.gamma * value[i];
    }
    const auto cont = mode == KernelMode::Parallel ? knn_average_parallel(cloud, discounted, k)
                                                   : knn_average_serial(cloud, discounted, k);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& s = paths[i].states[ts];
      const double G = gains.G(s);
      const double c = gains.g(s) + cont[i];
      out.stop[i][ts] = G >= c;
      value[i] = std::max(G, c);
    }
  }

  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& lab = out.labels[i];
    lab.n_labeled = len;
    for (int t = 0; t + 1 < len; ++t) {
      if (out.stop[i][static_cast<std::size_t>(t)]) {
        lab.tau = t;
        lab.n_labeled = t + 1;
        break;
      }
    }
  }
  return out;
}

ExpertLabeling rule_based_stop(const RawPath& path, const EnvSpec& spec) {
  ExpertLabeling lab;
  lab.n_labeled = path.length();
  if (is_cp(spec.kind)) {
    if (path.length() == 0) return lab;
    const int ev = path.event_time.value_or(path.length() - 1);
    lab.tau = std::min(ev + 2, path.length() - 1);
  } else if (is_region(spec.kind)) {
    if (path.event_time) lab.tau = *path.event_time;
  } else {
    throw std::invalid_argument("rule_based_stop is for change-point and region environments");
  }
  if (lab.tau) lab.n_labeled = *lab.tau + 1;
  return lab;
}

std::vector<ExpertLabeling> label_paths(const std::vector<RawPath>& paths, const EnvSpec& spec,
                                        const ExpertConfig& cfg) {
  if (is_bm(spec.kind)) {
    return backward_induction_regression(paths, expert_gains(spec, cfg.gamma), cfg.knn_k).labels;
  }
  std::vector<ExpertLabeling> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(rule_based_stop(p, spec));
  return out;
}

}  // namespace stoplab
