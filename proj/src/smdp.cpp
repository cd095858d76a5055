#include "stoplab/smdp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stoplab {

Action action_from_int(int v) {
  if (v != 0 && v != 1) {
    throw std::invalid_argument("action must be 0 (stop) or 1 (continue), got " + std::to_string(v));
  }
  return static_cast<Action>(v);
}

StatePoint StatePoint::cemetery(std::size_t dim) {
  StatePoint p(std::vector<double>(dim, 0.0));
  p.is_cemetery = true;
  return p;
}

double composite_reward(double g_val, double G_val, Action a) {
  const double av = static_cast<double>(to_int(a));
  return g_val * av + G_val * (1.0 - av);
}

namespace {

void require_positive_temperature(double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("temperature epsilon must be positive");
  }
}

}  // namespace

double soft_value(QPair q, double epsilon) {
  require_positive_temperature(epsilon);
  const double hi = std::max(q.q_stop, q.q_continue);
  const double lo = std::min(q.q_stop, q.q_continue);
  // exp((lo - hi)/eps) <= 1, so log1p keeps precision when the gap is large.
  return hi + epsilon * std::log1p(std::exp((lo - hi) / epsilon));
}

double soft_value_log_excess(QPair q, double epsilon) {
  require_positive_temperature(epsilon);
  const double x = std::abs(q.q_stop - q.q_continue) / epsilon;
  // log(log1p(e^-x)); past x = 30 use log1p(u) = u(1 - u/2 + ...) in log form.
  const double inner = x < 30.0 ? std::log(std::log1p(std::exp(-x))) : -x + std::log1p(-0.5 * std::exp(-x));
  return std::log(epsilon) + inner;
}

PolicyProbs boltzmann_policy(QPair q, double epsilon) {
  require_positive_temperature(epsilon);
  // Logistic form of the two-action softargmax.
  const double z = (q.q_stop - q.q_continue) / epsilon;
  PolicyProbs p;
  if (z >= 0.0) {
    const double e = std::exp(-z);
    p.p_stop = 1.0 / (1.0 + e);
    p.p_continue = e / (1.0 + e);
  } else {
    const double e = std::exp(z);
    p.p_stop = e / (1.0 + e);
    p.p_continue = 1.0 / (1.0 + e);
  }
  return p;
}

bool stop_decision(QPair q) { return q.q_stop >= q.q_continue; }

double y_update(double y_prev, double g_new, int t, double gamma) {
  return y_prev + std::pow(gamma, t) * g_new;
}

}  // namespace stoplab
