#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <limits>
#include <random>

#include "stoplab/smdp.hpp"

using namespace stoplab;

namespace {

// Reference log-sum-exp in extended precision without the log1p rewrite.
long double soft_value_ld(long double a, long double b, long double eps) {
  const long double m = a > b ? a : b;
  return m + eps * std::log(std::exp((a - m) / eps) + std::exp((b - m) / eps));
}

}  // namespace

TEST_CASE("actions round-trip and reject anything but 0/1") {
  CHECK(action_from_int(0) == Action::Stop);
  CHECK(action_from_int(1) == Action::Continue);
  CHECK(to_int(Action::Stop) == 0);
  CHECK_THROWS_AS(action_from_int(2), std::invalid_argument);
  CHECK_THROWS_AS(action_from_int(-1), std::invalid_argument);
}

TEST_CASE("cemetery is the zero point") {
  const auto c = StatePoint::cemetery(3);
  CHECK(c.is_cemetery);
  CHECK(c.dim() == 3);
  for (double v : c.coords) CHECK(v == 0.0);
}

TEST_CASE("composite reward picks g on continue and G on stop") {
  CHECK(composite_reward(0.1, 5.0, Action::Stop) == 5.0);
  CHECK(composite_reward(0.1, 5.0, Action::Continue) == 0.1);
  CHECK(composite_reward(-8.0, 0.0, Action::Continue) == -8.0);
}

TEST_CASE("soft value examples") {
  CHECK(soft_value({0.0, 0.0}, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(soft_value({1.0, 1.0}, 0.1) == doctest::Approx(1.0 + 0.1 * std::log(2.0)).epsilon(1e-15));
  // A gap of 1000 eps leaves the max untouched in double.
  CHECK(soft_value({100.0, 0.0}, 0.1) == 100.0);
  CHECK_THROWS_AS(soft_value({0.0, 0.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(soft_value({0.0, 0.0}, -1.0), std::invalid_argument);
}

TEST_CASE("soft value agrees with an extended-precision log-sum-exp") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> q(-20.0, 20.0);
  for (double eps : {1e-3, 0.1, 1.0, 10.0}) {
    for (int i = 0; i < 20000; ++i) {
      const double a = q(rng), b = q(rng);
      const long double ref = soft_value_ld(a, b, eps);
      const double got = soft_value({a, b}, eps);
      CHECK(std::abs(static_cast<long double>(got) - ref) <= 4e-15L * (1.0L + std::abs(ref)));
    }
  }
}

TEST_CASE("soft value lies in (max, max + eps ln 2]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> q(-10.0, 10.0);
  for (double eps : {1e-3, 0.1, 1.0}) {
    for (int i = 0; i < 20000; ++i) {
      const QPair p{q(rng), q(rng)};
      const double m = std::max(p.q_stop, p.q_continue);
      const double v = soft_value(p, eps);
      CHECK(v >= m);
      CHECK(v <= m + eps * std::log(2.0) + 1e-12 * (1.0 + std::abs(m)));
      // The excess is strictly positive: its logarithm is finite.
      CHECK(std::isfinite(soft_value_log_excess(p, eps)));
    }
  }
}

TEST_CASE("log excess matches the direct excess where the latter is representable") {
  const QPair p{0.3, 0.1};
  const double direct = soft_value(p, 0.1) - 0.3;
  CHECK(std::exp(soft_value_log_excess(p, 0.1)) == doctest::Approx(direct).epsilon(1e-12));
  // Far past double underflow the log stays finite and linear in the gap.
  const double a = soft_value_log_excess({1000.0, 0.0}, 1e-3);
  const double b = soft_value_log_excess({1001.0, 0.0}, 1e-3);
  CHECK(std::isfinite(a));
  CHECK(a - b == doctest::Approx(1000.0).epsilon(1e-9));
}

TEST_CASE("boltzmann policy") {
  auto p = boltzmann_policy({0.0, 0.0}, 0.1);
  CHECK(p.p_stop == 0.5);
  CHECK(p.p_continue == 0.5);
  p = boltzmann_policy({1.0, 0.0}, 1.0);
  CHECK(p.p_stop == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  CHECK(p.p_stop + p.p_continue == doctest::Approx(1.0).epsilon(1e-15));
  // Cold limit: the argmax takes all the mass once the gap dominates eps.
  p = boltzmann_policy({0.0, 0.1}, 1e-6);
  CHECK(p.p_continue >= 1.0 - 1e-10);
  p = boltzmann_policy({-5.0, -5.2}, 1e-6);
  CHECK(p.p_stop >= 1.0 - 1e-10);
  CHECK_THROWS_AS(boltzmann_policy({0.0, 0.0}, 0.0), std::invalid_argument);
}

TEST_CASE("stop decision is greedy with ties stopping") {
  CHECK(stop_decision({1.0, 0.0}));
  CHECK_FALSE(stop_decision({0.0, 1.0}));
  CHECK(stop_decision({0.5, 0.5}));
}

TEST_CASE("y update adds the discounted gain") {
  CHECK(y_update(1.5, -8.0, 2, 0.99) == doctest::Approx(-6.3408).epsilon(1e-12));
  CHECK(y_update(0.0, 0.1, 0, 0.99) == 0.1);
  CHECK(y_update(2.0, 0.0, 7, 0.5) == 2.0);
}
