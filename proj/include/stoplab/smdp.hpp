#pragma once

// Stopping-problem kernel: rewards, soft values, Boltzmann policies and the
// greedy stop rule. Everything here is a pure function.

#include <cstddef>
#include <vector>

namespace stoplab {

/// Binary action of a stopped MDP. Stop sends the process to the cemetery.
enum class Action : int { Stop = 0, Continue = 1 };

inline int to_int(Action a) { return static_cast<int>(a); }
Action action_from_int(int v);

/// A point of the state space, or the zero-valued cemetery.
struct StatePoint {
  std::vector<double> coords;
  bool is_cemetery = false;

  StatePoint() = default;
  explicit StatePoint(std::vector<double> c) : coords(std::move(c)) {}

  static StatePoint cemetery(std::size_t dim);
  std::size_t dim() const { return coords.size(); }
};

struct QPair {
  double q_stop = 0.0;
  double q_continue = 0.0;
};

struct PolicyProbs {
  double p_stop = 0.5;
  double p_continue = 0.5;
};

double composite_reward(double g_val, double G_val, Action a);

/// eps * log(exp(q0/eps) + exp(q1/eps)), evaluated with max subtraction.
/// Throws std::invalid_argument for eps <= 0.
double soft_value(QPair q, double epsilon);

/// log(soft_value(q, eps) - max(q)), finite for every finite q. The excess
/// itself underflows in double once the action gap exceeds a few hundred eps.
double soft_value_log_excess(QPair q, double epsilon);

/// Softargmax of q at temperature eps.
PolicyProbs boltzmann_policy(QPair q, double epsilon);

/// Greedy stop rule; ties stop.
bool stop_decision(QPair q);

/// Cumulative discounted continuation gain after appending a state at time t.
double y_update(double y_prev, double g_new, int t, double gamma);

}  // namespace stoplab
