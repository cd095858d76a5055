#include "stoplab/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "stoplab/smdp.hpp"

namespace stoplab {

void soft_values(const Eigen::MatrixXd& q, double epsilon, Eigen::VectorXd& v, Eigen::MatrixXd* probs) {
  const Eigen::Index n = q.cols();
  v.resize(n);
  if (probs) probs->resize(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const QPair pair{q(0, i), q(1, i)};
    v[i] = soft_value(pair, epsilon);
    if (probs) {
      const auto p = boltzmann_policy(pair, epsilon);
      (*probs)(0, i) = p.p_stop;
      (*probs)(1, i) = p.p_continue;
    }
  }
}

namespace {

void check_iq_batch(const IqBatchView& b) {
  if (b.q_s == nullptr || b.q_next == nullptr) throw std::invalid_argument("iq_loss: missing Q blocks");
  const auto n = static_cast<std::size_t>(b.q_s->cols());
  if (n == 0) throw std::invalid_argument("iq_loss: empty batch");
  if (b.q_s->rows() != 2 || b.q_next->rows() != 2 || static_cast<std::size_t>(b.q_next->cols()) != n ||
      b.actions.size() != n || b.weights.size() != n) {
    throw std::invalid_argument("iq_loss: inconsistent batch shapes");
  }
}

}  // namespace

IqLoss iq_loss(const IqBatchView& b, double epsilon, double gamma, const Chi2Phi& phi,
               std::span<const char> synthetic) {
  check_iq_batch(b);
  const Eigen::Index n = b.q_s->cols();
  Eigen::VectorXd v_s, v_next;
  Eigen::MatrixXd p_s, p_next;
  soft_values(*b.q_s, epsilon, v_s, &p_s);
  soft_values(*b.q_next, epsilon, v_next, &p_next);

  double wsum = 0.0;
  for (double w : b.weights) wsum += w;
  if (!(wsum > 0.0)) throw std::invalid_argument("iq_loss: weights sum to zero");

  IqLoss out;
  out.d_q_s = Eigen::MatrixXd::Zero(2, n);
  out.d_q_next = Eigen::MatrixXd::Zero(2, n);
  double j_total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const int a = b.actions[ui];
    const double w = b.weights[ui] / wsum;
    // (1 - a) masks the successor: a stop record sees the zero cemetery value.
    const double vn = a == 1 ? v_next[i] : 0.0;
    const double x = (*b.q_s)(a, i) - gamma * vn;
    const double phi_x = phi.value(x);
    const double value_gap = v_s[i] - gamma * vn;
    const double f = phi_x - value_gap;
    out.iq_term += w * phi_x;
    out.value_term += w * value_gap;
    j_total += w * f;
    if (!synthetic.empty() && synthetic[ui]) out.fake_term += w * f;

    // dJ/dQ(s,a) from phi, dJ/dV(s) = -1, dJ/dV(s') = gamma (1 - phi'(x)).
    const double dphi = phi.derivative(x);
    out.d_q_s(a, i) -= w * dphi;
    out.d_q_s(0, i) += w * p_s(0, i);
    out.d_q_s(1, i) += w * p_s(1, i);
    if (a == 1) {
      const double dv_next = w * gamma * (1.0 - dphi);
      out.d_q_next(0, i) -= dv_next * p_next(0, i);
      out.d_q_next(1, i) -= dv_next * p_next(1, i);
    }
  }
  out.loss = -j_total;
  return out;
}

double fake_contribution(const IqBatchView& b, double epsilon, double gamma, const Chi2Phi& phi) {
  check_iq_batch(b);
  double total = 0.0;
  for (Eigen::Index i = 0; i < b.q_s->cols(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const int a = b.actions[ui];
    const double vn = a == 1 ? soft_value({(*b.q_next)(0, i), (*b.q_next)(1, i)}, epsilon) : 0.0;
    const double vs = soft_value({(*b.q_s)(0, i), (*b.q_s)(1, i)}, epsilon);
    const double x = (*b.q_s)(a, i) - gamma * vn;
    total += b.weights[ui] * (phi.value(x) - (vs - gamma * vn));
  }
  return total;
}

RegressionLoss masked_squared_error(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                                    std::span<const double> weights, std::span<const char> active) {
  const auto n = static_cast<std::size_t>(pred.cols());
  if (pred.rows() != target.rows() || pred.cols() != target.cols() || weights.size() != n || active.size() != n) {
    throw std::invalid_argument("masked_squared_error: inconsistent shapes");
  }
  RegressionLoss out;
  out.d_pred = Eigen::MatrixXd::Zero(pred.rows(), pred.cols());
  double wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (active[i]) wsum += weights[i];
  }
  if (!(wsum > 0.0)) return out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    const auto c = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd diff = pred.col(c) - target.col(c);
    const double w = weights[i] / wsum;
    out.loss += w * diff.squaredNorm();
    out.d_pred.col(c) = 2.0 * w * diff;
  }
  return out;
}

RegressionLoss cross_entropy_loss(const Eigen::MatrixXd& logits, std::span<const int> labels,
                                  std::span<const double> weights) {
  const auto n = static_cast<std::size_t>(logits.cols());
  if (logits.rows() != 2 || labels.size() != n || weights.size() != n) {
    throw std::invalid_argument("cross_entropy_loss: inconsistent shapes");
  }
  if (n == 0) throw std::invalid_argument("cross_entropy_loss: empty batch");
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  RegressionLoss out;
  out.d_pred = Eigen::MatrixXd::Zero(2, logits.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    const double hi = std::max(logits(0, c), logits(1, c));
    const double lse = hi + std::log(std::exp(logits(0, c) - hi) + std::exp(logits(1, c) - hi));
    const double w = weights[i] / wsum;
    out.loss += w * (lse - logits(labels[i], c));
    for (int k = 0; k < 2; ++k) {
      const double p = std::exp(logits(k, c) - lse);
      out.d_pred(k, c) = w * (p - (labels[i] == k ? 1.0 : 0.0));
    }
  }
  return out;
}

}  // namespace stoplab
