#pragma once

// Training objectives, each returning its value together with the gradient
// with respect to the network outputs it consumes. All are written as losses
// to minimise.

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace stoplab {

/// chi^2 choice of the concave link: phi(x) = x - x^2 / (4 c).
struct Chi2Phi {
  double c_reg = 0.5;
  double value(double x) const { return x - x * x / (4.0 * c_reg); }
  double derivative(double x) const { return 1.0 - x / (2.0 * c_reg); }
};

/// Inputs of the inverse soft-Q objective for one batch. Columns of q_s and
/// q_next are records; q_next columns of stop records are never read (the
/// cemetery has zero value). weight is 1 for expert records and the confidence
/// alpha (times any duplication multiplicity) otherwise.
struct IqBatchView {
  const Eigen::MatrixXd* q_s = nullptr;     // 2 x B: (Q(s,stop), Q(s,continue))
  const Eigen::MatrixXd* q_next = nullptr;  // 2 x B
  std::span<const int> actions;
  std::span<const double> weights;
};

struct IqLoss {
  double loss = 0.0;         // -J
  double iq_term = 0.0;      // weighted mean of phi(Q(s,a) - gamma a V(s'))
  double value_term = 0.0;   // weighted mean of V(s) - gamma a V(s')
  double fake_term = 0.0;    // share of J carried by the non-unit-weight records
  Eigen::MatrixXd d_q_s;
  Eigen::MatrixXd d_q_next;
};

/// -J with J = sum_i w_i [phi(Q(s_i,a_i) - gamma a_i V(s'_i)) - (V(s_i) - gamma a_i V(s'_i))] / sum_i w_i
/// and V the soft value at temperature eps. `synthetic` flags records whose
/// contribution is reported in fake_term (may be empty).
IqLoss iq_loss(const IqBatchView& batch, double epsilon, double gamma, const Chi2Phi& phi,
               std::span<const char> synthetic = {});

/// Unnormalised contribution sum_i alpha_i f_i of synthetic records, f_i being
/// the bracket of iq_loss. Used to state the confidence-mixture objective
/// J_CS = (sum_expert f + sum_fake alpha f) / (n_expert + sum_fake alpha).
double fake_contribution(const IqBatchView& synthetic_batch, double epsilon, double gamma, const Chi2Phi& phi);

struct RegressionLoss {
  double loss = 0.0;
  Eigen::MatrixXd d_pred;
};

/// Weighted mean over masked columns of the squared Euclidean error. A batch
/// with no active column has loss 0 and zero gradient.
RegressionLoss masked_squared_error(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                                    std::span<const double> weights, std::span<const char> active);

/// Mean softmax cross-entropy of 2-class logits against action labels.
RegressionLoss cross_entropy_loss(const Eigen::MatrixXd& logits, std::span<const int> labels,
                                  std::span<const double> weights);

/// Soft value and Boltzmann probabilities of every column of a 2 x B Q block.
void soft_values(const Eigen::MatrixXd& q, double epsilon, Eigen::VectorXd& v, Eigen::MatrixXd* probs = nullptr);

}  // namespace stoplab
