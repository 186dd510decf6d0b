#pragma once

// Weighted linear quantile regression
//
//   minimize_beta  sum_i w_i rho_tau(y_i - x_i' beta),   rho_tau(u) = (tau - 1{u <= 0}) u.
//
// QuantileRegressionSolver walks the vertices of this LP directly: a vertex
// is a set of p "basic" observations fitted exactly, an edge frees one of
// them, and the step along an edge is the exact minimizer of the piecewise
// linear objective (weighted median of the residual breakpoints). Consecutive
// solves warm-start from the previous basis, which makes a sweep over a tau
// grid cheap. Degenerate endpoints are certified through the dual; the dense
// simplex is the fallback and the reference.

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace dirboot {

class RankDeficientDesign : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

double check_loss(const Eigen::VectorXd& residuals, const Eigen::VectorXd& weights, double tau);

struct QuantileFit {
  Eigen::VectorXd beta;
  double objective = 0.0;
  std::vector<Eigen::Index> basis;  // observation indices fitted exactly
  int iterations = 0;
  bool used_fallback = false;
};

class QuantileRegressionSolver {
 public:
  /// Rows with zero weight are ignored. Weights default to one.
  QuantileRegressionSolver(Eigen::MatrixXd design, Eigen::VectorXd response,
                           Eigen::VectorXd weights = Eigen::VectorXd());

  QuantileFit solve(double tau);

  Eigen::Index observations() const { return x_.rows(); }
  Eigen::Index regressors() const { return x_.cols(); }

 private:
  void initial_basis();
  void refresh(const std::vector<Eigen::Index>& basis);
  void refit();
  void exchange(Eigen::Index slot, Eigen::Index entering);
  bool certify(double tau) const;
  QuantileFit fallback(double tau) const;

  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Eigen::VectorXd w_;
  double zero_tol_;

  std::vector<Eigen::Index> basis_;
  std::vector<bool> in_basis_;
  Eigen::MatrixXd basis_inverse_;
  int updates_ = 0;  // rank-one updates since the last factorization
  Eigen::VectorXd beta_;
  Eigen::VectorXd residual_;
};

/// Reference solution through the dense simplex (residual-split LP).
QuantileFit solve_quantile_lp(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                              const Eigen::VectorXd& weights, double tau);

/// First-order optimality necessary condition for designs with an intercept:
/// W_neg <= tau * W <= W_neg + W_zero, with W_neg/W_zero the weight of
/// strictly negative / zero residuals (|r| <= zero_tol).
bool subgradient_balance(const Eigen::VectorXd& residuals, const Eigen::VectorXd& weights,
                         double tau, double zero_tol = 1e-9);

}  // namespace dirboot
