#pragma once

// Weighted-grid representation of elements of the Hilbert space H and the
// estimate bundle (theta_hat, n, r_n) that the inference routines consume.

#include <Eigen/Dense>

#include <cstddef>

namespace dirboot {

/// Riemann cell widths for a strictly increasing grid: forward differences,
/// with the last cell repeating the previous width. A single knot gets 1.
Eigen::VectorXd riemann_weights(const Eigen::VectorXd& grid);

/// <a, b>_w = sum_i w_i a_i b_i for any pair of Eigen column expressions.
template <typename DerivedA, typename DerivedB, typename DerivedW>
typename DerivedA::Scalar weighted_inner(const Eigen::MatrixBase<DerivedA>& a,
                                         const Eigen::MatrixBase<DerivedB>& b,
                                         const Eigen::MatrixBase<DerivedW>& w) {
  return (w.array() * a.array() * b.array()).sum();
}

template <typename DerivedA, typename DerivedW>
typename DerivedA::Scalar weighted_norm(const Eigen::MatrixBase<DerivedA>& a,
                                        const Eigen::MatrixBase<DerivedW>& w) {
  using std::sqrt;
  return sqrt((w.array() * a.array().square()).sum());
}

/// A function sampled on strictly increasing knots with positive quadrature
/// weights. The inner product is <f, g> = sum_i w_i f_i g_i.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(Eigen::VectorXd grid, Eigen::VectorXd values, Eigen::VectorXd weights);
  /// Uses riemann_weights(grid).
  GridFunction(Eigen::VectorXd grid, Eigen::VectorXd values);

  /// Finite-dimensional vector embedded as knots 0..d-1 with unit weights, so
  /// the H-norm is the Euclidean norm.
  static GridFunction from_vector(Eigen::VectorXd values);

  const Eigen::VectorXd& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  Eigen::Index size() const { return values_.size(); }

  /// Same grid and weights, new values.
  GridFunction with_values(Eigen::VectorXd values) const;

  bool same_grid(const GridFunction& other) const;

 private:
  Eigen::VectorXd grid_;
  Eigen::VectorXd values_;
  Eigen::VectorXd weights_;
};

double inner(const GridFunction& f, const GridFunction& g);
double norm(const GridFunction& f);

/// theta_hat together with the sample size and the rate r_n = n^rate_exponent.
class EstimateBundle {
 public:
  EstimateBundle(GridFunction theta_hat, std::size_t sample_size, double rate_exponent = 0.5);
  EstimateBundle(Eigen::VectorXd theta_hat, std::size_t sample_size, double rate_exponent = 0.5);

  const GridFunction& theta_hat() const { return theta_hat_; }
  std::size_t sample_size() const { return sample_size_; }
  double rate_exponent() const { return rate_exponent_; }
  double rate() const { return rate_; }

 private:
  GridFunction theta_hat_;
  std::size_t sample_size_;
  double rate_exponent_;
  double rate_;
};

}  // namespace dirboot
