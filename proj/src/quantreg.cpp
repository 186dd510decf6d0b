#include "dirboot/quantreg.hpp"

#include "dirboot/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace dirboot {

double check_loss(const Eigen::VectorXd& residuals, const Eigen::VectorXd& weights, double tau) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < residuals.size(); ++i) {
    const double r = residuals(i);
    acc += weights(i) * (r > 0.0 ? tau * r : (tau - 1.0) * r);
  }
  return acc;
}

bool subgradient_balance(const Eigen::VectorXd& residuals, const Eigen::VectorXd& weights,
                         double tau, double zero_tol) {
  double negative = 0.0;
  double zero = 0.0;
  for (Eigen::Index i = 0; i < residuals.size(); ++i) {
    if (std::abs(residuals(i)) <= zero_tol) {
      zero += weights(i);
    } else if (residuals(i) < 0.0) {
      negative += weights(i);
    }
  }
  const double target = tau * weights.sum();
  const double slack = 1e-9 * (1.0 + weights.sum());
  return negative <= target + slack && target <= negative + zero + slack;
}

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("quantile regression: tau must lie in (0,1), got " +
                                std::to_string(tau));
  }
}

}  // namespace

QuantileRegressionSolver::QuantileRegressionSolver(Eigen::MatrixXd design,
                                                   Eigen::VectorXd response,
                                                   Eigen::VectorXd weights) {
  const Eigen::Index n = design.rows();
  if (response.size() != n) {
    throw std::invalid_argument("quantile regression: response and design differ in rows");
  }
  if (weights.size() == 0) weights = Eigen::VectorXd::Ones(n);
  if (weights.size() != n) {
    throw std::invalid_argument("quantile regression: weights and design differ in rows");
  }
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (weights(i) < 0.0 || !std::isfinite(weights(i))) {
      throw std::invalid_argument("quantile regression: observation weights must be nonnegative");
    }
    if (!std::isfinite(response(i)) || !design.row(i).allFinite()) {
      throw std::invalid_argument("quantile regression: non-finite data in row " +
                                  std::to_string(i));
    }
    if (weights(i) > 0.0) ++kept;
  }
  x_.resize(kept, design.cols());
  y_.resize(kept);
  w_.resize(kept);
  for (Eigen::Index i = 0, k = 0; i < n; ++i) {
    if (weights(i) > 0.0) {
      x_.row(k) = design.row(i);
      y_(k) = response(i);
      w_(k) = weights(i);
      ++k;
    }
  }
  zero_tol_ = 1e-11 * (1.0 + (kept > 0 ? y_.lpNorm<Eigen::Infinity>() : 0.0));
}

void QuantileRegressionSolver::initial_basis() {
  const Eigen::Index p = x_.cols();
  std::vector<Eigen::VectorXd> directions;
  std::vector<Eigen::Index> basis;
  for (Eigen::Index i = 0; i < x_.rows() && static_cast<Eigen::Index>(basis.size()) < p; ++i) {
    Eigen::VectorXd v = x_.row(i).transpose();
    const double scale = v.norm();
    if (scale == 0.0) continue;
    for (const auto& q : directions) v -= q.dot(v) * q;
    if (v.norm() > 1e-9 * scale) {
      directions.push_back(v.normalized());
      basis.push_back(i);
    }
  }
  if (static_cast<Eigen::Index>(basis.size()) < p) {
    throw RankDeficientDesign("quantile regression: design has rank " +
                              std::to_string(basis.size()) + " < " + std::to_string(p) +
                              " regressors on the weighted sample");
  }
  refresh(basis);
}

void QuantileRegressionSolver::refresh(const std::vector<Eigen::Index>& basis) {
  const Eigen::Index p = x_.cols();
  Eigen::MatrixXd rows(p, p);
  Eigen::VectorXd fitted(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    rows.row(k) = x_.row(basis[static_cast<std::size_t>(k)]);
    fitted(k) = y_(basis[static_cast<std::size_t>(k)]);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(rows);
  if (!lu.isInvertible()) throw RankDeficientDesign("quantile regression: singular basis");
  basis_ = basis;
  in_basis_.assign(static_cast<std::size_t>(x_.rows()), false);
  for (Eigen::Index i : basis_) in_basis_[static_cast<std::size_t>(i)] = true;
  basis_inverse_ = lu.inverse();
  updates_ = 0;
  refit();
}

void QuantileRegressionSolver::refit() {
  Eigen::VectorXd fitted(x_.cols());
  for (std::size_t k = 0; k < basis_.size(); ++k) fitted(static_cast<Eigen::Index>(k)) = y_(basis_[k]);
  beta_.noalias() = basis_inverse_ * fitted;
  residual_ = y_;
  residual_.noalias() -= x_ * beta_;
  for (Eigen::Index i : basis_) residual_(i) = 0.0;
}

void QuantileRegressionSolver::exchange(Eigen::Index slot, Eigen::Index entering) {
  constexpr int kRefactorEvery = 32;
  const auto j = static_cast<std::size_t>(slot);
  const Eigen::RowVectorXd z = x_.row(entering) * basis_inverse_;
  const double pivot = z(slot);
  if (updates_ >= kRefactorEvery || !(std::abs(pivot) > 1e-10)) {
    std::vector<Eigen::Index> next = basis_;
    next[j] = entering;
    refresh(next);
    return;
  }
  // Row `slot` of the basis matrix becomes x_entering': rank-one update of the inverse.
  Eigen::RowVectorXd shift = z;
  shift(slot) -= 1.0;
  const Eigen::VectorXd column = basis_inverse_.col(slot);
  basis_inverse_.noalias() -= (column / pivot) * shift;
  in_basis_[static_cast<std::size_t>(basis_[j])] = false;
  in_basis_[static_cast<std::size_t>(entering)] = true;
  basis_[j] = entering;
  ++updates_;
  refit();
}

bool QuantileRegressionSolver::certify(double tau) const {
  // Find xi_k in [tau-1, tau] on the zero-residual set Z with
  // sum_Z w_k xi_k x_k = -sum_{r != 0} w_i psi_i x_i.
  const Eigen::Index p = x_.cols();
  std::vector<Eigen::Index> zero_set;
  Eigen::VectorXd target = Eigen::VectorXd::Zero(p);
  for (Eigen::Index i = 0; i < x_.rows(); ++i) {
    if (in_basis_[static_cast<std::size_t>(i)] || std::abs(residual_(i)) <= zero_tol_) {
      zero_set.push_back(i);
    } else {
      const double psi = residual_(i) > 0.0 ? tau : tau - 1.0;
      target -= w_(i) * psi * x_.row(i).transpose();
    }
  }
  const auto k = static_cast<Eigen::Index>(zero_set.size());
  LinearProgram lp;
  lp.a = Eigen::MatrixXd::Zero(p + k, k);
  lp.b.resize(p + k);
  lp.c = Eigen::VectorXd::Zero(k);
  lp.sense.assign(static_cast<std::size_t>(p + k), ConstraintSense::kLessEqual);
  // u_k = xi_k - (tau - 1) in [0, 1].
  Eigen::VectorXd rhs = target;
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::Index i = zero_set[static_cast<std::size_t>(c)];
    lp.a.block(0, c, p, 1) = w_(i) * x_.row(i).transpose();
    rhs -= (tau - 1.0) * w_(i) * x_.row(i).transpose();
    lp.a(p + c, c) = 1.0;
    lp.b(p + c) = 1.0;
  }
  lp.b.head(p) = rhs;
  for (Eigen::Index r = 0; r < p; ++r) lp.sense[static_cast<std::size_t>(r)] = ConstraintSense::kEqual;
  return solve_lp(lp).status == LpStatus::kOptimal;
}

QuantileFit QuantileRegressionSolver::fallback(double tau) const {
  QuantileFit fit = solve_quantile_lp(x_, y_, w_, tau);
  fit.used_fallback = true;
  return fit;
}

QuantileFit QuantileRegressionSolver::solve(double tau) {
  check_tau(tau);
  const Eigen::Index n = x_.rows();
  const Eigen::Index p = x_.cols();
  if (basis_.empty()) {
    initial_basis();
  } else if (updates_ > 0) {
    refresh(std::vector<Eigen::Index>(basis_));
  }

  const double opt_tol = 1e-11 * (1.0 + w_.sum());
  const int max_iterations = 50 + 10 * static_cast<int>(n);
  struct Breakpoint {
    double t;
    double slope_increase;
    Eigen::Index obs;
  };
  std::vector<Breakpoint> breaks;
  breaks.reserve(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> zero_rows;
  Eigen::VectorXd column(n);

  QuantileFit fit;
  for (int iter = 0;; ++iter) {
    if (iter >= max_iterations) return fallback(tau);
    // Gradient part from rows with nonzero residual: s = B^{-T} sum_i w_i psi_i x_i,
    // i.e. s_j = sum_i w_i psi_i z_ij with z_i' = x_i' B^{-1}.
    Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
    zero_rows.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_basis_[static_cast<std::size_t>(i)]) continue;
      if (std::abs(residual_(i)) <= zero_tol_) {
        zero_rows.push_back(i);
        continue;
      }
      const double psi = residual_(i) > 0.0 ? tau : tau - 1.0;
      v.noalias() += (w_(i) * psi) * x_.row(i).transpose();
    }
    const Eigen::VectorXd s = basis_inverse_.transpose() * v;
    Eigen::MatrixXd z_zero(static_cast<Eigen::Index>(zero_rows.size()), p);
    for (std::size_t k = 0; k < zero_rows.size(); ++k) {
      z_zero.row(static_cast<Eigen::Index>(k)) = x_.row(zero_rows[k]) * basis_inverse_;
    }

    // One-sided derivative of the objective along each of the 2p edges.
    double best_slope = 0.0;
    Eigen::Index best_j = -1;
    double best_sign = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double leaving_weight = w_(basis_[static_cast<std::size_t>(j)]);
      for (const double sign : {1.0, -1.0}) {
        double g = -sign * s(j) + leaving_weight * (sign < 0.0 ? tau : 1.0 - tau);
        for (std::size_t k = 0; k < zero_rows.size(); ++k) {
          const double a = sign * z_zero(static_cast<Eigen::Index>(k), j);
          g += w_(zero_rows[k]) * (a < 0.0 ? -tau * a : (1.0 - tau) * a);
        }
        if (g < best_slope - opt_tol) {
          best_slope = g;
          best_j = j;
          best_sign = sign;
        }
      }
    }

    if (best_j < 0) {
      if (!zero_rows.empty() && !certify(tau)) return fallback(tau);
      fit.iterations = iter;
      break;
    }

    // Exact line search: the slope rises by w_i |a_i| as residual i crosses
    // zero. Breakpoints come off a heap in order of t until the slope turns.
    column.noalias() = x_ * basis_inverse_.col(best_j);
    breaks.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_basis_[static_cast<std::size_t>(i)] || std::abs(residual_(i)) <= zero_tol_) continue;
      const double a = best_sign * column(i);
      if (a == 0.0) continue;
      const double t = residual_(i) / a;
      if (t > 0.0) breaks.push_back({t, w_(i) * std::abs(a), i});
    }
    const auto later = [](const Breakpoint& l, const Breakpoint& r) {
      return l.t > r.t || (l.t == r.t && l.obs > r.obs);
    };
    std::make_heap(breaks.begin(), breaks.end(), later);
    double slope = best_slope;
    Eigen::Index entering = -1;
    for (auto end = breaks.end(); end != breaks.begin(); --end) {
      std::pop_heap(breaks.begin(), end, later);
      const Breakpoint& b = *(end - 1);
      slope += b.slope_increase;
      if (slope >= 0.0) {
        entering = b.obs;
        break;
      }
    }
    if (entering < 0) {
      throw std::runtime_error("quantile regression: objective unbounded along an edge");
    }
    exchange(best_j, entering);
  }

  fit.beta = beta_;
  fit.objective = check_loss(residual_, w_, tau);
  fit.basis = basis_;
  return fit;
}

QuantileFit solve_quantile_lp(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                              const Eigen::VectorXd& weights, double tau) {
  check_tau(tau);
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  const Eigen::VectorXd w = weights.size() == 0 ? Eigen::VectorXd::Ones(n) : weights;
  if (response.size() != n || w.size() != n) {
    throw std::invalid_argument("solve_quantile_lp: inconsistent dimensions");
  }
  // Columns: beta+ (p), beta- (p), u (n), v (n);  X(beta+ - beta-) + u - v = y.
  LinearProgram lp;
  lp.a = Eigen::MatrixXd::Zero(n, 2 * p + 2 * n);
  lp.a.leftCols(p) = design;
  lp.a.middleCols(p, p) = -design;
  lp.a.middleCols(2 * p, n).setIdentity();
  lp.a.rightCols(n) = -Eigen::MatrixXd::Identity(n, n);
  lp.b = response;
  lp.c = Eigen::VectorXd::Zero(2 * p + 2 * n);
  lp.c.segment(2 * p, n) = tau * w;
  lp.c.tail(n) = (1.0 - tau) * w;
  lp.sense.assign(static_cast<std::size_t>(n), ConstraintSense::kEqual);
  const LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::kOptimal) {
    throw std::runtime_error(std::string("solve_quantile_lp: simplex ended with status ") +
                             to_string(sol.status));
  }
  QuantileFit fit;
  fit.beta = sol.x.head(p) - sol.x.segment(p, p);
  const Eigen::VectorXd residual = response - design * fit.beta;
  fit.objective = check_loss(residual, w, tau);
  fit.iterations = sol.iterations;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(residual(i)) <= 1e-9 * (1.0 + std::abs(response(i)))) fit.basis.push_back(i);
  }
  return fit;
}

}  // namespace dirboot
