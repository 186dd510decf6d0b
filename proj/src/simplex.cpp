#include "dirboot/simplex.hpp"

#include <limits>
#include <stdexcept>

namespace dirboot {

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kIterationLimit: return "iteration limit";
  }
  return "unknown";
}

namespace {

class Tableau {
 public:
  Tableau(Eigen::MatrixXd body, Eigen::VectorXd rhs, std::vector<Eigen::Index> basis,
          double tol)
      : body_(std::move(body)), rhs_(std::move(rhs)), basis_(std::move(basis)), tol_(tol) {}

  // Reduced costs for `cost` given the current basis.
  void price(const Eigen::VectorXd& cost) {
    reduced_ = cost;
    objective_ = 0.0;
    for (Eigen::Index r = 0; r < body_.rows(); ++r) {
      const double cb = cost(basis_[r]);
      if (cb != 0.0) {
        reduced_ -= cb * body_.row(r).transpose();
        objective_ += cb * rhs_(r);
      }
    }
  }

  // Runs Bland-rule pivots on columns [0, allowed). Returns status.
  LpStatus iterate(Eigen::Index allowed, int max_iterations, int& iterations) {
    while (true) {
      if (iterations >= max_iterations) return LpStatus::kIterationLimit;
      Eigen::Index entering = -1;
      for (Eigen::Index j = 0; j < allowed; ++j) {
        if (reduced_(j) < -tol_) {
          entering = j;
          break;
        }
      }
      if (entering < 0) return LpStatus::kOptimal;

      Eigen::Index leaving = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index r = 0; r < body_.rows(); ++r) {
        const double coef = body_(r, entering);
        if (coef <= tol_) continue;
        const double ratio = rhs_(r) / coef;
        if (ratio < best - tol_ ||
            (ratio <= best + tol_ && leaving >= 0 && basis_[r] < basis_[leaving])) {
          if (ratio < best) best = ratio;
          leaving = r;
        }
      }
      if (leaving < 0) return LpStatus::kUnbounded;
      pivot(leaving, entering);
      ++iterations;
    }
  }

  void pivot(Eigen::Index r, Eigen::Index col) {
    const double p = body_(r, col);
    body_.row(r) /= p;
    rhs_(r) /= p;
    for (Eigen::Index i = 0; i < body_.rows(); ++i) {
      if (i == r) continue;
      const double f = body_(i, col);
      if (f != 0.0) {
        body_.row(i) -= f * body_.row(r);
        rhs_(i) -= f * rhs_(r);
      }
    }
    const double f = reduced_(col);
    if (f != 0.0) {
      reduced_ -= f * body_.row(r).transpose();
      objective_ += f * rhs_(r);
    }
    basis_[r] = col;
  }

  Eigen::MatrixXd& body() { return body_; }
  Eigen::VectorXd& rhs() { return rhs_; }
  std::vector<Eigen::Index>& basis() { return basis_; }
  double objective() const { return objective_; }

 private:
  Eigen::MatrixXd body_;
  Eigen::VectorXd rhs_;
  std::vector<Eigen::Index> basis_;
  Eigen::VectorXd reduced_;
  double objective_ = 0.0;
  double tol_;
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options) {
  const Eigen::Index m = lp.a.rows();
  const Eigen::Index n = lp.a.cols();
  if (lp.b.size() != m || static_cast<Eigen::Index>(lp.sense.size()) != m || lp.c.size() != n) {
    throw std::invalid_argument("solve_lp: inconsistent program dimensions");
  }

  // Normalize rows to b >= 0 and count auxiliary columns.
  Eigen::MatrixXd a = lp.a;
  Eigen::VectorXd b = lp.b;
  std::vector<ConstraintSense> sense = lp.sense;
  Eigen::Index n_slack = 0;
  Eigen::Index n_art = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (b(i) < 0.0) {
      a.row(i) *= -1.0;
      b(i) = -b(i);
      if (sense[i] == ConstraintSense::kLessEqual) {
        sense[i] = ConstraintSense::kGreaterEqual;
      } else if (sense[i] == ConstraintSense::kGreaterEqual) {
        sense[i] = ConstraintSense::kLessEqual;
      }
    }
    if (sense[i] != ConstraintSense::kEqual) ++n_slack;
    if (sense[i] != ConstraintSense::kLessEqual) ++n_art;
  }

  const Eigen::Index structural = n + n_slack;
  const Eigen::Index total = structural + n_art;
  Eigen::MatrixXd body = Eigen::MatrixXd::Zero(m, total);
  body.leftCols(n) = a;
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  Eigen::Index slack_col = n;
  Eigen::Index art_col = structural;
  for (Eigen::Index i = 0; i < m; ++i) {
    switch (sense[i]) {
      case ConstraintSense::kLessEqual:
        body(i, slack_col) = 1.0;
        basis[i] = slack_col++;
        break;
      case ConstraintSense::kGreaterEqual:
        body(i, slack_col++) = -1.0;
        body(i, art_col) = 1.0;
        basis[i] = art_col++;
        break;
      case ConstraintSense::kEqual:
        body(i, art_col) = 1.0;
        basis[i] = art_col++;
        break;
    }
  }

  Tableau tab(std::move(body), b, std::move(basis), options.tolerance);
  LpSolution out;

  if (n_art > 0) {
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(total);
    phase1.tail(n_art).setOnes();
    tab.price(phase1);
    const LpStatus s = tab.iterate(total, options.max_iterations, out.iterations);
    if (s == LpStatus::kIterationLimit) {
      out.status = s;
      return out;
    }
    const double scale = 1.0 + b.lpNorm<Eigen::Infinity>();
    if (tab.objective() > options.tolerance * scale) {
      out.status = LpStatus::kInfeasible;
      return out;
    }
    // Drive zero-level artificials out of the basis where possible; rows
    // where that fails are redundant and stay inert.
    for (Eigen::Index r = 0; r < m; ++r) {
      if (tab.basis()[r] < structural) continue;
      for (Eigen::Index j = 0; j < structural; ++j) {
        if (std::abs(tab.body()(r, j)) > options.tolerance) {
          tab.pivot(r, j);
          break;
        }
      }
    }
  }

  Eigen::VectorXd cost = Eigen::VectorXd::Zero(total);
  cost.head(n) = lp.c;
  tab.price(cost);
  out.status = tab.iterate(structural, options.max_iterations, out.iterations);
  out.x = Eigen::VectorXd::Zero(n);
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index j = tab.basis()[r];
    if (j < n) out.x(j) = tab.rhs()(r);
  }
  out.objective = lp.c.dot(out.x);
  return out;
}

}  // namespace dirboot
