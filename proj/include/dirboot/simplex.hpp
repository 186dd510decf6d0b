#pragma once

// Dense two-phase tableau simplex with Bland's anti-cycling rule.
//
//   minimize    c' x
//   subject to  A_i x (<=, =, >=) b_i,   x >= 0
//
// Meant for small desk-scale programs (a few hundred rows): the
// bounded-Lipschitz distance LP and the reference solution for quantile
// regression.

#include <Eigen/Dense>

#include <vector>

namespace dirboot {

enum class ConstraintSense { kLessEqual, kEqual, kGreaterEqual };

struct LinearProgram {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  std::vector<ConstraintSense> sense;  // one per row of a
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

const char* to_string(LpStatus status);

struct LpSolution {
  LpStatus status = LpStatus::kIterationLimit;
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
};

struct SimplexOptions {
  double tolerance = 1e-9;
  int max_iterations = 200000;
};

LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options = {});

}  // namespace dirboot
