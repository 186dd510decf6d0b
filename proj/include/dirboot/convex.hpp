#pragma once

// Closed convex sets in a weighted Euclidean space (the grid version of H),
// metric projections onto them and onto their tangent cones, and the
// distance statistic r_n ||theta_hat - Pi theta_hat||.

#include "dirboot/grid_function.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace dirboot {

enum class SetKind { kNonpositiveOrthant, kBox, kMonotoneCone, kHalfspaces };

const char* to_string(SetKind kind);

/// A closed convex set together with the diagonal metric (weights) of the
/// ambient space. Constraint indices:
///   orthant      i      : x_i <= 0
///   box          i      : x_i >= lower_i,   d + i : x_i <= upper_i
///   monotone     i      : x_i <= x_{i+1}
///   halfspaces   i      : a_i' x <= b_i
class ConvexSet {
 public:
  static ConvexSet nonpositive_orthant(Eigen::Index dimension);
  static ConvexSet nonpositive_orthant(Eigen::VectorXd weights);
  static ConvexSet box(Eigen::VectorXd lower, Eigen::VectorXd upper);
  static ConvexSet box(Eigen::VectorXd lower, Eigen::VectorXd upper, Eigen::VectorXd weights);
  /// Nondecreasing functions on a grid, with the grid's quadrature weights.
  static ConvexSet monotone_cone(Eigen::VectorXd weights);
  static ConvexSet monotone_cone(const GridFunction& grid_template);
  /// Rows of `normals` are a_i'. `feasible_point` certifies nonemptiness.
  static ConvexSet halfspaces(Eigen::MatrixXd normals, Eigen::VectorXd offsets,
                              const Eigen::VectorXd& feasible_point);
  static ConvexSet halfspaces(Eigen::MatrixXd normals, Eigen::VectorXd offsets,
                              const Eigen::VectorXd& feasible_point, Eigen::VectorXd weights);

  SetKind kind() const { return kind_; }
  Eigen::Index dimension() const { return weights_.size(); }
  const Eigen::VectorXd& weights() const { return weights_; }
  Eigen::Index constraint_count() const;

  const Eigen::VectorXd& lower() const { return lower_; }
  const Eigen::VectorXd& upper() const { return upper_; }
  const Eigen::MatrixXd& normals() const { return normals_; }
  const Eigen::VectorXd& offsets() const { return offsets_; }

  /// Per-constraint slack; nonnegative iff the point satisfies it.
  Eigen::VectorXd slack(const Eigen::VectorXd& point) const;
  bool contains(const Eigen::VectorXd& point, double tol = 1e-9) const;

 private:
  ConvexSet(SetKind kind, Eigen::VectorXd weights);
  void check_point(const Eigen::VectorXd& point, const char* where) const;

  SetKind kind_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  Eigen::MatrixXd normals_;
  Eigen::VectorXd offsets_;
};

struct ProjectionOptions {
  double tolerance = 1e-10;
  int max_iterations = 100000;
};

/// Raised when alternating projections fail to settle within the cap.
class ProjectionFailure : public std::runtime_error {
 public:
  ProjectionFailure(const std::string& what, Eigen::VectorXd last_iterate, double residual)
      : std::runtime_error(what), last_iterate_(std::move(last_iterate)), residual_(residual) {}
  const Eigen::VectorXd& last_iterate() const { return last_iterate_; }
  double residual() const { return residual_; }

 private:
  Eigen::VectorXd last_iterate_;
  double residual_;
};

/// Pi_Lambda(point) under the set's weighted norm.
Eigen::VectorXd project(const ConvexSet& set, const Eigen::VectorXd& point,
                        const ProjectionOptions& options = {});
GridFunction project(const ConvexSet& set, const GridFunction& point,
                     const ProjectionOptions& options = {});

/// Weighted norm of point - Pi_Lambda(point).
double distance_to_set(const ConvexSet& set, const Eigen::VectorXd& point,
                       const ProjectionOptions& options = {});

/// r_n * ||theta_hat - Pi_Lambda theta_hat||_H.
double distance_statistic(const EstimateBundle& bundle, const ConvexSet& set,
                          const ProjectionOptions& options = {});

/// Tangent cone of the base set at a point, represented by its binding
/// constraints: T = { h : constraint i holds for h through the origin, i in active }.
struct ConeSpec {
  ConvexSet base;
  std::vector<Eigen::Index> active;
};

/// Constraints with slack <= activity_tol at `point` (which must lie within
/// activity_tol of the set).
ConeSpec tangent_cone(const ConvexSet& set, const Eigen::VectorXd& point, double activity_tol);

Eigen::VectorXd project_tangent(const ConeSpec& cone, const Eigen::VectorXd& h,
                                const ProjectionOptions& options = {});

/// ||h - Pi_T h|| in the base set's metric.
double cone_distance(const ConeSpec& cone, const Eigen::VectorXd& h,
                     const ProjectionOptions& options = {});

enum class SupMode { kThreshold, kSupSearch };

/// Estimate of the derivative ||h - Pi_{T_theta0} h|| from the tangent cones
/// of points within epsilon of Pi_Lambda theta_hat.
///   kThreshold: cone of constraints with slack <= epsilon at Pi_Lambda theta_hat.
///   kSupSearch: max over activity sets reachable by some theta in Lambda with
///               ||theta - Pi_Lambda theta_hat|| <= epsilon (exhaustive up to
///               12 candidate constraints, greedy beyond).
double derivative_sup_estimate(const ConvexSet& set, const EstimateBundle& bundle,
                               double epsilon, const Eigen::VectorXd& h,
                               SupMode mode = SupMode::kThreshold,
                               const ProjectionOptions& options = {});

/// Sup-search with the projected point and candidate constraints precomputed,
/// for evaluating many directions h against one estimate.
class SupSearchEstimator {
 public:
  SupSearchEstimator(ConvexSet set, Eigen::VectorXd projected_point, double epsilon,
                     ProjectionOptions options = {});
  double operator()(const Eigen::VectorXd& h) const;
  const std::vector<Eigen::Index>& candidates() const { return candidates_; }

 private:
  bool reachable(const std::vector<Eigen::Index>& subset) const;

  ConvexSet set_;
  Eigen::VectorXd point_;
  double epsilon_;
  ProjectionOptions options_;
  std::vector<Eigen::Index> candidates_;
  bool exhaustive_ = false;
  std::vector<std::vector<Eigen::Index>> maximal_subsets_;  // exhaustive case only
};

/// Distance from `point` to the face of the set on which every constraint in
/// `subset` binds (infinity when that face is empty).
double distance_to_face(const ConvexSet& set, const Eigen::VectorXd& point,
                        const std::vector<Eigen::Index>& subset,
                        const ProjectionOptions& options = {});

}  // namespace dirboot
