#pragma once

// Catalog of directionally differentiable functionals phi, their exact
// directional derivatives, and data-driven derivative estimators.
//
// Parameter layouts:
//   AbsMean         theta in R
//   MaxCoord        theta in R^d
//   StochDom        theta = (F1 on grid, F2 on grid) stacked, length 2m
//   ConvexDistance  theta in the set's ambient space

#include "dirboot/convex.hpp"
#include "dirboot/empirical_law.hpp"
#include "dirboot/grid_function.hpp"
#include "dirboot/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dirboot {

enum class FunctionalKind { kAbsMean, kMaxCoord, kStochDom, kConvexDistance };

const char* to_string(FunctionalKind kind);

class FunctionalSpec {
 public:
  static FunctionalSpec abs_mean();
  static FunctionalSpec max_coord(Eigen::Index dimension);
  /// Weight function w sampled at the knots; the GridFunction weights are the
  /// quadrature cells. w must be nonnegative.
  static FunctionalSpec stoch_dom(GridFunction weight);
  static FunctionalSpec convex_distance(ConvexSet set);

  FunctionalKind kind() const { return kind_; }
  /// Length of the parameter vector theta.
  Eigen::Index parameter_dimension() const;
  const GridFunction& dominance_weight() const { return weight_; }
  const ConvexSet& set() const { return *set_; }

  /// Norm on directions used by the Lipschitz certificates:
  /// |h| for AbsMean, sup-norm for MaxCoord, ||h1||_inf + ||h2||_inf for
  /// StochDom, the set's weighted norm for ConvexDistance.
  double direction_norm(const Eigen::VectorXd& h) const;
  /// Lipschitz constant of phi under direction_norm.
  double lipschitz_constant() const;

  void check_dimension(const Eigen::VectorXd& theta, const char* where) const;

 private:
  FunctionalSpec(FunctionalKind kind, Eigen::Index dimension);

  FunctionalKind kind_;
  Eigen::Index dimension_;
  GridFunction weight_;
  std::shared_ptr<const ConvexSet> set_;
};

double eval_functional(const FunctionalSpec& spec, const Eigen::VectorXd& theta);

/// Exact population directional derivative phi'_{theta0}(h).
double eval_derivative(const FunctionalSpec& spec, const Eigen::VectorXd& theta0,
                       const Eigen::VectorXd& h);

enum class DerivativeMode { kAnalytic, kNumerical };

/// Tuning constants. Unset values take their n-dependent defaults:
/// kappa_n = tau_n = epsilon_n = n^{-1/3}, step s_n = n^{-1/4}.
struct DerivativeTuning {
  DerivativeMode mode = DerivativeMode::kAnalytic;
  std::optional<double> kappa;        // selection slack (AbsMean, MaxCoord)
  std::optional<double> contact_tol;  // contact-set tolerance (StochDom)
  std::optional<double> step;         // numerical differentiation step
  std::optional<double> epsilon;      // neighborhood radius (ConvexDistance)
  SupMode sup_mode = SupMode::kThreshold;
};

struct TuningRecord {
  std::string mode;
  double value = 0.0;  // the constant actually used
};

struct DerivativeEstimate {
  std::function<double(const Eigen::VectorXd&)> evaluate;
  TuningRecord tuning;
  double lipschitz_bound = 1.0;
  /// Selected coordinates / contact knots / active constraints, when relevant.
  std::vector<Eigen::Index> selected;

  double operator()(const Eigen::VectorXd& h) const { return evaluate(h); }
};

DerivativeEstimate estimate_derivative(const FunctionalSpec& spec, const EstimateBundle& bundle,
                                       const DerivativeTuning& tuning = {});

/// R draws of max(G + lambda) - max(lambda) with G ~ N(0, covariance).
EmpiricalLaw local_limit_law_max(const Eigen::VectorXd& lambda,
                                 const Eigen::MatrixXd& covariance, std::size_t draws,
                                 std::uint64_t seed, std::size_t workers = 1);

/// A factor L with L L' = covariance. Rank-deficient PSD input is fine;
/// asymmetric or indefinite input throws.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& covariance);

struct ProbeRow {
  std::size_t shift_id = 0;
  double bl_distance = 0.0;
  double noise_floor = 0.0;
  bool indistinguishable = false;  // distance below the noise floor
};

using LimitSampler = std::function<Eigen::VectorXd(RandomStream&)>;

/// For each shift a0: BL distance between the law of phi'(G + a0) - phi'(a0)
/// and the law of phi'(G), each from R draws with common random numbers.
std::vector<ProbeRow> invariance_probe(const std::function<double(const Eigen::VectorXd&)>& derivative,
                                       const LimitSampler& sampler,
                                       const std::vector<Eigen::VectorXd>& shifts,
                                       std::size_t draws, std::uint64_t seed,
                                       std::size_t workers = 1);

}  // namespace dirboot
