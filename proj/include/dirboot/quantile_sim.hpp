#pragma once

// Monte Carlo study of a monotone quantile treatment effect:
//
//   Y = (Delta / sqrt(n)) D U + Z'beta + U,   beta = (0, 1/sqrt2, 1/sqrt2),
//   D ~ Bern(1/2), Z = (1, Z1, Z2) with Z1, Z2 ~ N(0, 1), U ~ U[0, 1],
//
// so theta0(tau) = tau Delta / sqrt(n). H0: theta0 nondecreasing on the tau
// grid, tested with sqrt(n) ||theta_hat - Pi theta_hat|| and the threshold
// tangent-cone derivative estimate.

#include "dirboot/bootstrap.hpp"
#include "dirboot/convex.hpp"
#include "dirboot/grid_function.hpp"
#include "dirboot/inference.hpp"
#include "dirboot/projection_test.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace dirboot {

/// Outcome, binary treatment and covariates (intercept not included).
struct Dataset {
  Eigen::VectorXd y;
  Eigen::VectorXd treatment;
  Eigen::MatrixXd covariates;

  Eigen::Index size() const { return y.size(); }
  /// Columns [D, 1, covariates...]; the treatment coefficient is column 0.
  Eigen::MatrixXd design() const;
  void validate() const;
};

/// 0.2, 0.225, ..., 0.8.
Eigen::VectorXd default_tau_grid();

struct QuantileSimConfig {
  std::size_t n = 200;
  double delta = 0.0;
  Eigen::VectorXd tau_grid = default_tau_grid();
  std::size_t draws = 200;  // B
  std::size_t mc_reps = 500;
  EpsilonRule epsilon{1.0, 0.25};
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const;
};

/// Data for replication `rep`. The (D, Z, U) draw depends only on
/// (seed, n, rep), so designs are shared across Delta values.
Dataset simulate_dgp(const QuantileSimConfig& config, std::size_t rep);

struct QRFit {
  GridFunction theta_of_tau;             // treatment coefficient on the tau grid
  std::vector<Eigen::VectorXd> beta_of_tau;  // full coefficient vector per knot
  std::vector<double> objective;
  bool used_fallback = false;
};

/// Solves the weighted check-loss problem at every knot and verifies the
/// subgradient certificate. Weights are observation multiplicities.
QRFit qr_fit(const Dataset& data, const Eigen::VectorXd& tau_grid,
             const Eigen::VectorXd& weights = Eigen::VectorXd());

/// Pairs bootstrap of sqrt(n)(theta_hat* - theta_hat) on the tau grid. Draw b
/// resamples with derive_seed(seed, {kBootstrap, b}); a rank-deficient
/// resample is redrawn once from derive_seed(seed, {kBootstrap, b, 1}).
BootstrapEnsemble qr_bootstrap_ensemble(const Dataset& data, const Eigen::VectorXd& tau_grid,
                                        std::size_t draws, std::uint64_t seed,
                                        std::size_t workers = 1);

/// The statistic and the bootstrap draws; critical values for any (C, kappa,
/// alpha) follow without refitting.
struct MonotonicityEvidence {
  BootstrapEnsemble ensemble;
  ConvexSet cone;
  double statistic;
};

MonotonicityEvidence monotonicity_evidence(const Dataset& data, const QuantileSimConfig& config,
                                           std::uint64_t bootstrap_seed);

EmpiricalLaw monotonicity_law(const MonotonicityEvidence& evidence, double epsilon,
                              SupMode mode = SupMode::kThreshold);

TestReport monotonicity_test(const MonotonicityEvidence& evidence, const EpsilonRule& epsilon,
                             double alpha, SupMode mode = SupMode::kThreshold);

/// Bootstrap seed derive_seed(config.seed, {kBootstrap, n}).
TestReport monotonicity_test(const Dataset& data, const QuantileSimConfig& config);

// Tables ---------------------------------------------------------------

struct MonteCarloPlan {
  std::vector<std::size_t> sample_sizes{200};
  std::vector<double> deltas{0.0, 1.0, 2.0};
  std::vector<EpsilonRule> bandwidths{{1.0, 0.25}, {1.0, 1.0 / 3.0}, {0.01, 0.25}, {0.01, 1.0 / 3.0}};
  std::vector<double> alphas{0.1, 0.05, 0.01};
  Eigen::VectorXd tau_grid = default_tau_grid();
  std::size_t draws = 200;
  std::size_t mc_reps = 500;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool theoretical = true;
  std::size_t theoretical_draws = 100000;  // R

  void validate() const;
};

struct TableCell {
  std::string table;  // "size" (Delta >= 0) or "power"
  std::size_t n = 0;  // 0 for the limit rows
  bool theoretical = false;
  double scale = 0.0;  // C
  double kappa = 0.0;
  double alpha = 0.0;
  double delta = 0.0;
  double rejection_rate = 0.0;
  double std_error = 0.0;
  std::size_t reps = 0;
  std::size_t failures = 0;
};

struct ReplicationFailure {
  std::size_t n;
  std::size_t rep;
  std::string message;
};

struct MonteCarloResult {
  std::vector<TableCell> cells;
  std::vector<ReplicationFailure> failures;
};

/// Replications run in parallel; a replication draws one design and one set
/// of bootstrap resamples and reuses them for every Delta, so cells are
/// computed under common random numbers. Output does not depend on workers.
MonteCarloResult run_monte_carlo(const MonteCarloPlan& plan);

// Limit rows -----------------------------------------------------------

enum class CovarianceSource { kAnalytic, kSimulatedQR };

struct TheoreticalOptions {
  std::size_t draws = 100000;  // R
  CovarianceSource source = CovarianceSource::kAnalytic;
  std::size_t oracle_n = 100000;   // N, simulated-QR source only
  std::size_t oracle_reps = 2000;  // fits used to estimate the covariance
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  Eigen::VectorXd tau_grid = default_tau_grid();
};

/// Covariance of the limit G0 of sqrt(n)(theta_hat - theta0) on the grid.
/// Analytic: 4 (min(s, t) - s t). Simulated: empirical covariance of
/// sqrt(N) theta_hat over independent Delta = 0 fits at n = N.
Eigen::MatrixXd limit_covariance(const TheoreticalOptions& options);

/// P(phi'(G0 + tau Delta) > c_{1-alpha}), c the (1-alpha) quantile of
/// phi'(G0), phi'(h) = ||h - Pi_mono h|| (the tangent cone at theta0 = 0 is
/// the whole monotone cone).
double theoretical_local_rejection(double delta, double alpha, const TheoreticalOptions& options);

/// Same for several (Delta, alpha) pairs from one set of limit draws;
/// entry d * alphas.size() + a belongs to (deltas[d], alphas[a]).
std::vector<double> theoretical_local_rejection(const std::vector<double>& deltas,
                                                const std::vector<double>& alphas,
                                                const TheoreticalOptions& options);

}  // namespace dirboot
