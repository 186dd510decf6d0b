#include "dirboot/quantile_sim.hpp"

#include "dirboot/functionals.hpp"
#include "dirboot/pava.hpp"
#include "dirboot/quantreg.hpp"
#include "dirboot/rng.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace dirboot {

namespace {

void check_tau_grid(const Eigen::VectorXd& grid, const char* where) {
  if (grid.size() == 0) throw std::invalid_argument(std::string(where) + ": tau grid is empty");
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    if (!(grid(k) > 0.0 && grid(k) < 1.0)) {
      throw std::invalid_argument(std::string(where) + ": tau grid must lie in (0,1)");
    }
    if (k > 0 && !(grid(k) > grid(k - 1))) {
      throw std::invalid_argument(std::string(where) + ": tau grid must be strictly increasing");
    }
  }
}

void check_alpha(double alpha, const char* where) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument(std::string(where) + ": alpha must lie in (0,1), got " +
                                std::to_string(alpha));
  }
}

Eigen::VectorXd treatment_path(const QRFit& fit) { return fit.theta_of_tau.values(); }

}  // namespace

Eigen::MatrixXd Dataset::design() const {
  const Eigen::Index n = size();
  Eigen::MatrixXd x(n, 2 + covariates.cols());
  x.col(0) = treatment;
  x.col(1).setOnes();
  if (covariates.cols() > 0) x.rightCols(covariates.cols()) = covariates;
  return x;
}

void Dataset::validate() const {
  if (y.size() == 0) throw std::invalid_argument("dataset: no observations");
  if (treatment.size() != y.size() || (covariates.cols() > 0 && covariates.rows() != y.size())) {
    throw std::invalid_argument("dataset: Y, D and Z have different lengths");
  }
  if (!y.allFinite() || !treatment.allFinite() || !covariates.allFinite()) {
    throw std::invalid_argument("dataset: non-finite entries");
  }
}

Eigen::VectorXd default_tau_grid() {
  Eigen::VectorXd grid(25);
  for (Eigen::Index k = 0; k < grid.size(); ++k) grid(k) = 0.2 + 0.025 * static_cast<double>(k);
  return grid;
}

void QuantileSimConfig::validate() const {
  if (n < 50) throw std::invalid_argument("quantile sim: n must be >= 50");
  if (draws < 2) throw std::invalid_argument("quantile sim: B must be >= 2");
  if (mc_reps < 1) throw std::invalid_argument("quantile sim: mc_reps must be >= 1");
  if (!std::isfinite(delta)) throw std::invalid_argument("quantile sim: Delta must be finite");
  check_tau_grid(tau_grid, "quantile sim");
  check_alpha(alpha, "quantile sim");
  (void)epsilon(n);
}

Dataset simulate_dgp(const QuantileSimConfig& config, std::size_t rep) {
  const auto n = static_cast<Eigen::Index>(config.n);
  RandomStream stream(derive_seed(config.seed, {stream_tag::kData, config.n, rep}));
  const double shift = config.delta / std::sqrt(static_cast<double>(config.n));
  const double loading = 1.0 / std::sqrt(2.0);
  Dataset data;
  data.y.resize(n);
  data.treatment.resize(n);
  data.covariates.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = stream.bernoulli(0.5) ? 1.0 : 0.0;
    const double z1 = stream.normal();
    const double z2 = stream.normal();
    const double u = stream.uniform();
    data.treatment(i) = d;
    data.covariates(i, 0) = z1;
    data.covariates(i, 1) = z2;
    data.y(i) = shift * d * u + loading * z1 + loading * z2 + u;
  }
  return data;
}

QRFit qr_fit(const Dataset& data, const Eigen::VectorXd& tau_grid, const Eigen::VectorXd& weights) {
  data.validate();
  check_tau_grid(tau_grid, "qr_fit");
  const Eigen::MatrixXd x = data.design();
  const Eigen::VectorXd w = weights.size() == 0 ? Eigen::VectorXd::Ones(data.size()) : weights;
  if (w.size() != data.size()) throw std::invalid_argument("qr_fit: weight count differs from n");

  QuantileRegressionSolver solver(x, data.y, w);
  QRFit fit;
  Eigen::VectorXd theta(tau_grid.size());
  const double zero_tol = 1e-9 * (1.0 + data.y.lpNorm<Eigen::Infinity>());
  for (Eigen::Index k = 0; k < tau_grid.size(); ++k) {
    const double tau = tau_grid(k);
    QuantileFit knot = solver.solve(tau);
    const Eigen::VectorXd residual = data.y - x * knot.beta;
    if (!subgradient_balance(residual, w, tau, zero_tol)) {
      throw std::runtime_error("qr_fit: optimality certificate failed at tau=" + std::to_string(tau));
    }
    theta(k) = knot.beta(0);
    fit.used_fallback = fit.used_fallback || knot.used_fallback;
    fit.objective.push_back(knot.objective);
    fit.beta_of_tau.push_back(std::move(knot.beta));
  }
  fit.theta_of_tau = GridFunction(tau_grid, std::move(theta));
  return fit;
}

BootstrapEnsemble qr_bootstrap_ensemble(const Dataset& data, const Eigen::VectorXd& tau_grid,
                                        std::size_t draws, std::uint64_t seed,
                                        std::size_t workers) {
  if (draws == 0) throw std::invalid_argument("qr_bootstrap_ensemble: B must be >= 1");
  const QRFit full = qr_fit(data, tau_grid);
  const Eigen::VectorXd theta = treatment_path(full);
  const auto n = static_cast<std::size_t>(data.size());
  const double rate = std::sqrt(static_cast<double>(n));
  const ResampleScheme scheme = ResampleScheme::multinomial();

  Eigen::MatrixXd out(static_cast<Eigen::Index>(draws), theta.size());
  std::vector<std::optional<std::string>> errors(draws);
  parallel_for(draws, workers, [&](std::size_t b) {
    try {
      std::optional<QRFit> star;
      for (std::uint64_t attempt = 0; attempt < 2 && !star; ++attempt) {
        RandomStream stream(attempt == 0
                                ? derive_seed(seed, {stream_tag::kBootstrap, b})
                                : derive_seed(seed, {stream_tag::kBootstrap, b, attempt}));
        try {
          star = qr_fit(data, tau_grid, draw_resample_weights(scheme, n, stream));
        } catch (const RankDeficientDesign&) {
          if (attempt == 1) throw;
        }
      }
      out.row(static_cast<Eigen::Index>(b)) = (rate * (treatment_path(*star) - theta)).transpose();
    } catch (const std::exception& e) {
      errors[b] = e.what();
    }
  });
  for (std::size_t b = 0; b < draws; ++b) {
    if (errors[b]) throw DrawFailure(b, *errors[b]);
  }

  SeedManifest manifest;
  manifest.master_seed = seed;
  manifest.scheme = "pairs-" + scheme.describe();
  manifest.draws = draws;
  manifest.sample_size = n;
  manifest.rate = rate;
  return BootstrapEnsemble(std::move(out), full.theta_of_tau, n, rate, std::move(manifest));
}

MonotonicityEvidence monotonicity_evidence(const Dataset& data, const QuantileSimConfig& config,
                                           std::uint64_t bootstrap_seed) {
  check_tau_grid(config.tau_grid, "monotonicity_evidence");
  BootstrapEnsemble ensemble =
      qr_bootstrap_ensemble(data, config.tau_grid, config.draws, bootstrap_seed, config.workers);
  ConvexSet cone = ConvexSet::monotone_cone(ensemble.theta_hat());
  const double statistic = ensemble.rate() * distance_to_set(cone, ensemble.theta_hat().values());
  return {std::move(ensemble), std::move(cone), statistic};
}

EmpiricalLaw monotonicity_law(const MonotonicityEvidence& evidence, double epsilon, SupMode mode) {
  return projection_law(evidence.ensemble, evidence.cone, epsilon, mode);
}

TestReport monotonicity_test(const MonotonicityEvidence& evidence, const EpsilonRule& epsilon,
                             double alpha, SupMode mode) {
  ProjectionTestOptions options;
  options.alpha = alpha;
  options.epsilon = epsilon;
  options.mode = mode;
  TestReport report = projection_test(evidence.ensemble, evidence.cone, options);
  report.seed_manifest.extra["C"] = std::to_string(epsilon.scale);
  report.seed_manifest.extra["kappa"] = std::to_string(epsilon.kappa);
  return report;
}

TestReport monotonicity_test(const Dataset& data, const QuantileSimConfig& config) {
  check_tau_grid(config.tau_grid, "monotonicity_test");
  check_alpha(config.alpha, "monotonicity_test");
  const auto n = static_cast<std::size_t>(data.size());
  const MonotonicityEvidence evidence =
      monotonicity_evidence(data, config, derive_seed(config.seed, {stream_tag::kBootstrap, n}));
  return monotonicity_test(evidence, config.epsilon, config.alpha);
}

// Tables ---------------------------------------------------------------

void MonteCarloPlan::validate() const {
  if (sample_sizes.empty()) throw std::invalid_argument("monte carlo: no sample sizes");
  for (std::size_t n : sample_sizes) {
    if (n < 50) throw std::invalid_argument("monte carlo: n must be >= 50");
  }
  if (deltas.empty()) throw std::invalid_argument("monte carlo: no Delta values");
  for (double d : deltas) {
    if (!std::isfinite(d)) throw std::invalid_argument("monte carlo: Delta must be finite");
  }
  if (bandwidths.empty()) throw std::invalid_argument("monte carlo: no (C, kappa) pairs");
  for (const EpsilonRule& rule : bandwidths) (void)rule(sample_sizes.front());
  if (alphas.empty()) throw std::invalid_argument("monte carlo: no alpha levels");
  for (double a : alphas) check_alpha(a, "monte carlo");
  check_tau_grid(tau_grid, "monte carlo");
  if (draws < 2) throw std::invalid_argument("monte carlo: B must be >= 2");
  if (mc_reps < 1) throw std::invalid_argument("monte carlo: mc_reps must be >= 1");
  if (theoretical && theoretical_draws < 100) {
    throw std::invalid_argument("monte carlo: theoretical draws must be >= 100");
  }
}

MonteCarloResult run_monte_carlo(const MonteCarloPlan& plan) {
  plan.validate();
  const std::size_t n_delta = plan.deltas.size();
  const std::size_t n_band = plan.bandwidths.size();
  const std::size_t n_alpha = plan.alphas.size();

  MonteCarloResult result;
  for (std::size_t n : plan.sample_sizes) {
    // outcome[rep][delta]: reject flags per (bandwidth, alpha), or the failure.
    struct Outcome {
      std::vector<char> reject;
      std::optional<std::string> error;
    };
    std::vector<std::vector<Outcome>> outcome(plan.mc_reps, std::vector<Outcome>(n_delta));

    parallel_for(plan.mc_reps, plan.workers, [&](std::size_t rep) {
      QuantileSimConfig config;
      config.n = n;
      config.tau_grid = plan.tau_grid;
      config.draws = plan.draws;
      config.seed = plan.seed;
      config.workers = 1;
      const std::uint64_t boot_seed = derive_seed(plan.seed, {stream_tag::kBootstrap, n, rep});
      for (std::size_t d = 0; d < n_delta; ++d) {
        Outcome& slot = outcome[rep][d];
        try {
          config.delta = plan.deltas[d];
          const MonotonicityEvidence evidence =
              monotonicity_evidence(simulate_dgp(config, rep), config, boot_seed);
          slot.reject.assign(n_band * n_alpha, 0);
          for (std::size_t c = 0; c < n_band; ++c) {
            const EmpiricalLaw law = monotonicity_law(evidence, plan.bandwidths[c](n));
            for (std::size_t a = 0; a < n_alpha; ++a) {
              const double critical = empirical_quantile(law, 1.0 - plan.alphas[a]);
              slot.reject[c * n_alpha + a] = evidence.statistic > critical ? 1 : 0;
            }
          }
        } catch (const std::exception& e) {
          slot.error = e.what();
        }
      }
    });

    for (std::size_t rep = 0; rep < plan.mc_reps; ++rep) {
      for (std::size_t d = 0; d < n_delta; ++d) {
        if (outcome[rep][d].error) {
          result.failures.push_back({n, rep, "Delta=" + std::to_string(plan.deltas[d]) + ": " +
                                                 *outcome[rep][d].error});
        }
      }
    }
    for (std::size_t c = 0; c < n_band; ++c) {
      for (std::size_t a = 0; a < n_alpha; ++a) {
        for (std::size_t d = 0; d < n_delta; ++d) {
          std::size_t rejections = 0;
          std::size_t used = 0;
          for (std::size_t rep = 0; rep < plan.mc_reps; ++rep) {
            const Outcome& slot = outcome[rep][d];
            if (slot.error) continue;
            ++used;
            rejections += static_cast<std::size_t>(slot.reject[c * n_alpha + a]);
          }
          TableCell cell;
          cell.table = plan.deltas[d] >= 0.0 ? "size" : "power";
          cell.n = n;
          cell.scale = plan.bandwidths[c].scale;
          cell.kappa = plan.bandwidths[c].kappa;
          cell.alpha = plan.alphas[a];
          cell.delta = plan.deltas[d];
          cell.reps = used;
          cell.failures = plan.mc_reps - used;
          if (used > 0) {
            const double p = static_cast<double>(rejections) / static_cast<double>(used);
            cell.rejection_rate = p;
            cell.std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(used));
          } else {
            cell.rejection_rate = std::nan("");
            cell.std_error = std::nan("");
          }
          result.cells.push_back(std::move(cell));
        }
      }
    }
  }

  if (plan.theoretical) {
    TheoreticalOptions options;
    options.draws = plan.theoretical_draws;
    options.seed = derive_seed(plan.seed, {stream_tag::kLimitLaw});
    options.workers = plan.workers;
    options.tau_grid = plan.tau_grid;
    const std::vector<double> rates = theoretical_local_rejection(plan.deltas, plan.alphas, options);
    for (std::size_t a = 0; a < n_alpha; ++a) {
      for (std::size_t d = 0; d < n_delta; ++d) {
        TableCell cell;
        cell.table = plan.deltas[d] >= 0.0 ? "size" : "power";
        cell.theoretical = true;
        cell.alpha = plan.alphas[a];
        cell.delta = plan.deltas[d];
        cell.rejection_rate = rates[d * n_alpha + a];
        cell.reps = plan.theoretical_draws;
        cell.std_error = std::sqrt(cell.rejection_rate * (1.0 - cell.rejection_rate) /
                                   static_cast<double>(cell.reps));
        result.cells.push_back(std::move(cell));
      }
    }
  }
  return result;
}

// Limit rows -----------------------------------------------------------

Eigen::MatrixXd limit_covariance(const TheoreticalOptions& options) {
  check_tau_grid(options.tau_grid, "limit_covariance");
  const Eigen::VectorXd& t = options.tau_grid;
  const Eigen::Index m = t.size();
  if (options.source == CovarianceSource::kAnalytic) {
    Eigen::MatrixXd cov(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) cov(i, j) = 4.0 * (std::min(t(i), t(j)) - t(i) * t(j));
    }
    return cov;
  }
  if (options.oracle_reps < 2) throw std::invalid_argument("limit_covariance: need >= 2 oracle fits");
  QuantileSimConfig config;
  config.n = options.oracle_n;
  config.delta = 0.0;
  config.tau_grid = t;
  config.seed = derive_seed(options.seed, {stream_tag::kCovariance});
  config.validate();
  Eigen::MatrixXd paths(static_cast<Eigen::Index>(options.oracle_reps), m);
  const double scale = std::sqrt(static_cast<double>(options.oracle_n));
  parallel_for(options.oracle_reps, options.workers, [&](std::size_t r) {
    const QRFit fit = qr_fit(simulate_dgp(config, r), t);
    paths.row(static_cast<Eigen::Index>(r)) = scale * fit.theta_of_tau.values().transpose();
  });
  // theta0 = 0 is known, so second moments are taken about zero.
  return paths.transpose() * paths / static_cast<double>(options.oracle_reps);
}

std::vector<double> theoretical_local_rejection(const std::vector<double>& deltas,
                                                const std::vector<double>& alphas,
                                                const TheoreticalOptions& options) {
  if (options.draws < 100) throw std::invalid_argument("theoretical_local_rejection: R must be >= 100");
  for (double a : alphas) check_alpha(a, "theoretical_local_rejection");
  const Eigen::MatrixXd factor = psd_factor(limit_covariance(options));
  const Eigen::VectorXd& t = options.tau_grid;
  const Eigen::VectorXd weights = riemann_weights(t);
  const Eigen::Index m = t.size();
  const std::size_t n_delta = deltas.size();

  auto gap = [&](const Eigen::VectorXd& h) {
    return weighted_norm(h - isotonic_projection(h, weights), weights);
  };

  constexpr std::size_t kChunk = 1000;
  const std::size_t chunks = (options.draws + kChunk - 1) / kChunk;
  std::vector<double> null_atoms(options.draws);
  Eigen::MatrixXd shifted(static_cast<Eigen::Index>(options.draws), static_cast<Eigen::Index>(n_delta));
  parallel_for(chunks, options.workers, [&](std::size_t chunk) {
    RandomStream stream(derive_seed(options.seed, {stream_tag::kLimitLaw, chunk}));
    Eigen::VectorXd xi(m);
    const std::size_t end = std::min(options.draws, (chunk + 1) * kChunk);
    for (std::size_t r = chunk * kChunk; r < end; ++r) {
      for (Eigen::Index k = 0; k < m; ++k) xi(k) = stream.normal();
      const Eigen::VectorXd g = factor * xi;
      null_atoms[r] = gap(g);
      for (std::size_t d = 0; d < n_delta; ++d) {
        shifted(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d)) = gap(g + deltas[d] * t);
      }
    }
  });

  const EmpiricalLaw null_law(null_atoms);
  std::vector<double> rates(n_delta * alphas.size());
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    const double critical = empirical_quantile(null_law, 1.0 - alphas[a]);
    for (std::size_t d = 0; d < n_delta; ++d) {
      const auto exceed = (shifted.col(static_cast<Eigen::Index>(d)).array() > critical).count();
      rates[d * alphas.size() + a] = static_cast<double>(exceed) / static_cast<double>(options.draws);
    }
  }
  return rates;
}

double theoretical_local_rejection(double delta, double alpha, const TheoreticalOptions& options) {
  return theoretical_local_rejection(std::vector<double>{delta}, std::vector<double>{alpha},
                                     options)
      .front();
}

}  // namespace dirboot
