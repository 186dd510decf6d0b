#include "dirboot/bootstrap.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dirboot {

std::string ResampleScheme::describe() const {
  if (kind == Kind::kMultinomial) return "multinomial";
  return std::string("multiplier-") +
         (multiplier_law == MultiplierLaw::kExponential ? "exponential" : "gaussian") +
         "(mean=" + std::to_string(mean) + ",variance=" + std::to_string(variance) + ")";
}

Eigen::VectorXd draw_resample_weights(const ResampleScheme& scheme, std::size_t n,
                                      RandomStream& stream) {
  if (n == 0) throw std::invalid_argument("draw_resample_weights: n must be >= 1");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  if (scheme.kind == ResampleScheme::Kind::kMultinomial) {
    for (std::size_t i = 0; i < n; ++i) w(static_cast<Eigen::Index>(stream.below(n))) += 1.0;
    return w;
  }
  if (!(scheme.variance >= 0.0)) {
    throw std::invalid_argument("draw_resample_weights: multiplier variance must be nonnegative");
  }
  const double sd = std::sqrt(scheme.variance);
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double centered = scheme.multiplier_law == ResampleScheme::MultiplierLaw::kExponential
                                ? stream.exponential() - 1.0
                                : stream.normal();
    w(i) = scheme.mean + sd * centered;
  }
  return w;
}

BootstrapEnsemble::BootstrapEnsemble(Eigen::MatrixXd draws, GridFunction theta_hat,
                                     std::size_t sample_size, double rate, SeedManifest manifest)
    : draws_(std::move(draws)),
      theta_hat_(std::move(theta_hat)),
      sample_size_(sample_size),
      rate_(rate),
      manifest_(std::move(manifest)) {
  if (draws_.rows() == 0) throw std::invalid_argument("BootstrapEnsemble: no draws");
  if (draws_.cols() != theta_hat_.size()) {
    throw std::invalid_argument("BootstrapEnsemble: draw shape differs from theta_hat");
  }
}

BootstrapEnsemble bootstrap_ensemble(const WeightedEstimator& estimator, std::size_t n,
                                     const BootstrapOptions& options,
                                     const GridFunction* grid_template) {
  if (options.draws == 0) throw std::invalid_argument("bootstrap_ensemble: B must be >= 1");
  if (n == 0) throw std::invalid_argument("bootstrap_ensemble: n must be >= 1");
  const Eigen::VectorXd theta = estimator(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)));
  GridFunction theta_hat = grid_template ? grid_template->with_values(theta)
                                         : GridFunction::from_vector(theta);
  const double rate = std::pow(static_cast<double>(n), options.rate_exponent);

  Eigen::MatrixXd draws(static_cast<Eigen::Index>(options.draws), theta.size());
  std::vector<std::optional<std::string>> errors(options.draws);
  parallel_for(options.draws, options.workers, [&](std::size_t b) {
    try {
      RandomStream stream(derive_seed(options.seed, {stream_tag::kBootstrap, b}));
      const Eigen::VectorXd w = draw_resample_weights(options.scheme, n, stream);
      const Eigen::VectorXd star = estimator(w);
      if (star.size() != theta.size()) {
        throw std::invalid_argument("estimator returned " + std::to_string(star.size()) +
                                    " components, expected " + std::to_string(theta.size()));
      }
      draws.row(static_cast<Eigen::Index>(b)) = (rate * (star - theta)).transpose();
    } catch (const std::exception& e) {
      errors[b] = e.what();
    }
  });
  for (std::size_t b = 0; b < errors.size(); ++b) {
    if (errors[b]) throw DrawFailure(b, *errors[b]);
  }

  SeedManifest manifest;
  manifest.master_seed = options.seed;
  manifest.scheme = options.scheme.describe();
  manifest.draws = options.draws;
  manifest.sample_size = n;
  manifest.rate = rate;
  return BootstrapEnsemble(std::move(draws), std::move(theta_hat), n, rate, std::move(manifest));
}

EmpiricalLaw standard_law(const BootstrapEnsemble& ensemble, const ScalarFunctional& functional) {
  const Eigen::VectorXd& theta = ensemble.theta_hat().values();
  const double center = functional(theta);
  const double rate = ensemble.rate();
  std::vector<double> atoms(ensemble.size());
  for (std::size_t b = 0; b < atoms.size(); ++b) {
    atoms[b] = rate * (functional(theta + ensemble.draw(b) / rate) - center);
  }
  return EmpiricalLaw(std::move(atoms));
}

EmpiricalLaw modified_law(const BootstrapEnsemble& ensemble, const ScalarFunctional& derivative) {
  std::vector<double> atoms(ensemble.size());
  for (std::size_t b = 0; b < atoms.size(); ++b) atoms[b] = derivative(ensemble.draw(b));
  return EmpiricalLaw(std::move(atoms));
}

TestReport run_test(const WeightedEstimator& estimator, std::size_t n,
                    const FunctionalSpec& functional, const TestOptions& options) {
  const BootstrapEnsemble ensemble = bootstrap_ensemble(estimator, n, options.bootstrap);
  const EstimateBundle bundle(ensemble.theta_hat(), n, options.bootstrap.rate_exponent);
  const ScalarFunctional phi = [&functional](const Eigen::VectorXd& theta) {
    return eval_functional(functional, theta);
  };
  const double statistic = plug_in_statistic(bundle, phi);
  const DerivativeEstimate derivative = estimate_derivative(functional, bundle, options.tuning);
  const EmpiricalLaw law = modified_law(ensemble, derivative.evaluate);

  TestReport report = decide(statistic, law, options.alpha, options.delta_bump);
  report.seed_manifest = ensemble.manifest();
  report.seed_manifest.extra["functional"] = to_string(functional.kind());
  report.seed_manifest.extra[derivative.tuning.mode] = std::to_string(derivative.tuning.value);
  report.diagnostics["tuning_" + derivative.tuning.mode] = derivative.tuning.value;
  report.diagnostics["selected_count"] = static_cast<double>(derivative.selected.size());
  report.diagnostics["law_range"] = law.range();
  report.diagnostics["standard_bootstrap_critical_value"] =
      empirical_quantile(standard_law(ensemble, phi), 1.0 - options.alpha);
  if (law.range() < kDegenerateLawRange) report.flags.emplace_back(kDegenerateLawFlag);
  return report;
}

WeightedEstimator weighted_mean_estimator(Eigen::MatrixXd data) {
  return [data = std::move(data)](const Eigen::VectorXd& w) -> Eigen::VectorXd {
    if (w.size() != data.rows()) {
      throw std::invalid_argument("weighted mean: weight count differs from observation count");
    }
    const double total = w.sum();
    if (!(std::abs(total) > 0.0)) throw std::domain_error("weighted mean: weights sum to zero");
    return (data.transpose() * w) / total;
  };
}

}  // namespace dirboot
