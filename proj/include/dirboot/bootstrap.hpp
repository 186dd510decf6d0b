#pragma once

// Resampling weights, the bootstrap process ensemble r_n(theta* - theta_hat),
// standard and derivative-composition (modified) bootstrap laws, and the
// one-sided test H0: phi(theta0) <= 0 built from them.

#include "dirboot/empirical_law.hpp"
#include "dirboot/functionals.hpp"
#include "dirboot/grid_function.hpp"
#include "dirboot/inference.hpp"
#include "dirboot/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace dirboot {

struct ResampleScheme {
  enum class Kind { kMultinomial, kMultiplier };
  enum class MultiplierLaw { kExponential, kGaussian };

  Kind kind = Kind::kMultinomial;
  MultiplierLaw multiplier_law = MultiplierLaw::kExponential;
  double mean = 1.0;
  double variance = 1.0;

  static ResampleScheme multinomial() { return {}; }
  static ResampleScheme multiplier(MultiplierLaw law = MultiplierLaw::kExponential,
                                   double mean = 1.0, double variance = 1.0) {
    return {Kind::kMultiplier, law, mean, variance};
  }
  std::string describe() const;
};

/// Multinomial: counts of n draws with replacement (sum exactly n).
/// Multiplier: n i.i.d. weights with the declared mean and variance.
Eigen::VectorXd draw_resample_weights(const ResampleScheme& scheme, std::size_t n,
                                      RandomStream& stream);

/// Maps observation weights to an estimate; unit weights give theta_hat.
using WeightedEstimator = std::function<Eigen::VectorXd(const Eigen::VectorXd& weights)>;

/// An estimator failure on draw b, with b attached.
class DrawFailure : public std::runtime_error {
 public:
  DrawFailure(std::size_t draw, const std::string& what)
      : std::runtime_error("bootstrap draw " + std::to_string(draw) + ": " + what), draw_(draw) {}
  std::size_t draw() const { return draw_; }

 private:
  std::size_t draw_;
};

struct BootstrapOptions {
  std::size_t draws = 200;  // B
  ResampleScheme scheme;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  double rate_exponent = 0.5;
};

/// B draws r_n(theta*_b - theta_hat), one per row, ordered by b. Draw b uses
/// the substream derive_seed(seed, {kBootstrap, b}).
class BootstrapEnsemble {
 public:
  BootstrapEnsemble(Eigen::MatrixXd draws, GridFunction theta_hat, std::size_t sample_size,
                    double rate, SeedManifest manifest);

  const Eigen::MatrixXd& draws() const { return draws_; }
  Eigen::VectorXd draw(std::size_t b) const { return draws_.row(static_cast<Eigen::Index>(b)).transpose(); }
  std::size_t size() const { return static_cast<std::size_t>(draws_.rows()); }
  const GridFunction& theta_hat() const { return theta_hat_; }
  std::size_t sample_size() const { return sample_size_; }
  double rate() const { return rate_; }
  const SeedManifest& manifest() const { return manifest_; }

 private:
  Eigen::MatrixXd draws_;
  GridFunction theta_hat_;
  std::size_t sample_size_;
  double rate_;
  SeedManifest manifest_;
};

/// theta_hat = estimator(ones). `grid_template` (optional) gives the grid and
/// weights the estimate lives on; a plain vector embedding is used otherwise.
BootstrapEnsemble bootstrap_ensemble(const WeightedEstimator& estimator, std::size_t n,
                                     const BootstrapOptions& options,
                                     const GridFunction* grid_template = nullptr);

/// Atoms r_n(phi(theta_hat + draw / r_n) - phi(theta_hat)), with phi(theta_hat)
/// computed once.
EmpiricalLaw standard_law(const BootstrapEnsemble& ensemble, const ScalarFunctional& functional);

/// Atoms phi_hat'(draw).
EmpiricalLaw modified_law(const BootstrapEnsemble& ensemble, const ScalarFunctional& derivative);

struct TestOptions {
  double alpha = 0.05;
  double delta_bump = 0.0;
  BootstrapOptions bootstrap;
  DerivativeTuning tuning;
};

/// Statistic r_n phi(theta_hat), modified-bootstrap critical value
/// c_{1-alpha}, decision statistic > c_{1-alpha} + delta_bump.
TestReport run_test(const WeightedEstimator& estimator, std::size_t n,
                    const FunctionalSpec& functional, const TestOptions& options);

/// Sample mean of the rows of `data` under observation weights.
WeightedEstimator weighted_mean_estimator(Eigen::MatrixXd data);

/// Flags attached to reports whose critical-value law collapsed.
inline constexpr double kDegenerateLawRange = 1e-14;
inline constexpr const char* kDegenerateLawFlag =
    "degenerate bootstrap law: derivative estimate annihilated the ensemble";

}  // namespace dirboot
