#pragma once

// Test reports, plug-in statistics, delta-method residual checks and
// confidence sets by test inversion.

#include "dirboot/empirical_law.hpp"
#include "dirboot/grid_function.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace dirboot {

/// Everything needed to replay a randomized computation.
struct SeedManifest {
  std::uint64_t master_seed = 0;
  std::string scheme;
  std::size_t draws = 0;        // B
  std::size_t sample_size = 0;  // n
  double rate = 0.0;            // r_n
  std::map<std::string, std::string> extra;
};

struct TestReport {
  double statistic = 0.0;
  double critical_value = 0.0;
  double alpha = 0.05;
  double delta_bump = 0.0;
  bool reject = false;
  double p_value = 1.0;
  SeedManifest seed_manifest;
  std::map<std::string, double> diagnostics;
  std::vector<std::string> flags;
};

/// Fills critical value, decision and p-value from the critical-value law:
/// reject iff statistic > c_{1-alpha} + delta_bump; p = 1 - ecdf(statistic).
TestReport decide(double statistic, const EmpiricalLaw& law, double alpha, double delta_bump);

using ScalarFunctional = std::function<double(const Eigen::VectorXd&)>;

/// r_n * (phi(theta_hat) - center).
double plug_in_statistic(const EstimateBundle& bundle, const ScalarFunctional& functional,
                         double center = 0.0);

/// max over the tail of the step sequence of
/// |(phi(theta0 + t h) - phi(theta0)) / t - phi'(h)|.
/// `tail` is the number of trailing steps inspected (0 = all).
double directional_derivative_check(const ScalarFunctional& functional,
                                    const ScalarFunctional& derivative,
                                    const Eigen::VectorXd& theta0, const Eigen::VectorXd& h,
                                    const std::vector<double>& steps, std::size_t tail = 0);

struct AcceptedInterval {
  double lower;
  double upper;
};

struct ConfidenceSet {
  std::vector<double> accepted;             // grid points not rejected
  std::vector<AcceptedInterval> intervals;  // contiguous runs of accepted points
  bool empty() const { return accepted.empty(); }
};

/// Keeps every candidate c0 whose test does not reject.
ConfidenceSet invert_test_for_ci(const std::function<TestReport(double)>& test,
                                 const std::vector<double>& candidates);

}  // namespace dirboot
