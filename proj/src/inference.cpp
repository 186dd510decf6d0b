#include "dirboot/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dirboot {

TestReport decide(double statistic, const EmpiricalLaw& law, double alpha, double delta_bump) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0,1), got " + std::to_string(alpha));
  }
  if (!(delta_bump >= 0.0)) throw std::invalid_argument("delta_bump must be nonnegative");
  TestReport report;
  report.statistic = statistic;
  report.alpha = alpha;
  report.delta_bump = delta_bump;
  report.critical_value = empirical_quantile(law, 1.0 - alpha);
  report.reject = statistic > report.critical_value + delta_bump;
  report.p_value = std::clamp(1.0 - law.cdf(statistic), 0.0, 1.0);
  return report;
}

double plug_in_statistic(const EstimateBundle& bundle, const ScalarFunctional& functional,
                         double center) {
  return bundle.rate() * (functional(bundle.theta_hat().values()) - center);
}

double directional_derivative_check(const ScalarFunctional& functional,
                                    const ScalarFunctional& derivative,
                                    const Eigen::VectorXd& theta0, const Eigen::VectorXd& h,
                                    const std::vector<double>& steps, std::size_t tail) {
  if (steps.empty()) throw std::invalid_argument("directional_derivative_check: no steps");
  if (theta0.size() != h.size()) {
    throw std::invalid_argument("directional_derivative_check: theta0 and h differ in size");
  }
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!(steps[i] > 0.0)) throw std::invalid_argument("directional_derivative_check: step <= 0");
    if (i > 0 && !(steps[i] < steps[i - 1])) {
      throw std::invalid_argument("directional_derivative_check: steps must decrease");
    }
  }
  const double base = functional(theta0);
  const double target = derivative(h);
  const std::size_t first = (tail == 0 || tail >= steps.size()) ? 0 : steps.size() - tail;
  double worst = 0.0;
  for (std::size_t i = first; i < steps.size(); ++i) {
    const double t = steps[i];
    const double value = functional(theta0 + t * h);
    if (!std::isfinite(value)) {
      throw std::domain_error("directional_derivative_check: functional undefined at step " +
                              std::to_string(t));
    }
    worst = std::max(worst, std::abs((value - base) / t - target));
  }
  return worst;
}

ConfidenceSet invert_test_for_ci(const std::function<TestReport(double)>& test,
                                 const std::vector<double>& candidates) {
  if (!std::is_sorted(candidates.begin(), candidates.end())) {
    throw std::invalid_argument("invert_test_for_ci: candidate grid must be sorted");
  }
  ConfidenceSet out;
  bool open = false;
  for (double c0 : candidates) {
    if (!test(c0).reject) {
      out.accepted.push_back(c0);
      if (open) {
        out.intervals.back().upper = c0;
      } else {
        out.intervals.push_back({c0, c0});
        open = true;
      }
    } else {
      open = false;
    }
  }
  return out;
}

}  // namespace dirboot
