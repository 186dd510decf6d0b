#pragma once

// Finite weighted distributions on the real line: empirical quantiles,
// ecdf, and the bounded-Lipschitz / Kolmogorov-Smirnov distances.

#include <cstddef>
#include <vector>

namespace dirboot {

class EmpiricalLaw {
 public:
  EmpiricalLaw() = default;
  /// Uniform probabilities.
  explicit EmpiricalLaw(std::vector<double> atoms);
  /// probs must be nonnegative and sum to 1 (within 1e-12 plus rounding).
  EmpiricalLaw(std::vector<double> atoms, std::vector<double> probs);

  const std::vector<double>& atoms() const { return atoms_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }

  /// P(X <= x).
  double cdf(double x) const;
  double mean() const;
  /// max atom - min atom.
  double range() const;

 private:
  std::vector<double> atoms_;
  std::vector<double> probs_;
};

/// Smallest atom c with P(X <= c) >= level. level must lie in (0, 1).
double empirical_quantile(const EmpiricalLaw& law, double level);

enum class LawMetric { kBoundedLipschitz, kKolmogorovSmirnov };

/// BL distance is computed exactly; KS is the sup-norm ecdf difference.
double law_distance(const EmpiricalLaw& first, const EmpiricalLaw& second, LawMetric metric);

/// Bounded-Lipschitz distance by the dense simplex on the merged support:
/// max sum (p_i - q_i) f_i with |f_i| <= 1 and |f_{i+1} - f_i| <= s_{i+1} - s_i.
double bl_distance_lp(const EmpiricalLaw& first, const EmpiricalLaw& second);

/// Same program solved by dynamic programming over the chain of adjacent
/// constraints. Exact, and usable for supports far beyond simplex scale.
double bl_distance_chain(const EmpiricalLaw& first, const EmpiricalLaw& second);

double ks_distance(const EmpiricalLaw& first, const EmpiricalLaw& second);

}  // namespace dirboot
