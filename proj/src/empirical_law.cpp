#include "dirboot/empirical_law.hpp"

#include "dirboot/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace dirboot {

EmpiricalLaw::EmpiricalLaw(std::vector<double> atoms)
    : EmpiricalLaw(atoms, std::vector<double>(atoms.size(),
                                              atoms.empty() ? 0.0 : 1.0 / atoms.size())) {}

EmpiricalLaw::EmpiricalLaw(std::vector<double> atoms, std::vector<double> probs) {
  if (atoms.size() != probs.size()) {
    throw std::invalid_argument("EmpiricalLaw: atoms and probs differ in length");
  }
  if (atoms.empty()) return;
  double total = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (!std::isfinite(atoms[i])) throw std::invalid_argument("EmpiricalLaw: non-finite atom");
    if (!(probs[i] >= 0.0)) throw std::invalid_argument("EmpiricalLaw: negative probability");
    total += probs[i];
  }
  // Rounding in the running sum grows with the atom count.
  const double tol = 1e-12 + static_cast<double>(atoms.size()) * std::numeric_limits<double>::epsilon();
  if (std::abs(total - 1.0) > tol) {
    throw std::invalid_argument("EmpiricalLaw: probabilities sum to " + std::to_string(total));
  }
  std::vector<std::size_t> order(atoms.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return atoms[i] < atoms[j]; });
  atoms_.reserve(atoms.size());
  probs_.reserve(atoms.size());
  for (std::size_t i : order) {
    atoms_.push_back(atoms[i]);
    probs_.push_back(probs[i]);
  }
}

double EmpiricalLaw::cdf(double x) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < atoms_.size() && atoms_[i] <= x; ++i) acc += probs_[i];
  return std::min(acc, 1.0);
}

double EmpiricalLaw::mean() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < atoms_.size(); ++i) acc += probs_[i] * atoms_[i];
  return acc;
}

double EmpiricalLaw::range() const {
  return atoms_.empty() ? 0.0 : atoms_.back() - atoms_.front();
}

double empirical_quantile(const EmpiricalLaw& law, double level) {
  if (law.empty()) throw std::invalid_argument("empirical_quantile: empty law");
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("empirical_quantile: level " + std::to_string(level) +
                                " outside (0,1)");
  }
  // Accumulated uniform weights like k/B can land a hair below level.
  const double target = level - 1e-12;
  double acc = 0.0;
  for (std::size_t i = 0; i < law.size(); ++i) {
    acc += law.probs()[i];
    if (acc >= target) return law.atoms()[i];
  }
  return law.atoms().back();
}

namespace {

struct MergedSupport {
  std::vector<double> points;
  std::vector<double> mass;  // p_i - q_i
};

MergedSupport merge(const EmpiricalLaw& first, const EmpiricalLaw& second) {
  MergedSupport out;
  std::size_t i = 0;
  std::size_t j = 0;
  const auto& a = first.atoms();
  const auto& b = second.atoms();
  while (i < a.size() || j < b.size()) {
    double x;
    if (j == b.size() || (i < a.size() && a[i] <= b[j])) {
      x = a[i];
    } else {
      x = b[j];
    }
    double m = 0.0;
    while (i < a.size() && a[i] == x) m += first.probs()[i++];
    while (j < b.size() && b[j] == x) m -= second.probs()[j++];
    out.points.push_back(x);
    out.mass.push_back(m);
  }
  return out;
}

void require_nonempty(const EmpiricalLaw& first, const EmpiricalLaw& second) {
  if (first.empty() || second.empty()) throw std::invalid_argument("law_distance: empty law");
}

}  // namespace

double bl_distance_lp(const EmpiricalLaw& first, const EmpiricalLaw& second) {
  require_nonempty(first, second);
  const MergedSupport s = merge(first, second);
  const auto k = static_cast<Eigen::Index>(s.points.size());
  // f_i = g_i - 1 with 0 <= g_i <= 2; the constant drops out since both
  // masses sum to one.
  const Eigen::Index rows = k + 2 * (k - 1);
  LinearProgram lp;
  lp.a = Eigen::MatrixXd::Zero(rows, k);
  lp.b.resize(rows);
  lp.c.resize(k);
  lp.sense.assign(static_cast<std::size_t>(rows), ConstraintSense::kLessEqual);
  for (Eigen::Index i = 0; i < k; ++i) {
    lp.c(i) = -s.mass[i];
    lp.a(i, i) = 1.0;
    lp.b(i) = 2.0;
  }
  for (Eigen::Index i = 0; i + 1 < k; ++i) {
    const double gap = s.points[i + 1] - s.points[i];
    const Eigen::Index r = k + 2 * i;
    lp.a(r, i + 1) = 1.0;
    lp.a(r, i) = -1.0;
    lp.b(r) = gap;
    lp.a(r + 1, i + 1) = -1.0;
    lp.a(r + 1, i) = 1.0;
    lp.b(r + 1) = gap;
  }
  const LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::kOptimal) {
    throw std::runtime_error(std::string("bl_distance_lp: simplex ended with status ") +
                             to_string(sol.status));
  }
  return std::max(0.0, -sol.objective);
}

double bl_distance_chain(const EmpiricalLaw& first, const EmpiricalLaw& second) {
  require_nonempty(first, second);
  const MergedSupport s = merge(first, second);

  // V_i(f) = max over f_1..f_{i-1} of the partial objective with f_i = f,
  // a concave piecewise-linear function on [-1, 1] stored as segments
  // (length, slope - offset) from left to right. Slopes are nonincreasing.
  struct Segment {
    double length;
    double raw_slope;
  };
  std::deque<Segment> segs{{2.0, s.mass[0]}};
  double offset = 0.0;
  double left_value = -s.mass[0];

  for (std::size_t i = 1; i < s.points.size(); ++i) {
    const double d = s.points[i] - s.points[i - 1];
    // Window max over |g - f| <= d: insert a flat piece at the argmax.
    auto pos = std::partition_point(segs.begin(), segs.end(), [&](const Segment& sg) {
      return sg.raw_slope + offset > 0.0;
    });
    segs.insert(pos, Segment{2.0 * d, -offset});
    // Restrict the widened domain [-1-d, 1+d] back to [-1, 1].
    double remaining = d;
    while (remaining > 0.0 && !segs.empty()) {
      Segment& front = segs.front();
      const double take = std::min(front.length, remaining);
      left_value += (front.raw_slope + offset) * take;
      front.length -= take;
      remaining -= take;
      if (front.length <= 0.0) segs.pop_front();
    }
    remaining = d;
    while (remaining > 0.0 && !segs.empty()) {
      Segment& back = segs.back();
      const double take = std::min(back.length, remaining);
      back.length -= take;
      remaining -= take;
      if (back.length <= 0.0) segs.pop_back();
    }
    left_value -= s.mass[i];
    offset += s.mass[i];
  }

  double best = left_value;
  for (const Segment& sg : segs) {
    const double slope = sg.raw_slope + offset;
    if (slope <= 0.0) break;
    best += slope * sg.length;
  }
  return std::clamp(best, 0.0, 2.0);
}

double ks_distance(const EmpiricalLaw& first, const EmpiricalLaw& second) {
  require_nonempty(first, second);
  const MergedSupport s = merge(first, second);
  double diff = 0.0;
  double sup = 0.0;
  for (double m : s.mass) {
    diff += m;
    sup = std::max(sup, std::abs(diff));
  }
  return std::min(sup, 1.0);
}

double law_distance(const EmpiricalLaw& first, const EmpiricalLaw& second, LawMetric metric) {
  constexpr std::size_t kSimplexSupportLimit = 128;
  switch (metric) {
    case LawMetric::kKolmogorovSmirnov:
      return ks_distance(first, second);
    case LawMetric::kBoundedLipschitz:
      if (first.size() + second.size() <= kSimplexSupportLimit) {
        return bl_distance_lp(first, second);
      }
      return bl_distance_chain(first, second);
  }
  throw std::invalid_argument("law_distance: unknown metric");
}

}  // namespace dirboot
