#include "dirboot/convex.hpp"

#include "dirboot/pava.hpp"
#include "dirboot/simplex.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace dirboot {

const char* to_string(SetKind kind) {
  switch (kind) {
    case SetKind::kNonpositiveOrthant: return "nonpositive_orthant";
    case SetKind::kBox: return "box";
    case SetKind::kMonotoneCone: return "monotone_cone";
    case SetKind::kHalfspaces: return "halfspaces";
  }
  return "unknown";
}

namespace {

void check_weights(const Eigen::VectorXd& w) {
  if (w.size() == 0) throw std::invalid_argument("ConvexSet: zero dimension");
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(w(i) > 0.0) || !std::isfinite(w(i))) {
      throw std::invalid_argument("ConvexSet: metric weight " + std::to_string(i) +
                                  " is not positive");
    }
  }
}

// One constraint a'x <= b (or = b) for alternating projections.
struct AffinePiece {
  Eigen::VectorXd normal;
  double offset;
  bool equality;
};

Eigen::VectorXd dykstra(const Eigen::VectorXd& point, const Eigen::VectorXd& weights,
                        const std::vector<AffinePiece>& pieces,
                        const ProjectionOptions& options) {
  if (pieces.empty()) return point;
  std::vector<Eigen::VectorXd> scaled(pieces.size());
  std::vector<double> denom(pieces.size());
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    scaled[k] = pieces[k].normal.cwiseQuotient(weights);
    denom[k] = pieces[k].normal.dot(scaled[k]);
  }
  Eigen::VectorXd x = point;
  std::vector<Eigen::VectorXd> increments(pieces.size(), Eigen::VectorXd::Zero(point.size()));
  double residual = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const Eigen::VectorXd before = x;
    double increment_change = 0.0;
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      const Eigen::VectorXd y = x + increments[k];
      const double violation = pieces[k].normal.dot(y) - pieces[k].offset;
      x = y;
      if (pieces[k].equality || violation > 0.0) x -= (violation / denom[k]) * scaled[k];
      Eigen::VectorXd next_increment = y - x;
      increment_change += weighted_norm(next_increment - increments[k], weights);
      increments[k] = std::move(next_increment);
    }
    residual = weighted_norm(x - before, weights) + increment_change;
    if (residual <= options.tolerance) return x;
  }
  throw ProjectionFailure("Dykstra projection did not converge within " +
                              std::to_string(options.max_iterations) + " sweeps",
                          x, residual);
}

std::vector<AffinePiece> halfspace_pieces(const ConvexSet& set,
                                          const std::vector<Eigen::Index>& rows,
                                          bool through_origin) {
  std::vector<AffinePiece> out;
  out.reserve(rows.size());
  for (Eigen::Index i : rows) {
    out.push_back({set.normals().row(i).transpose(), through_origin ? 0.0 : set.offsets()(i),
                   false});
  }
  return out;
}

std::vector<Eigen::Index> all_indices(Eigen::Index count) {
  std::vector<Eigen::Index> out(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = i;
  return out;
}

// Isotonic projection restricted to the chains of tied adjacent pairs: knots
// joined by a tie share one value; blocks are then projected monotonically.
Eigen::VectorXd pooled_isotonic(const Eigen::VectorXd& values, const Eigen::VectorXd& weights,
                                const std::vector<bool>& tied, bool monotone_between) {
  const Eigen::Index m = values.size();
  Eigen::VectorXd out = values;
  Eigen::Index start = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> blocks;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (i + 1 == m || !tied[static_cast<std::size_t>(i)]) {
      blocks.emplace_back(start, i + 1 - start);
      start = i + 1;
    }
  }
  if (!monotone_between) {
    // Tangent-cone case: each chain of active pairs is projected on its own.
    for (auto [s, len] : blocks) {
      if (len > 1) out.segment(s, len) = isotonic_projection(values.segment(s, len),
                                                             weights.segment(s, len));
    }
    return out;
  }
  Eigen::VectorXd means(static_cast<Eigen::Index>(blocks.size()));
  Eigen::VectorXd masses(static_cast<Eigen::Index>(blocks.size()));
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto [s, len] = blocks[b];
    const double w = weights.segment(s, len).sum();
    masses(static_cast<Eigen::Index>(b)) = w;
    means(static_cast<Eigen::Index>(b)) =
        weights.segment(s, len).dot(values.segment(s, len)) / w;
  }
  const Eigen::VectorXd fitted = isotonic_projection(means, masses);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    out.segment(blocks[b].first, blocks[b].second)
        .setConstant(fitted(static_cast<Eigen::Index>(b)));
  }
  return out;
}

}  // namespace

ConvexSet::ConvexSet(SetKind kind, Eigen::VectorXd weights)
    : kind_(kind), weights_(std::move(weights)) {
  check_weights(weights_);
}

ConvexSet ConvexSet::nonpositive_orthant(Eigen::Index dimension) {
  return nonpositive_orthant(Eigen::VectorXd::Ones(dimension));
}

ConvexSet ConvexSet::nonpositive_orthant(Eigen::VectorXd weights) {
  return ConvexSet(SetKind::kNonpositiveOrthant, std::move(weights));
}

ConvexSet ConvexSet::box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  const Eigen::Index d = lower.size();
  return box(std::move(lower), std::move(upper), Eigen::VectorXd::Ones(d));
}

ConvexSet ConvexSet::box(Eigen::VectorXd lower, Eigen::VectorXd upper, Eigen::VectorXd weights) {
  if (lower.size() != weights.size() || upper.size() != weights.size()) {
    throw std::invalid_argument("ConvexSet::box: bound sizes differ from dimension");
  }
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower(i) <= upper(i))) {
      throw std::invalid_argument("ConvexSet::box: lower bound exceeds upper at coordinate " +
                                  std::to_string(i));
    }
  }
  ConvexSet set(SetKind::kBox, std::move(weights));
  set.lower_ = std::move(lower);
  set.upper_ = std::move(upper);
  return set;
}

ConvexSet ConvexSet::monotone_cone(Eigen::VectorXd weights) {
  return ConvexSet(SetKind::kMonotoneCone, std::move(weights));
}

ConvexSet ConvexSet::monotone_cone(const GridFunction& grid_template) {
  return monotone_cone(grid_template.weights());
}

ConvexSet ConvexSet::halfspaces(Eigen::MatrixXd normals, Eigen::VectorXd offsets,
                                const Eigen::VectorXd& feasible_point) {
  const Eigen::Index d = normals.cols();
  return halfspaces(std::move(normals), std::move(offsets), feasible_point,
                    Eigen::VectorXd::Ones(d));
}

ConvexSet ConvexSet::halfspaces(Eigen::MatrixXd normals, Eigen::VectorXd offsets,
                                const Eigen::VectorXd& feasible_point, Eigen::VectorXd weights) {
  if (normals.cols() != weights.size() || feasible_point.size() != weights.size()) {
    throw std::invalid_argument("ConvexSet::halfspaces: normals/feasible point dimension mismatch");
  }
  if (normals.rows() != offsets.size()) {
    throw std::invalid_argument("ConvexSet::halfspaces: one offset per normal required");
  }
  for (Eigen::Index i = 0; i < normals.rows(); ++i) {
    if (normals.row(i).squaredNorm() == 0.0) {
      throw std::invalid_argument("ConvexSet::halfspaces: normal " + std::to_string(i) +
                                  " is zero");
    }
  }
  ConvexSet set(SetKind::kHalfspaces, std::move(weights));
  set.normals_ = std::move(normals);
  set.offsets_ = std::move(offsets);
  if (!set.contains(feasible_point, 1e-9)) {
    throw std::invalid_argument("ConvexSet::halfspaces: supplied feasible point violates a constraint");
  }
  return set;
}

Eigen::Index ConvexSet::constraint_count() const {
  switch (kind_) {
    case SetKind::kNonpositiveOrthant: return dimension();
    case SetKind::kBox: return 2 * dimension();
    case SetKind::kMonotoneCone: return std::max<Eigen::Index>(dimension() - 1, 0);
    case SetKind::kHalfspaces: return normals_.rows();
  }
  return 0;
}

void ConvexSet::check_point(const Eigen::VectorXd& point, const char* where) const {
  if (point.size() != dimension()) {
    throw std::invalid_argument(std::string(where) + ": point has dimension " +
                                std::to_string(point.size()) + ", set has " +
                                std::to_string(dimension()));
  }
}

Eigen::VectorXd ConvexSet::slack(const Eigen::VectorXd& point) const {
  check_point(point, "ConvexSet::slack");
  const Eigen::Index d = dimension();
  switch (kind_) {
    case SetKind::kNonpositiveOrthant:
      return -point;
    case SetKind::kBox: {
      Eigen::VectorXd s(2 * d);
      s.head(d) = point - lower_;
      s.tail(d) = upper_ - point;
      return s;
    }
    case SetKind::kMonotoneCone:
      if (d < 2) return Eigen::VectorXd(0);
      return point.tail(d - 1) - point.head(d - 1);
    case SetKind::kHalfspaces:
      return offsets_ - normals_ * point;
  }
  return {};
}

bool ConvexSet::contains(const Eigen::VectorXd& point, double tol) const {
  const Eigen::VectorXd s = slack(point);
  return s.size() == 0 || s.minCoeff() >= -tol;
}

Eigen::VectorXd project(const ConvexSet& set, const Eigen::VectorXd& point,
                        const ProjectionOptions& options) {
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("project: tolerance must be positive");
  if (point.size() != set.dimension()) {
    throw std::invalid_argument("project: point has dimension " + std::to_string(point.size()) +
                                ", set has " + std::to_string(set.dimension()));
  }
  switch (set.kind()) {
    case SetKind::kNonpositiveOrthant:
      return point.cwiseMin(0.0);
    case SetKind::kBox:
      return point.cwiseMax(set.lower()).cwiseMin(set.upper());
    case SetKind::kMonotoneCone:
      return isotonic_projection(point, set.weights());
    case SetKind::kHalfspaces:
      if (set.contains(point, 0.0)) return point;
      return dykstra(point, set.weights(),
                     halfspace_pieces(set, all_indices(set.constraint_count()), false), options);
  }
  return point;
}

GridFunction project(const ConvexSet& set, const GridFunction& point,
                     const ProjectionOptions& options) {
  if (point.weights() != set.weights()) {
    throw std::invalid_argument("project: grid function weights differ from the set's metric");
  }
  return point.with_values(project(set, point.values(), options));
}

double distance_to_set(const ConvexSet& set, const Eigen::VectorXd& point,
                       const ProjectionOptions& options) {
  return weighted_norm(point - project(set, point, options), set.weights());
}

double distance_statistic(const EstimateBundle& bundle, const ConvexSet& set,
                          const ProjectionOptions& options) {
  const GridFunction& theta = bundle.theta_hat();
  if (theta.size() != set.dimension()) {
    throw std::invalid_argument("distance_statistic: estimate has dimension " +
                                std::to_string(theta.size()) + ", set has " +
                                std::to_string(set.dimension()));
  }
  if (theta.weights() != set.weights()) {
    throw std::invalid_argument("distance_statistic: estimate weights differ from the set's metric");
  }
  return bundle.rate() * distance_to_set(set, theta.values(), options);
}

ConeSpec tangent_cone(const ConvexSet& set, const Eigen::VectorXd& point, double activity_tol) {
  if (!(activity_tol >= 0.0)) throw std::invalid_argument("tangent_cone: negative activity tolerance");
  const Eigen::VectorXd s = set.slack(point);
  const double allowed = std::max(activity_tol, 1e-8 * (1.0 + point.lpNorm<Eigen::Infinity>()));
  if (s.size() > 0 && s.minCoeff() < -allowed) {
    throw std::invalid_argument("tangent_cone: point violates the set by " +
                                std::to_string(-s.minCoeff()) + "; project it first");
  }
  ConeSpec cone{set, {}};
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) <= activity_tol) cone.active.push_back(i);
  }
  return cone;
}

Eigen::VectorXd project_tangent(const ConeSpec& cone, const Eigen::VectorXd& h,
                                const ProjectionOptions& options) {
  const ConvexSet& set = cone.base;
  if (h.size() != set.dimension()) {
    throw std::invalid_argument("project_tangent: direction has dimension " +
                                std::to_string(h.size()) + ", cone has " +
                                std::to_string(set.dimension()));
  }
  const Eigen::Index d = set.dimension();
  Eigen::VectorXd out = h;
  switch (set.kind()) {
    case SetKind::kNonpositiveOrthant:
      for (Eigen::Index i : cone.active) out(i) = std::min(out(i), 0.0);
      return out;
    case SetKind::kBox:
      for (Eigen::Index i : cone.active) {
        if (i < d) {
          out(i) = std::max(out(i), 0.0);
        } else {
          out(i - d) = std::min(out(i - d), 0.0);
        }
      }
      return out;
    case SetKind::kMonotoneCone: {
      std::vector<bool> tied(static_cast<std::size_t>(std::max<Eigen::Index>(d - 1, 0)), false);
      for (Eigen::Index i : cone.active) tied[static_cast<std::size_t>(i)] = true;
      return pooled_isotonic(h, set.weights(), tied, false);
    }
    case SetKind::kHalfspaces: {
      const auto pieces = halfspace_pieces(set, cone.active, true);
      bool inside = true;
      for (const auto& p : pieces) inside = inside && p.normal.dot(h) <= 0.0;
      if (inside) return out;
      return dykstra(h, set.weights(), pieces, options);
    }
  }
  return out;
}

double cone_distance(const ConeSpec& cone, const Eigen::VectorXd& h,
                     const ProjectionOptions& options) {
  return weighted_norm(h - project_tangent(cone, h, options), cone.base.weights());
}

double distance_to_face(const ConvexSet& set, const Eigen::VectorXd& point,
                        const std::vector<Eigen::Index>& subset,
                        const ProjectionOptions& options) {
  const Eigen::Index d = set.dimension();
  if (point.size() != d) throw std::invalid_argument("distance_to_face: dimension mismatch");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd nearest;
  switch (set.kind()) {
    case SetKind::kNonpositiveOrthant:
      nearest = point.cwiseMin(0.0);
      for (Eigen::Index i : subset) nearest(i) = 0.0;
      break;
    case SetKind::kBox: {
      nearest = point.cwiseMax(set.lower()).cwiseMin(set.upper());
      std::vector<int> pinned(static_cast<std::size_t>(d), 0);
      for (Eigen::Index i : subset) {
        const Eigen::Index coord = i < d ? i : i - d;
        const double bound = i < d ? set.lower()(coord) : set.upper()(coord);
        if (!std::isfinite(bound)) return kInf;
        if (pinned[static_cast<std::size_t>(coord)] && nearest(coord) != bound) return kInf;
        pinned[static_cast<std::size_t>(coord)] = 1;
        nearest(coord) = bound;
      }
      break;
    }
    case SetKind::kMonotoneCone: {
      std::vector<bool> tied(static_cast<std::size_t>(std::max<Eigen::Index>(d - 1, 0)), false);
      for (Eigen::Index i : subset) tied[static_cast<std::size_t>(i)] = true;
      nearest = pooled_isotonic(point, set.weights(), tied, true);
      break;
    }
    case SetKind::kHalfspaces: {
      // Emptiness check by phase I on x = x+ - x-.
      const Eigen::Index k = set.constraint_count();
      LinearProgram lp;
      lp.a.resize(k, 2 * d);
      lp.a << set.normals(), -set.normals();
      lp.b = set.offsets();
      lp.c = Eigen::VectorXd::Zero(2 * d);
      lp.sense.assign(static_cast<std::size_t>(k), ConstraintSense::kLessEqual);
      for (Eigen::Index i : subset) lp.sense[static_cast<std::size_t>(i)] = ConstraintSense::kEqual;
      if (solve_lp(lp).status != LpStatus::kOptimal) return kInf;
      std::vector<AffinePiece> pieces = halfspace_pieces(set, all_indices(k), false);
      for (Eigen::Index i : subset) pieces[static_cast<std::size_t>(i)].equality = true;
      nearest = dykstra(point, set.weights(), pieces, options);
      break;
    }
  }
  return weighted_norm(point - nearest, set.weights());
}

SupSearchEstimator::SupSearchEstimator(ConvexSet set, Eigen::VectorXd projected_point,
                                       double epsilon, ProjectionOptions options)
    : set_(std::move(set)),
      point_(std::move(projected_point)),
      epsilon_(epsilon),
      options_(options) {
  if (!(epsilon_ > 0.0)) throw std::invalid_argument("SupSearchEstimator: epsilon must be positive");
  for (Eigen::Index i = 0; i < set_.constraint_count(); ++i) {
    if (reachable({i})) candidates_.push_back(i);
  }
  constexpr std::size_t kExhaustiveLimit = 12;
  exhaustive_ = candidates_.size() <= kExhaustiveLimit;
  if (!exhaustive_) return;

  const std::size_t k = candidates_.size();
  std::vector<std::uint32_t> masks(std::size_t{1} << k);
  for (std::uint32_t m = 0; m < masks.size(); ++m) masks[m] = m;
  std::stable_sort(masks.begin(), masks.end(), [](std::uint32_t a, std::uint32_t b) {
    return std::popcount(a) > std::popcount(b);
  });
  std::vector<std::uint32_t> maximal;
  for (std::uint32_t m : masks) {
    const bool covered = std::any_of(maximal.begin(), maximal.end(),
                                     [m](std::uint32_t big) { return (m & big) == m; });
    if (covered) continue;
    std::vector<Eigen::Index> subset;
    for (std::size_t j = 0; j < k; ++j) {
      if (m & (1u << j)) subset.push_back(candidates_[j]);
    }
    if (reachable(subset)) {
      maximal.push_back(m);
      maximal_subsets_.push_back(std::move(subset));
    }
  }
}

bool SupSearchEstimator::reachable(const std::vector<Eigen::Index>& subset) const {
  return distance_to_face(set_, point_, subset, options_) <= epsilon_ * (1.0 + 1e-12);
}

double SupSearchEstimator::operator()(const Eigen::VectorXd& h) const {
  if (exhaustive_) {
    double best = 0.0;
    for (const auto& subset : maximal_subsets_) {
      best = std::max(best, cone_distance(ConeSpec{set_, subset}, h, options_));
    }
    return best;
  }
  std::vector<Eigen::Index> chosen;
  std::vector<bool> used(candidates_.size(), false);
  double best = cone_distance(ConeSpec{set_, chosen}, h, options_);
  while (true) {
    std::size_t pick = candidates_.size();
    double pick_value = -1.0;
    for (std::size_t j = 0; j < candidates_.size(); ++j) {
      if (used[j]) continue;
      std::vector<Eigen::Index> trial = chosen;
      trial.push_back(candidates_[j]);
      std::sort(trial.begin(), trial.end());
      if (!reachable(trial)) continue;
      const double value = cone_distance(ConeSpec{set_, trial}, h, options_);
      if (value > pick_value) {
        pick_value = value;
        pick = j;
      }
    }
    if (pick == candidates_.size()) break;
    used[pick] = true;
    chosen.push_back(candidates_[pick]);
    std::sort(chosen.begin(), chosen.end());
    best = std::max(best, pick_value);
  }
  return best;
}

double derivative_sup_estimate(const ConvexSet& set, const EstimateBundle& bundle,
                               double epsilon, const Eigen::VectorXd& h, SupMode mode,
                               const ProjectionOptions& options) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("derivative_sup_estimate: epsilon must be positive");
  const Eigen::VectorXd projected = project(set, bundle.theta_hat().values(), options);
  if (mode == SupMode::kThreshold) {
    return cone_distance(tangent_cone(set, projected, epsilon), h, options);
  }
  return SupSearchEstimator(set, projected, epsilon, options)(h);
}

}  // namespace dirboot
