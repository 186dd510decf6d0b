#include "dirboot/convex.hpp"
#include "dirboot/pava.hpp"
#include "dirboot/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

using namespace dirboot;

namespace {

Eigen::VectorXd normal_vector(Eigen::Index d, RandomStream& rng, double scale = 1.0) {
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = scale * rng.normal();
  return v;
}

Eigen::VectorXd positive_weights(Eigen::Index d, RandomStream& rng) {
  Eigen::VectorXd w(d);
  for (Eigen::Index i = 0; i < d; ++i) w(i) = 0.1 + rng.uniform();
  return w;
}

/// Isotonic fit by enumerating every split of 0..d-1 into consecutive blocks.
Eigen::VectorXd isotonic_brute_force(const Eigen::VectorXd& v, const Eigen::VectorXd& w) {
  const Eigen::Index d = v.size();
  Eigen::VectorXd best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << (d - 1)); ++mask) {
    Eigen::VectorXd fit(d);
    Eigen::Index start = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const bool cut = i == d - 1 || (mask >> i) & 1u;
      if (!cut) continue;
      const Eigen::Index len = i - start + 1;
      const double mean = w.segment(start, len).dot(v.segment(start, len)) / w.segment(start, len).sum();
      fit.segment(start, len).setConstant(mean);
      start = i + 1;
    }
    bool monotone = true;
    for (Eigen::Index i = 0; i + 1 < d; ++i) monotone = monotone && fit(i) <= fit(i + 1) + 1e-14;
    if (!monotone) continue;
    const double loss = (w.array() * (fit - v).array().square()).sum();
    if (loss < best_loss) {
      best_loss = loss;
      best = fit;
    }
  }
  return best;
}

/// Projection onto {x : A x <= b} by enumerating active sets and checking KKT.
Eigen::VectorXd halfspace_brute_force(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                      const Eigen::VectorXd& w, const Eigen::VectorXd& x) {
  const Eigen::Index m = a.rows();
  const Eigen::VectorXd winv = w.cwiseInverse();
  Eigen::VectorXd best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<Eigen::Index> act;
    for (Eigen::Index i = 0; i < m; ++i) {
      if ((mask >> i) & 1u) act.push_back(i);
    }
    Eigen::VectorXd y = x;
    if (!act.empty()) {
      Eigen::MatrixXd aa(static_cast<Eigen::Index>(act.size()), a.cols());
      Eigen::VectorXd bb(static_cast<Eigen::Index>(act.size()));
      for (std::size_t k = 0; k < act.size(); ++k) {
        aa.row(static_cast<Eigen::Index>(k)) = a.row(act[k]);
        bb(static_cast<Eigen::Index>(k)) = b(act[k]);
      }
      const Eigen::MatrixXd gram = aa * winv.asDiagonal() * aa.transpose();
      Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
      if (lu.rank() < gram.rows()) continue;
      const Eigen::VectorXd lambda = lu.solve(aa * x - bb);
      if ((lambda.array() < -1e-12).any()) continue;
      y = x - winv.asDiagonal() * aa.transpose() * lambda;
    }
    if (((a * y - b).array() > 1e-9).any()) continue;
    const double loss = (w.array() * (y - x).array().square()).sum();
    if (loss < best_loss) {
      best_loss = loss;
      best = y;
    }
  }
  return best;
}

/// A random instance of each set kind in dimension d, with a point inside.
std::vector<ConvexSet> random_sets(Eigen::Index d, RandomStream& rng) {
  const Eigen::VectorXd w = positive_weights(d, rng);
  const Eigen::VectorXd lower = normal_vector(d, rng) - Eigen::VectorXd::Ones(d);
  const Eigen::VectorXd upper = lower + Eigen::VectorXd::Ones(d) * (0.5 + rng.uniform());
  const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.below(4));
  const Eigen::MatrixXd normals = [&] {
    Eigen::MatrixXd n(m, d);
    for (Eigen::Index i = 0; i < m; ++i) n.row(i) = normal_vector(d, rng).transpose();
    return n;
  }();
  const Eigen::VectorXd feasible = normal_vector(d, rng);
  Eigen::VectorXd offsets = normals * feasible;
  for (Eigen::Index i = 0; i < m; ++i) offsets(i) += rng.uniform();
  return {ConvexSet::nonpositive_orthant(w), ConvexSet::box(lower, upper, w), ConvexSet::monotone_cone(w),
          ConvexSet::halfspaces(normals, offsets, feasible, w)};
}

double hnorm(const ConvexSet& set, const Eigen::VectorXd& v) { return weighted_norm(v, set.weights()); }

}  // namespace

TEST_CASE("projection examples") {
  CHECK(project(ConvexSet::nonpositive_orthant(2), Eigen::Vector2d(1, -2)) == Eigen::Vector2d(0, -2));
  CHECK(project(ConvexSet::monotone_cone(Eigen::VectorXd::Ones(3)), Eigen::Vector3d(3, 1, 2)) ==
        Eigen::Vector3d(2, 2, 2));
  RandomStream rng(50);
  for (int trial = 0; trial < 50; ++trial) {
    for (const ConvexSet& set : random_sets(4, rng)) {
      const Eigen::VectorXd inside = project(set, normal_vector(4, rng, 3.0));
      CHECK((project(set, inside) - inside).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK(distance_to_set(set, inside) <= 1e-8);
    }
  }
}

TEST_CASE("weighted PAVA equals the brute-force QP") {
  RandomStream rng(51);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(8));
    const Eigen::VectorXd v = normal_vector(d, rng, 2.0);
    const Eigen::VectorXd w = positive_weights(d, rng);
    worst = std::max(worst, (isotonic_projection(v, w) - isotonic_brute_force(v, w)).cwiseAbs().maxCoeff());
    worst = std::max(worst, (project(ConvexSet::monotone_cone(w), v) - isotonic_brute_force(v, w))
                                .cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("Dykstra matches active-set enumeration for halfspaces") {
  RandomStream rng(52);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.below(3));
    const ConvexSet set = random_sets(d, rng)[3];
    const Eigen::VectorXd x = normal_vector(d, rng, 3.0);
    const Eigen::VectorXd oracle = halfspace_brute_force(set.normals(), set.offsets(), set.weights(), x);
    CHECK((project(set, x) - oracle).cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("projections are nonexpansive") {
  RandomStream rng(53);
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(6));
    for (const ConvexSet& set : random_sets(d, rng)) {
      const Eigen::VectorXd x = normal_vector(d, rng, 2.0);
      const Eigen::VectorXd y = normal_vector(d, rng, 2.0);
      CHECK(hnorm(set, project(set, x) - project(set, y)) <= hnorm(set, x - y) + 1e-10);
    }
  }
}

TEST_CASE("Dykstra reports non-convergence") {
  Eigen::MatrixXd normals(2, 2);
  normals << 1, 1, 1, 1.0001;
  const ConvexSet set = ConvexSet::halfspaces(normals, Eigen::Vector2d(0, 0), Eigen::Vector2d(-1, -1));
  ProjectionOptions tight;
  tight.max_iterations = 2;
  tight.tolerance = 1e-15;
  try {
    project(set, Eigen::Vector2d(-1, 5), tight);
    FAIL("expected ProjectionFailure");
  } catch (const ProjectionFailure& e) {
    CHECK(e.last_iterate().size() == 2);
    CHECK(e.residual() > 0.0);
  }
}

TEST_CASE("sets validate their construction") {
  CHECK_THROWS_AS(ConvexSet::halfspaces(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(0, 0),
                                        Eigen::Vector2d(1, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(ConvexSet::box(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)), std::invalid_argument);
  CHECK_THROWS_AS(ConvexSet::monotone_cone(Eigen::Vector2d(1, -1)), std::invalid_argument);
}

TEST_CASE("distance statistic examples") {
  CHECK(distance_statistic(EstimateBundle(Eigen::Vector2d(-1, -3), 100), ConvexSet::nonpositive_orthant(2)) == 0.0);
  CHECK(distance_statistic(EstimateBundle(Eigen::Vector2d(0.3, -1), 100), ConvexSet::nonpositive_orthant(2)) ==
        doctest::Approx(3.0).epsilon(1e-14));
  CHECK(distance_statistic(EstimateBundle(Eigen::Vector3d(3, 1, 2), 25),
                           ConvexSet::monotone_cone(Eigen::VectorXd::Ones(3))) ==
        doctest::Approx(5.0 * std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("tangent cone examples") {
  const ConeSpec orthant = tangent_cone(ConvexSet::nonpositive_orthant(2), Eigen::Vector2d(0, -2), 1e-9);
  CHECK(orthant.active == std::vector<Eigen::Index>{0});
  CHECK(project_tangent(orthant, Eigen::Vector2d(1, 1)) == Eigen::Vector2d(0, 1));

  const ConvexSet cone = ConvexSet::monotone_cone(Eigen::VectorXd::Ones(3));
  CHECK(tangent_cone(cone, Eigen::Vector3d(0, 0.5, 1.5), 1e-9).active.empty());
  const ConeSpec vertex = tangent_cone(cone, Eigen::Vector3d(1, 1, 1), 1e-9);
  CHECK(vertex.active == std::vector<Eigen::Index>{0, 1});
  CHECK(project_tangent(vertex, Eigen::Vector3d(3, 1, 2)) == Eigen::Vector3d(2, 2, 2));

  const ConeSpec open = tangent_cone(cone, Eigen::Vector3d(0, 0.5, 1.5), 1e-9);
  CHECK(project_tangent(open, Eigen::Vector3d(3, 1, 2)) == Eigen::Vector3d(3, 1, 2));

  CHECK_THROWS(tangent_cone(ConvexSet::nonpositive_orthant(2), Eigen::Vector2d(1, 0), 1e-9));
}

TEST_CASE("derivative estimate examples") {
  const ConvexSet orthant = ConvexSet::nonpositive_orthant(2);
  const Eigen::Vector2d h(1, 1);
  for (SupMode mode : {SupMode::kThreshold, SupMode::kSupSearch}) {
    CHECK(derivative_sup_estimate(orthant, EstimateBundle(Eigen::Vector2d(-5, -5), 100), 0.1, h, mode) == 0.0);
    CHECK(derivative_sup_estimate(orthant, EstimateBundle(Eigen::Vector2d(0, 0), 100), 0.1, h, mode) ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(derivative_sup_estimate(orthant, EstimateBundle(Eigen::Vector2d(-0.05, -5), 100), 0.1, h, mode) ==
          doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK_THROWS(derivative_sup_estimate(orthant, EstimateBundle(Eigen::Vector2d(0, 0), 100), 0.0, h));
}

TEST_CASE("Moreau orthogonality for tangent cones") {
  RandomStream rng(54);
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(6));
    for (const ConvexSet& set : random_sets(d, rng)) {
      const Eigen::VectorXd theta = project(set, normal_vector(d, rng, 2.0));
      const ConeSpec cone = tangent_cone(set, theta, 0.3 * rng.uniform());
      const Eigen::VectorXd h = normal_vector(d, rng);
      const Eigen::VectorXd p = project_tangent(cone, h);
      const double orth = (set.weights().array() * p.array() * (h - p).array()).sum();
      CHECK(std::abs(orth) <= 1e-10);
    }
  }
}

TEST_CASE("cone derivatives are subadditive") {
  RandomStream rng(55);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(6));
    const auto sets = random_sets(d, rng);
    const ConvexSet& set = sets[rng.below(sets.size())];
    const Eigen::VectorXd theta = project(set, normal_vector(d, rng, 2.0));
    const ConeSpec cone = tangent_cone(set, theta, 0.3 * rng.uniform());
    const Eigen::VectorXd h1 = normal_vector(d, rng);
    const Eigen::VectorXd h2 = normal_vector(d, rng);
    CHECK(cone_distance(cone, h1 + h2) <= cone_distance(cone, h1) + cone_distance(cone, h2) + 1e-10);
  }
}

TEST_CASE("tangent cones of a cone contain it") {
  RandomStream rng(56);
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(6));
    const auto sets = random_sets(d, rng);
    for (const ConvexSet* set : {&sets[0], &sets[2]}) {
      Eigen::VectorXd theta = project(*set, normal_vector(d, rng, 2.0));
      const ConeSpec cone = tangent_cone(*set, theta, 1e-12);
      const Eigen::VectorXd h = normal_vector(d, rng);
      CHECK(cone_distance(cone, h) <= distance_to_set(*set, h) + 1e-10);
    }
  }
}

TEST_CASE("sup-search enumerates reachable activity sets") {
  // Near the corner of the orthant both coordinates can bind within epsilon.
  const ConvexSet orthant = ConvexSet::nonpositive_orthant(2);
  SupSearchEstimator search(orthant, Eigen::Vector2d(-0.05, -0.05), 0.1);
  CHECK(search(Eigen::Vector2d(1, 1)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  // Reaching both faces at once needs distance 0.05*sqrt2 > 0.06.
  SupSearchEstimator narrow(orthant, Eigen::Vector2d(-0.05, -0.05), 0.06);
  CHECK(narrow(Eigen::Vector2d(1, 1)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(derivative_sup_estimate(orthant, EstimateBundle(Eigen::Vector2d(-0.05, -0.05), 1), 0.06,
                                Eigen::Vector2d(1, 1), SupMode::kThreshold) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
}
