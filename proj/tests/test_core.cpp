#include "dirboot/empirical_law.hpp"
#include "dirboot/functionals.hpp"
#include "dirboot/grid_function.hpp"
#include "dirboot/inference.hpp"
#include "dirboot/rng.hpp"
#include "dirboot/simplex.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

using namespace dirboot;

namespace {

EmpiricalLaw random_law(RandomStream& rng, std::size_t size, double spread) {
  std::vector<double> atoms(size);
  std::vector<double> probs(size);
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    atoms[i] = spread * rng.normal();
    probs[i] = 0.1 + rng.uniform();
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return EmpiricalLaw(atoms, probs);
}

EmpiricalLaw point_mass(double at) { return EmpiricalLaw(std::vector<double>{at}); }

}  // namespace

TEST_CASE("plug-in statistic examples") {
  const ScalarFunctional abs = [](const Eigen::VectorXd& t) { return std::abs(t(0)); };
  CHECK(plug_in_statistic(EstimateBundle(Eigen::VectorXd::Constant(1, 0.5), 100), abs) ==
        doctest::Approx(5.0).epsilon(1e-15));

  const FunctionalSpec max = FunctionalSpec::max_coord(2);
  const ScalarFunctional max_fn = [&](const Eigen::VectorXd& t) { return eval_functional(max, t); };
  for (std::size_t n : {1, 10, 1000}) {
    CHECK(plug_in_statistic(EstimateBundle(Eigen::VectorXd::Zero(2), n), max_fn) == 0.0);
  }

  const ConvexSet cone = ConvexSet::monotone_cone(Eigen::VectorXd::Ones(4));
  const FunctionalSpec dist = FunctionalSpec::convex_distance(cone);
  const ScalarFunctional dist_fn = [&](const Eigen::VectorXd& t) { return eval_functional(dist, t); };
  Eigen::VectorXd increasing(4);
  increasing << -1, 0, 0.5, 2;
  CHECK(plug_in_statistic(EstimateBundle(increasing, 50), dist_fn) == 0.0);
}

TEST_CASE("plug-in statistic rejects a dimension mismatch") {
  const FunctionalSpec max = FunctionalSpec::max_coord(3);
  CHECK_THROWS_AS(eval_functional(max, Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

TEST_CASE("empirical quantile examples") {
  const EmpiricalLaw four(std::vector<double>{4, 2, 3, 1});
  CHECK(empirical_quantile(four, 0.5) == 2.0);
  CHECK(empirical_quantile(point_mass(0.0), 0.95) == 0.0);

  RandomStream rng(derive_seed(11, {1}));
  std::vector<double> draws(1000000);
  for (double& d : draws) d = std::abs(rng.normal());
  CHECK(std::abs(empirical_quantile(EmpiricalLaw(std::move(draws)), 0.95) - 1.959964) < 0.01);

  CHECK_THROWS(empirical_quantile(EmpiricalLaw(), 0.5));
  CHECK_THROWS(empirical_quantile(four, 0.0));
  CHECK_THROWS(empirical_quantile(four, 1.0));
}

TEST_CASE("empirical quantile is monotone in the level and returns an atom") {
  RandomStream rng(derive_seed(12, {1}));
  for (int trial = 0; trial < 50; ++trial) {
    const EmpiricalLaw law = random_law(rng, 1 + rng.below(30), 2.0);
    double previous = -INFINITY;
    for (double level = 0.01; level < 1.0; level += 0.01) {
      const double q = empirical_quantile(law, level);
      CHECK(q >= previous);
      CHECK(std::find(law.atoms().begin(), law.atoms().end(), q) != law.atoms().end());
      previous = q;
    }
  }
}

TEST_CASE("law distance examples") {
  RandomStream rng(derive_seed(13, {1}));
  const EmpiricalLaw law = random_law(rng, 40, 1.0);
  CHECK(law_distance(law, law, LawMetric::kBoundedLipschitz) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(law_distance(law, law, LawMetric::kKolmogorovSmirnov) == 0.0);
  CHECK(law_distance(point_mass(0), point_mass(0.5), LawMetric::kBoundedLipschitz) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(law_distance(point_mass(0), point_mass(5), LawMetric::kBoundedLipschitz) ==
        doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("bounded-Lipschitz distance of point masses is min(t, 2)") {
  for (double t : {0.0, 0.1, 1.0, 3.0}) {
    CHECK(std::abs(bl_distance_lp(point_mass(0), point_mass(t)) - std::min(t, 2.0)) <= 1e-9);
    CHECK(std::abs(bl_distance_chain(point_mass(0), point_mass(t)) - std::min(t, 2.0)) <= 1e-9);
  }
}

TEST_CASE("bounded-Lipschitz metric axioms on random triples") {
  RandomStream rng(derive_seed(14, {1}));
  for (int trial = 0; trial < 100; ++trial) {
    const EmpiricalLaw a = random_law(rng, 1 + rng.below(20), 1.5);
    const EmpiricalLaw b = random_law(rng, 1 + rng.below(20), 1.5);
    const EmpiricalLaw c = random_law(rng, 1 + rng.below(20), 1.5);
    const double ab = law_distance(a, b, LawMetric::kBoundedLipschitz);
    const double ba = law_distance(b, a, LawMetric::kBoundedLipschitz);
    const double ac = law_distance(a, c, LawMetric::kBoundedLipschitz);
    const double cb = law_distance(c, b, LawMetric::kBoundedLipschitz);
    CHECK(std::abs(ab - ba) <= 1e-9);
    CHECK(ab <= ac + cb + 1e-9);
    CHECK(ab >= -1e-12);
    CHECK(ab <= 2.0 + 1e-12);
  }
}

TEST_CASE("chain and LP forms of the bounded-Lipschitz distance agree") {
  RandomStream rng(derive_seed(15, {1}));
  for (int trial = 0; trial < 100; ++trial) {
    const EmpiricalLaw a = random_law(rng, 1 + rng.below(40), 1.0 + 3 * rng.uniform());
    const EmpiricalLaw b = random_law(rng, 1 + rng.below(40), 1.0 + 3 * rng.uniform());
    CHECK(std::abs(bl_distance_lp(a, b) - bl_distance_chain(a, b)) <= 1e-9);
  }
}

TEST_CASE("KS distance is in [0, 1]") {
  RandomStream rng(derive_seed(16, {1}));
  for (int trial = 0; trial < 100; ++trial) {
    const EmpiricalLaw a = random_law(rng, 1 + rng.below(20), 1.0);
    const EmpiricalLaw b = random_law(rng, 1 + rng.below(20), 3.0);
    const double d = ks_distance(a, b);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(ks_distance(a, a) == 0.0);
  }
  CHECK(ks_distance(point_mass(0), point_mass(1)) == 1.0);
}

TEST_CASE("grid function inner product") {
  RandomStream rng(derive_seed(17, {1}));
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.below(20));
    Eigen::VectorXd grid(m), w(m), a(m), b(m);
    double knot = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      knot += 0.1 + rng.uniform();
      grid(i) = knot;
      w(i) = 0.01 + rng.uniform();
      a(i) = rng.normal();
      b(i) = rng.normal();
    }
    const GridFunction f(grid, a, w);
    const GridFunction g(grid, b, w);
    CHECK(inner(f, g) == doctest::Approx(inner(g, f)).epsilon(1e-15));
    CHECK(std::abs(inner(f, g)) <= norm(f) * norm(g) + 1e-12);
    CHECK(norm(f.with_values(Eigen::VectorXd::Zero(m))) == 0.0);
    CHECK(norm(f) > 0.0);
  }
}

TEST_CASE("directional derivative check examples") {
  std::vector<double> steps;
  for (int k = 1; k <= 12; ++k) steps.push_back(std::pow(10.0, -k / 2.0));

  const FunctionalSpec abs = FunctionalSpec::abs_mean();
  const ScalarFunctional phi_abs = [&](const Eigen::VectorXd& t) { return eval_functional(abs, t); };
  const Eigen::VectorXd zero1 = Eigen::VectorXd::Zero(1);
  const ScalarFunctional d_abs = [&](const Eigen::VectorXd& h) { return eval_derivative(abs, zero1, h); };
  CHECK(directional_derivative_check(phi_abs, d_abs, zero1, Eigen::VectorXd::Constant(1, -1.0), steps) == 0.0);

  const FunctionalSpec max = FunctionalSpec::max_coord(2);
  const ScalarFunctional phi_max = [&](const Eigen::VectorXd& t) { return eval_functional(max, t); };
  Eigen::VectorXd theta(2), h(2);
  theta << 1, 0;
  h << 0, 5;
  const ScalarFunctional d_max = [&](const Eigen::VectorXd& v) { return eval_derivative(max, theta, v); };
  std::vector<double> small;
  for (double s : steps) {
    if (s < 0.2) small.push_back(s);
  }
  CHECK(directional_derivative_check(phi_max, d_max, theta, h, small) == 0.0);

  const Eigen::VectorXd zero2 = Eigen::VectorXd::Zero(2);
  const ScalarFunctional d_tie = [&](const Eigen::VectorXd& v) { return eval_derivative(max, zero2, v); };
  h << 1, 2;
  CHECK(directional_derivative_check(phi_max, d_tie, zero2, h, steps) == 0.0);
}

TEST_CASE("delta residual decays for the whole catalog") {
  RandomStream rng(derive_seed(18, {1}));
  const std::vector<double> steps{1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  const Eigen::Index m = 6;
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(m, 0.0, 1.0);
  std::vector<std::pair<FunctionalSpec, Eigen::Index>> catalog{
      {FunctionalSpec::abs_mean(), 1},
      {FunctionalSpec::max_coord(3), 3},
      {FunctionalSpec::stoch_dom(GridFunction(grid, Eigen::VectorXd::Ones(m))), 2 * m},
      {FunctionalSpec::convex_distance(ConvexSet::nonpositive_orthant(3)), 3},
      {FunctionalSpec::convex_distance(ConvexSet::monotone_cone(Eigen::VectorXd::Constant(5, 0.2))), 5},
  };
  for (const auto& [spec, d] : catalog) {
    const ScalarFunctional phi = [&](const Eigen::VectorXd& t) { return eval_functional(spec, t); };
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::VectorXd theta(d), h(d);
      for (Eigen::Index i = 0; i < d; ++i) {
        // Half the coordinates sit at zero so that kinks and ties get exercised.
        theta(i) = rng.bernoulli(0.5) ? 0.0 : rng.normal();
        h(i) = rng.normal();
      }
      if (spec.kind() == FunctionalKind::kConvexDistance) theta = project(spec.set(), theta);
      const ScalarFunctional d_phi = [&](const Eigen::VectorXd& v) { return eval_derivative(spec, theta, v); };
      CHECK(directional_derivative_check(phi, d_phi, theta, h, steps, 1) <= 1e-6);
    }
  }
}

TEST_CASE("test inversion") {
  // Degenerate law: only the candidate equal to the statistic survives.
  const std::vector<double> grid{0.0, 0.5, 1.0, 1.5, 2.0};
  const auto degenerate = [](double c0) {
    return decide(std::abs(1.0 - c0), point_mass(0.0), 0.05, 0.0);
  };
  const ConfidenceSet single = invert_test_for_ci(degenerate, grid);
  REQUIRE(single.accepted.size() == 1);
  CHECK(single.accepted[0] == 1.0);

  const auto tight = [](double c0) {
    return decide(std::abs(3.0 - c0), EmpiricalLaw(std::vector<double>{0.0, 0.01, 0.02}), 0.05, 0.0);
  };
  const ConfidenceSet around = invert_test_for_ci(tight, {2.0, 2.5, 3.0, 3.5, 4.0});
  CHECK(std::find(around.accepted.begin(), around.accepted.end(), 3.0) != around.accepted.end());

  // Normal-theory interval for |mean| with mean 2 and n = 400.
  RandomStream rng(derive_seed(19, {1}));
  const std::size_t n = 400;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += (2.0 + rng.normal()) / static_cast<double>(n);
  std::vector<double> atoms(20000);
  for (double& a : atoms) a = std::abs(rng.normal());
  const EmpiricalLaw half_normal(std::move(atoms));
  const double root_n = std::sqrt(static_cast<double>(n));
  const auto test = [&](double c0) {
    return decide(root_n * std::abs(std::abs(mean) - c0), half_normal, 0.05, 0.0);
  };
  std::vector<double> candidates;
  for (int k = 0; k <= 400; ++k) candidates.push_back(1.6 + 0.002 * k);
  const ConfidenceSet ci = invert_test_for_ci(test, candidates);
  REQUIRE(ci.intervals.size() == 1);
  CHECK(std::abs(ci.intervals[0].lower - (mean - 1.96 / 20)) <= 0.006);
  CHECK(std::abs(ci.intervals[0].upper - (mean + 1.96 / 20)) <= 0.006);
  CHECK(std::abs(mean - 2.0) < 3.0 / 20);
}

TEST_CASE("decide applies the bump strictly") {
  const EmpiricalLaw law(std::vector<double>{0.0, 1.0, 2.0});
  CHECK(decide(2.5, law, 0.05, 0.0).reject);
  CHECK_FALSE(decide(2.0, law, 0.05, 0.0).reject);
  CHECK_FALSE(decide(2.5, law, 0.05, 1e300).reject);
}

TEST_CASE("dense simplex on a small program") {
  LinearProgram lp;
  lp.a.resize(2, 2);
  lp.a << 1, 1, 1, -1;
  lp.b = Eigen::Vector2d(4, 1);
  lp.c = Eigen::Vector2d(-1, -2);
  lp.sense = {ConstraintSense::kLessEqual, ConstraintSense::kLessEqual};
  const LpSolution s = solve_lp(lp);
  REQUIRE(s.status == LpStatus::kOptimal);
  CHECK(s.objective == doctest::Approx(-8.0));
  CHECK(s.x(1) == doctest::Approx(4.0));

  lp.sense = {ConstraintSense::kGreaterEqual, ConstraintSense::kLessEqual};
  lp.c = Eigen::Vector2d(1, 1);
  CHECK(solve_lp(lp).objective == doctest::Approx(4.0));
}
