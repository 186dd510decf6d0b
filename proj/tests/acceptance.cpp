// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "dirboot/bootstrap.hpp"
#include "dirboot/cli/dispatch.hpp"
#include "dirboot/convex.hpp"
#include "dirboot/empirical_law.hpp"
#include "dirboot/functionals.hpp"
#include "dirboot/io.hpp"
#include "dirboot/pava.hpp"
#include "dirboot/quantile_sim.hpp"
#include "dirboot/quantreg.hpp"
#include "dirboot/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace dirboot;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  std::string name;
  bool ok;
  std::string detail;
};

std::map<int, Verdict> verdicts;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  verdicts[id] = {name, ok, detail};
  std::fprintf(stderr, "criterion %d done\n", id);
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buffer[256];
  std::snprintf(buffer, sizeof buffer, format, a, b, c);
  return buffer;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Tables -------------------------------------------------------------------

struct Cell {
  std::string row;
  double c = 0, kappa = 0, alpha = 0, delta = 0, rate = 0;
};

std::vector<Cell> read_tables(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<Cell> cells;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    Cell cell;
    cell.row = f[0];
    const auto num = [](const std::string& s) { return s.empty() ? 0.0 : std::stod(s); };
    cell.c = num(f[3]);
    cell.kappa = num(f[4]);
    cell.alpha = num(f[5]);
    cell.delta = num(f[6]);
    cell.rate = num(f[7]);
    cells.push_back(cell);
  }
  return cells;
}

double find_rate(const std::vector<Cell>& cells, double c, double kappa, double alpha, double delta) {
  for (const Cell& cell : cells) {
    if (cell.row == "bandwidth" && std::abs(cell.c - c) < 1e-12 && std::abs(cell.kappa - kappa) < 1e-12 &&
        std::abs(cell.alpha - alpha) < 1e-12 && cell.delta == delta) {
      return cell.rate;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

int simulate_ci(const fs::path& out, std::size_t workers) {
  cli::CommandLine flags;
  flags.command = cli::Command::kSimulateTables;
  flags.profile = cli::Profile::kCi;
  flags.seed = 0;
  flags.workers = workers;
  flags.out = out;
  std::ostringstream sink;
  return cli::run(flags, sink, std::cerr);
}

void table_criteria(const fs::path& root) {
  const auto start = std::chrono::steady_clock::now();
  const int status1 = simulate_ci(root / "workers1", 1);
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  const int status2 = simulate_ci(root / "workers2", 2);
  if (status1 != 0 || status2 != 0) {
    for (int id : {1, 2, 8}) report(id, "simulate-tables", false, "ci run failed");
    return;
  }
  const std::vector<Cell> cells = read_tables(root / "workers1" / "tables.csv");
  const double third = 1.0 / 3.0;

  struct Target {
    double c, kappa, alpha, delta, paper, tol;
  };
  const auto check = [&](int id, const std::string& name, const std::vector<Target>& targets) {
    bool ok = true;
    std::string detail;
    for (const Target& t : targets) {
      const double rate = find_rate(cells, t.c, t.kappa, t.alpha, t.delta);
      const bool hit = std::abs(rate - t.paper) <= t.tol;
      ok = ok && hit;
      char part[160];
      std::snprintf(part, sizeof part, "%sC=%g k=%.3g a=%g D=%g: %.3f vs %.3f", detail.empty() ? "" : "; ", t.c,
                    t.kappa, t.alpha, t.delta, rate, t.paper);
      detail += part;
    }
    char tail[64];
    std::snprintf(tail, sizeof tail, "; %.1f min per run", minutes);
    report(id, name, ok, detail + tail);
  };
  check(1, "table 1 size, n=200, 500 reps, tol 0.026",
        {{1, 0.25, 0.1, 0, 0.042, 0.026}, {0.01, third, 0.05, 0, 0.038, 0.026}, {0.01, third, 0.1, 2, 0.042, 0.026}});
  check(2, "table 2 power, n=200, C=1, tol 0.045",
        {{1, 0.25, 0.05, -4, 0.555, 0.045}, {1, 0.25, 0.05, -6, 0.934, 0.045}, {1, 0.25, 0.05, -8, 1.000, 0.045},
         {1, third, 0.05, -4, 0.555, 0.045}, {1, third, 0.05, -6, 0.934, 0.045}, {1, third, 0.05, -8, 1.000, 0.045}});

  bool same = true;
  std::string compared;
  for (const char* file : {"tables.csv", "curves.csv"}) {
    const bool match = slurp(root / "workers1" / file) == slurp(root / "workers2" / file);
    same = same && match;
    compared += std::string(compared.empty() ? "" : ", ") + file + (match ? " identical" : " DIFFER");
  }
  const bool f1 = fs::exists(root / "workers1" / "failures.csv");
  const bool f2 = fs::exists(root / "workers2" / "failures.csv");
  same = same && f1 == f2 && (!f1 || slurp(root / "workers1" / "failures.csv") == slurp(root / "workers2" / "failures.csv"));
  report(8, "determinism across worker counts", same, "workers 1 vs 2: " + compared);
}

// Theoretical rows ---------------------------------------------------------

void theoretical_criterion() {
  TheoreticalOptions options;
  options.draws = 100000;
  const std::vector<double> deltas{0, 1, 2, -4};
  const std::vector<double> paper{0.050, 0.018, 0.006, 0.623};
  const std::vector<double> rows = theoretical_local_rejection(deltas, {0.05}, options);
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    ok = ok && std::abs(rows[i] - paper[i]) <= 0.01;
    char part[80];
    std::snprintf(part, sizeof part, "%sD=%g: %.4f vs %.3f", i ? "; " : "", deltas[i], rows[i], paper[i]);
    detail += part;
  }
  report(3, "theoretical rows, alpha=0.05, R=1e5, tol 0.01", ok, detail);
}

// Bootstrap failure --------------------------------------------------------

struct AbsMeanLaws {
  EmpiricalLaw standard;
  EmpiricalLaw modified;
};

AbsMeanLaws abs_mean_laws(std::size_t n, std::size_t draws, std::uint64_t seed) {
  RandomStream rng(derive_seed(seed, {stream_tag::kData, n}));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = rng.normal();
  BootstrapOptions options;
  options.draws = draws;
  options.seed = derive_seed(seed, {stream_tag::kBootstrap, n});
  const BootstrapEnsemble e = bootstrap_ensemble(weighted_mean_estimator(x), n, options);
  const FunctionalSpec spec = FunctionalSpec::abs_mean();
  const DerivativeEstimate d = estimate_derivative(spec, EstimateBundle(e.theta_hat(), n));
  return {standard_law(e, [&](const Eigen::VectorXd& t) { return eval_functional(spec, t); }),
          modified_law(e, d.evaluate)};
}

EmpiricalLaw half_normal(std::size_t draws, std::uint64_t seed) {
  RandomStream rng(derive_seed(seed, {stream_tag::kLimitLaw}));
  std::vector<double> atoms(draws);
  for (double& a : atoms) a = std::abs(rng.normal());
  return EmpiricalLaw(std::move(atoms));
}

void failure_criterion() {
  // The truth is the exact law of sqrt(n)|mean| for N(0,1) data, i.e. |N(0,1)|.
  const EmpiricalLaw truth = half_normal(1000000, 7);
  const std::size_t reps = 40;
  std::vector<double> standard_ks, modified_ks;
  for (std::size_t n : {100, 1000, 10000}) {
    double s = 0.0, m = 0.0;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const AbsMeanLaws laws = abs_mean_laws(n, 2000, derive_seed(100, {rep}));
      s += ks_distance(laws.standard, truth) / reps;
      m += ks_distance(laws.modified, truth) / reps;
    }
    standard_ks.push_back(s);
    modified_ks.push_back(m);
  }
  const bool standard_ok = standard_ks[0] > 0.05 && standard_ks[1] > 0.05 && standard_ks[2] > 0.05;
  const bool modified_ok = modified_ks[0] > modified_ks[1] && modified_ks[1] > modified_ks[2] && modified_ks[2] < 0.05;
  report(4, "bootstrap failure for |mean| at 0, B=2000, mean KS over 40 datasets", standard_ok && modified_ok,
         fmt("standard KS %.3f/%.3f/%.3f", standard_ks[0], standard_ks[1], standard_ks[2]) +
             fmt(", modified KS %.4f/%.4f/%.4f for n=1e2/1e3/1e4", modified_ks[0], modified_ks[1], modified_ks[2]));
}

void critical_value_criterion() {
  const std::size_t n = 10000;
  RandomStream rng(derive_seed(5, {stream_tag::kData}));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, 0) = rng.normal();
  TestOptions options;
  options.alpha = 0.05;
  options.bootstrap.draws = 10000;
  options.bootstrap.seed = 5;
  const TestReport r = run_test(weighted_mean_estimator(x), n, FunctionalSpec::abs_mean(), options);
  report(5, "modified critical value, |mean| at 0, n=1e4, B=1e4", std::abs(r.critical_value - 1.96) <= 0.06,
         fmt("c_0.95 = %.4f, target 1.96 +/- 0.06", r.critical_value));
}

// Oracles ------------------------------------------------------------------

Eigen::VectorXd isotonic_brute_force(const Eigen::VectorXd& v, const Eigen::VectorXd& w) {
  const Eigen::Index d = v.size();
  Eigen::VectorXd best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << (d - 1)); ++mask) {
    Eigen::VectorXd fit(d);
    Eigen::Index start = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
      if (!(i == d - 1 || (mask >> i) & 1u)) continue;
      const Eigen::Index len = i - start + 1;
      fit.segment(start, len).setConstant(w.segment(start, len).dot(v.segment(start, len)) / w.segment(start, len).sum());
      start = i + 1;
    }
    bool monotone = true;
    for (Eigen::Index i = 0; i + 1 < d; ++i) monotone = monotone && fit(i) <= fit(i + 1) + 1e-14;
    const double loss = (w.array() * (fit - v).array().square()).sum();
    if (monotone && loss < best_loss) {
      best_loss = loss;
      best = fit;
    }
  }
  return best;
}

void oracle_criterion() {
  RandomStream rng(61);
  double pava = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(8));
    Eigen::VectorXd v(d), w(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      v(i) = 2.0 * rng.normal();
      w(i) = 0.1 + rng.uniform();
    }
    pava = std::max(pava, (project(ConvexSet::monotone_cone(w), v) - isotonic_brute_force(v, w)).cwiseAbs().maxCoeff());
  }
  double bl = 0.0;
  for (double t : {0.0, 0.1, 0.5, 1.0, 2.0, 3.0, 5.0}) {
    const EmpiricalLaw a(std::vector<double>{0.0});
    const EmpiricalLaw b(std::vector<double>{t});
    bl = std::max(bl, std::abs(bl_distance_lp(a, b) - std::min(t, 2.0)));
  }
  report(6, "oracle equivalence", pava <= 1e-8 && bl <= 1e-9,
         fmt("PAVA vs QP max error %.2e over 200 instances; BL LP vs min(t,2) max error %.2e", pava, bl));
}

// Property suites ----------------------------------------------------------

Eigen::VectorXd normal_vector(Eigen::Index d, RandomStream& rng) {
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = rng.normal();
  return v;
}

void property_criterion() {
  RandomStream rng(62);
  const Eigen::Index m = 6;
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(m, 0.0, 1.0);
  const std::vector<FunctionalSpec> catalog{
      FunctionalSpec::abs_mean(), FunctionalSpec::max_coord(4),
      FunctionalSpec::stoch_dom(GridFunction(grid, Eigen::VectorXd::Ones(m))),
      FunctionalSpec::convex_distance(ConvexSet::nonpositive_orthant(3)),
      FunctionalSpec::convex_distance(ConvexSet::monotone_cone(Eigen::VectorXd::Constant(5, 0.2)))};
  const auto kinked = [&](const FunctionalSpec& spec) {
    Eigen::VectorXd theta(spec.parameter_dimension());
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = rng.bernoulli(0.4) ? 0.0 : rng.normal();
    if (spec.kind() == FunctionalKind::kConvexDistance) theta = project(spec.set(), theta);
    return theta;
  };

  double homogeneity = 0.0, subadditivity = -INFINITY, residual = 0.0;
  for (const FunctionalSpec& spec : catalog) {
    const Eigen::Index d = spec.parameter_dimension();
    const ScalarFunctional phi = [&](const Eigen::VectorXd& t) { return eval_functional(spec, t); };
    for (int trial = 0; trial < 200; ++trial) {
      const Eigen::VectorXd theta = kinked(spec);
      const Eigen::VectorXd h1 = normal_vector(d, rng);
      const Eigen::VectorXd h2 = normal_vector(d, rng);
      const double base = eval_derivative(spec, theta, h1);
      for (double a : {0.5, 2.0, 10.0}) {
        homogeneity = std::max(homogeneity, std::abs(eval_derivative(spec, theta, a * h1) - a * base) /
                                                std::max(1.0, std::abs(a * base)));
      }
      if (spec.kind() != FunctionalKind::kAbsMean) {
        subadditivity = std::max(subadditivity, eval_derivative(spec, theta, h1 + h2) - base -
                                                    eval_derivative(spec, theta, h2));
      }
      const ScalarFunctional deriv = [&](const Eigen::VectorXd& v) { return eval_derivative(spec, theta, v); };
      residual = std::max(residual, directional_derivative_check(phi, deriv, theta, h1, {1e-4, 1e-5, 1e-6}, 1));
    }
  }

  double expansion = -INFINITY, moreau = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.below(5));
    Eigen::VectorXd w(d);
    for (Eigen::Index i = 0; i < d; ++i) w(i) = 0.1 + rng.uniform();
    const Eigen::MatrixXd normals = Eigen::MatrixXd::NullaryExpr(2, d, [&] { return rng.normal(); });
    const Eigen::VectorXd feasible = normal_vector(d, rng);
    const Eigen::VectorXd offsets = normals * feasible + Eigen::Vector2d(rng.uniform(), rng.uniform());
    const Eigen::VectorXd lower = normal_vector(d, rng);
    for (const ConvexSet& set : {ConvexSet::nonpositive_orthant(w), ConvexSet::monotone_cone(w),
                                 ConvexSet::box(lower, lower + Eigen::VectorXd::Ones(d), w),
                                 ConvexSet::halfspaces(normals, offsets, feasible, w)}) {
      const Eigen::VectorXd x = 2.0 * normal_vector(d, rng);
      const Eigen::VectorXd y = 2.0 * normal_vector(d, rng);
      expansion = std::max(expansion, weighted_norm(project(set, x) - project(set, y), w) - weighted_norm(x - y, w));
      const ConeSpec cone = tangent_cone(set, project(set, x), 0.2 * rng.uniform());
      const Eigen::VectorXd h = normal_vector(d, rng);
      const Eigen::VectorXd p = project_tangent(cone, h);
      moreau = std::max(moreau, std::abs((w.array() * p.array() * (h - p).array()).sum()));
      subadditivity = std::max(subadditivity, cone_distance(cone, h + x) - cone_distance(cone, h) - cone_distance(cone, x));
    }
  }

  // QR optimality on every knot of a batch of resampled fits.
  QuantileSimConfig config;
  config.delta = -4.0;
  const Dataset data = simulate_dgp(config, 0);
  const Eigen::MatrixXd design = data.design();
  std::size_t fits = 0, certified = 0;
  for (std::size_t b = 0; b < 50; ++b) {
    RandomStream stream(derive_seed(63, {b}));
    const Eigen::VectorXd w = draw_resample_weights(ResampleScheme::multinomial(), 200, stream);
    const QRFit fit = qr_fit(data, config.tau_grid, w);
    for (Eigen::Index k = 0; k < config.tau_grid.size(); ++k) {
      ++fits;
      const Eigen::VectorXd r = data.y - design * fit.beta_of_tau[static_cast<std::size_t>(k)];
      certified += subgradient_balance(r, w, config.tau_grid(k), 1e-9 * (1.0 + data.y.cwiseAbs().maxCoeff()));
    }
  }

  const bool ok = homogeneity <= 1e-12 && subadditivity <= 1e-10 && expansion <= 1e-10 && moreau <= 1e-10 &&
                  residual <= 1e-6 && certified == fits;
  char detail[400];
  std::snprintf(detail, sizeof detail,
                "homogeneity %.1e, subadditivity excess %.1e, nonexpansiveness excess %.1e, Moreau %.1e, "
                "delta residual %.1e at step 1e-6, QR certificates %zu/%zu",
                homogeneity, std::max(subadditivity, 0.0), std::max(expansion, 0.0), moreau, residual, certified, fits);
  report(7, "property suites", ok, detail);
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "dirboot-acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  try {
    table_criteria(root);
    theoretical_criterion();
    failure_criterion();
    critical_value_criterion();
    oracle_criterion();
    property_criterion();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  int failed = 0;
  for (const auto& [id, v] : verdicts) {
    std::printf("criterion %d [%s]: %s (%s)\n", id, v.name.c_str(), v.ok ? "PASS" : "FAIL", v.detail.c_str());
    failed += v.ok ? 0 : 1;
  }
  std::printf("%zu criteria checked, %d failed\n", verdicts.size(), failed);
  return failed == 0 && verdicts.size() == 8 ? 0 : 1;
}
