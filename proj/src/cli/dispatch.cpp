#include "dirboot/cli/dispatch.hpp"

#include "dirboot/bootstrap.hpp"
#include "dirboot/convex.hpp"
#include "dirboot/empirical_law.hpp"
#include "dirboot/functionals.hpp"
#include "dirboot/io.hpp"
#include "dirboot/projection_test.hpp"
#include "dirboot/quantile_sim.hpp"
#include "dirboot/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace dirboot::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Files read and written by one command, for the manifest.
struct Artifacts {
  std::map<std::string, fs::path> inputs;
  std::map<std::string, fs::path> outputs;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Eigen::VectorXd to_vector(const json& list) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(list.size()));
  for (std::size_t i = 0; i < list.size(); ++i) v(static_cast<Eigen::Index>(i)) = list[i].get<double>();
  return v;
}

template <typename T>
std::optional<T> optional_param(const json& params, const char* key) {
  if (!params.contains(key) || params.at(key).is_null()) return std::nullopt;
  return params.at(key).get<T>();
}

ResampleScheme scheme_from(const json& params) {
  const auto name = params.at("scheme").get<std::string>();
  if (name == "exponential") return ResampleScheme::multiplier(ResampleScheme::MultiplierLaw::kExponential);
  if (name == "gaussian") return ResampleScheme::multiplier(ResampleScheme::MultiplierLaw::kGaussian);
  return ResampleScheme::multinomial();
}

BootstrapOptions bootstrap_from(const RunConfig& config) {
  BootstrapOptions options;
  options.draws = config.params.at("B").get<std::size_t>();
  options.scheme = scheme_from(config.params);
  options.seed = config.seed;
  options.workers = config.workers;
  return options;
}

std::string verdict(const char* test, const TestReport& report) {
  char line[256];
  std::snprintf(line, sizeof line,
                "%s: %s (statistic %.6f, critical value %.6f, alpha %g, p-value %.4f)", test,
                report.reject ? "reject" : "fail to reject", report.statistic,
                report.critical_value, report.alpha, report.p_value);
  return line;
}

/// Observation matrix from a CSV whose columns are all numeric.
Eigen::MatrixXd read_observations(const fs::path& path, Eigen::Index min_rows) {
  const CsvTable table = read_csv(path);
  if (table.values.rows() < min_rows) {
    throw InputError(path.string() + ": need at least " + std::to_string(min_rows) + " rows");
  }
  return table.values;
}

std::vector<double> read_sample(const fs::path& path) {
  const CsvTable table = read_csv(path);
  if (table.columns.size() != 1) {
    throw InputError(path.string() + ": expected a single column of sample values");
  }
  if (table.values.rows() == 0) throw InputError(path.string() + ": no rows");
  return {table.values.data(), table.values.data() + table.values.rows()};
}

// simulate-tables --------------------------------------------------------

void simulate_tables(const RunConfig& config, std::ostream& out, Artifacts& artifacts) {
  const json& p = config.params;
  MonteCarloPlan plan;
  plan.sample_sizes = p.at("sample_sizes").get<std::vector<std::size_t>>();
  plan.deltas = p.at("deltas").get<std::vector<double>>();
  plan.bandwidths.clear();
  for (double c : p.at("C").get<std::vector<double>>()) {
    for (double k : p.at("kappa").get<std::vector<double>>()) plan.bandwidths.push_back({c, k});
  }
  plan.alphas = p.at("alphas").get<std::vector<double>>();
  plan.tau_grid = to_vector(p.at("tau_grid"));
  plan.draws = p.at("B").get<std::size_t>();
  plan.mc_reps = p.at("mc_reps").get<std::size_t>();
  plan.theoretical = p.at("theoretical").get<bool>();
  plan.theoretical_draws = p.at("theoretical_draws").get<std::size_t>();
  plan.seed = config.seed;
  plan.workers = config.workers;

  const MonteCarloResult result = run_monte_carlo(plan);

  const fs::path tables = config.out / "tables.csv";
  write_table_csv(tables, result.cells);
  artifacts.outputs["tables"] = tables;

  // Size/power curves against Delta, one series per bandwidth and the limit.
  const fs::path curves = config.out / "curves.csv";
  {
    std::ostringstream csv;
    csv << "series,n,alpha,delta,rejection_rate\n";
    for (const TableCell& c : result.cells) {
      std::string series = "theoretical";
      if (!c.theoretical) series = "C=" + format_double(c.scale) + " kappa=" + format_double(c.kappa);
      char rate[32];
      std::snprintf(rate, sizeof rate, "%.6f", c.rejection_rate);
      csv << series << ',' << (c.theoretical ? std::string() : std::to_string(c.n)) << ','
          << format_double(c.alpha) << ',' << format_double(c.delta) << ',' << rate << '\n';
    }
    write_text(curves, csv.str());
  }
  artifacts.outputs["curves"] = curves;

  if (!result.failures.empty()) {
    const fs::path failures = config.out / "failures.csv";
    std::ostringstream csv;
    csv << "n,rep,message\n";
    for (const auto& f : result.failures) {
      std::string message = f.message;
      for (char& ch : message) {
        if (ch == ',' || ch == '\n') ch = ';';
      }
      csv << f.n << ',' << f.rep << ',' << message << '\n';
    }
    write_text(failures, csv.str());
    artifacts.outputs["failures"] = failures;
  }
  out << "simulate-tables: " << result.cells.size() << " cells written to " << tables.string()
      << " (" << result.failures.size() << " failed replications)\n";
}

// test-monotone ----------------------------------------------------------

void test_monotone(const RunConfig& config, std::ostream& out, Artifacts& artifacts) {
  const json& p = config.params;
  QuantileSimConfig sim;
  sim.n = p.at("n").get<std::size_t>();
  sim.delta = p.at("delta").get<double>();
  sim.tau_grid = to_vector(p.at("tau_grid"));
  sim.draws = p.at("B").get<std::size_t>();
  sim.epsilon = {p.at("C").get<double>(), p.at("kappa").get<double>()};
  sim.alpha = p.at("alpha").get<double>();
  sim.seed = config.seed;
  sim.workers = config.workers;

  Dataset data;
  if (const auto path = optional_param<std::string>(p, "data")) {
    data = read_dataset_csv(*path);
    artifacts.inputs["data"] = *path;
    sim.n = static_cast<std::size_t>(data.size());
  } else {
    sim.validate();
    data = simulate_dgp(sim, p.at("rep").get<std::size_t>());
  }
  const auto n = static_cast<std::size_t>(data.size());
  const SupMode mode = p.at("mode").get<std::string>() == "sup-search" ? SupMode::kSupSearch
                                                                     : SupMode::kThreshold;
  const MonotonicityEvidence evidence =
      monotonicity_evidence(data, sim, derive_seed(config.seed, {stream_tag::kBootstrap, n}));
  const TestReport report = monotonicity_test(evidence, sim.epsilon, sim.alpha, mode);

  write_json(config.out / "report.json", to_json(report));
  write_grid_function_csv(config.out / "theta_hat.csv", evidence.ensemble.theta_hat());
  write_ensemble_csv(config.out / "ensemble.csv", evidence.ensemble);
  artifacts.outputs["report"] = config.out / "report.json";
  artifacts.outputs["theta_hat"] = config.out / "theta_hat.csv";
  artifacts.outputs["ensemble"] = config.out / "ensemble.csv";
  out << verdict("test-monotone", report) << '\n';
}

// test-moments -----------------------------------------------------------

ConvexSet moment_set(const json& p, Eigen::Index k, Artifacts& artifacts) {
  const auto kind = p.at("set").get<std::string>();
  if (kind == "orthant") return ConvexSet::nonpositive_orthant(k);
  if (kind == "box") {
    const auto lower = optional_param<std::vector<double>>(p, "lower");
    const auto upper = optional_param<std::vector<double>>(p, "upper");
    if (!lower || !upper) throw UsageError("set: 'box' needs both 'lower' and 'upper'");
    if (static_cast<Eigen::Index>(lower->size()) != k || static_cast<Eigen::Index>(upper->size()) != k) {
      throw UsageError("lower/upper: need " + std::to_string(k) + " entries, one per data column");
    }
    Eigen::VectorXd lo = Eigen::Map<const Eigen::VectorXd>(lower->data(), k);
    Eigen::VectorXd hi = Eigen::Map<const Eigen::VectorXd>(upper->data(), k);
    if (!(lo.array() <= hi.array()).all()) throw UsageError("lower: must not exceed upper");
    return ConvexSet::box(lo, hi);
  }
  const auto path = optional_param<std::string>(p, "halfspaces");
  const auto point = optional_param<std::vector<double>>(p, "feasible_point");
  if (!path || !point) throw UsageError("set: 'halfspaces' needs 'halfspaces' (CSV) and 'feasible_point'");
  artifacts.inputs["halfspaces"] = *path;
  const HalfspaceList list = read_halfspaces_csv(*path);
  if (list.normals.cols() != k) {
    throw UsageError("halfspaces: constraint dimension " + std::to_string(list.normals.cols()) +
                     " differs from the " + std::to_string(k) + " data columns");
  }
  if (static_cast<Eigen::Index>(point->size()) != k) {
    throw UsageError("feasible_point: need " + std::to_string(k) + " entries");
  }
  try {
    return ConvexSet::halfspaces(list.normals, list.offsets,
                                 Eigen::Map<const Eigen::VectorXd>(point->data(), k));
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("feasible_point: ") + e.what());
  }
}

void test_moments(const RunConfig& config, std::ostream& out, Artifacts& artifacts) {
  const json& p = config.params;
  const auto path = p.at("data").get<std::string>();
  artifacts.inputs["data"] = path;
  const Eigen::MatrixXd x = read_observations(path, 2);
  const auto n = static_cast<std::size_t>(x.rows());
  const Eigen::Index k = x.cols();
  const WeightedEstimator estimator = weighted_mean_estimator(x);

  TestReport report;
  if (p.at("functional").get<std::string>() == "max") {
    TestOptions options;
    options.alpha = p.at("alpha").get<double>();
    options.delta_bump = p.at("delta_bump").get<double>();
    options.bootstrap = bootstrap_from(config);
    options.tuning.kappa = optional_param<double>(p, "selection_slack");
    report = run_test(estimator, n, FunctionalSpec::max_coord(k), options);
  } else {
    ProjectionTestOptions options;
    options.alpha = p.at("alpha").get<double>();
    options.delta_bump = p.at("delta_bump").get<double>();
    options.bootstrap = bootstrap_from(config);
    options.epsilon = {p.at("C").get<double>(), p.at("kappa").get<double>()};
    options.mode = p.at("mode").get<std::string>() == "sup-search" ? SupMode::kSupSearch
                                                                   : SupMode::kThreshold;
    report = run_projection_test(estimator, n, moment_set(p, k, artifacts), options);
  }
  write_json(config.out / "report.json", to_json(report));
  artifacts.outputs["report"] = config.out / "report.json";
  out << verdict("test-moments", report) << '\n';
}

// test-dominance ---------------------------------------------------------

void test_dominance(const RunConfig& config, std::ostream& out, Artifacts& artifacts) {
  const json& p = config.params;
  const auto first_path = p.at("first").get<std::string>();
  const auto second_path = p.at("second").get<std::string>();
  artifacts.inputs["first"] = first_path;
  artifacts.inputs["second"] = second_path;
  const std::vector<double> first = read_sample(first_path);
  const std::vector<double> second = read_sample(second_path);

  double lo = std::min(*std::min_element(first.begin(), first.end()),
                       *std::min_element(second.begin(), second.end()));
  double hi = std::max(*std::max_element(first.begin(), first.end()),
                       *std::max_element(second.begin(), second.end()));
  lo = optional_param<double>(p, "grid_lower").value_or(lo);
  hi = optional_param<double>(p, "grid_upper").value_or(hi);
  if (!(hi > lo)) throw UsageError("grid_lower/grid_upper: the grid needs grid_upper > grid_lower");
  const auto m = static_cast<Eigen::Index>(p.at("grid_points").get<std::size_t>());
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(m, lo, hi);
  const GridFunction weight(grid, Eigen::VectorXd::Ones(m));

  const auto n1 = static_cast<Eigen::Index>(first.size());
  const auto n2 = static_cast<Eigen::Index>(second.size());
  Eigen::VectorXd pooled(n1 + n2);
  for (Eigen::Index i = 0; i < n1; ++i) pooled(i) = first[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 0; i < n2; ++i) pooled(n1 + i) = second[static_cast<std::size_t>(i)];

  // theta = (F1, F2) on the grid, each the weighted ecdf of its own sample.
  const WeightedEstimator estimator = [=](const Eigen::VectorXd& w) -> Eigen::VectorXd {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(2 * m);
    const double w1 = w.head(n1).sum();
    const double w2 = w.tail(n2).sum();
    if (!(std::abs(w1) > 0.0) || !(std::abs(w2) > 0.0)) {
      throw std::domain_error("a resample left one group without weight");
    }
    for (Eigen::Index k = 0; k < m; ++k) {
      double f1 = 0.0;
      double f2 = 0.0;
      for (Eigen::Index i = 0; i < n1; ++i) f1 += pooled(i) <= grid(k) ? w(i) : 0.0;
      for (Eigen::Index i = 0; i < n2; ++i) f2 += pooled(n1 + i) <= grid(k) ? w(n1 + i) : 0.0;
      theta(k) = f1 / w1;
      theta(m + k) = f2 / w2;
    }
    return theta;
  };

  TestOptions options;
  options.alpha = p.at("alpha").get<double>();
  options.delta_bump = p.at("delta_bump").get<double>();
  options.bootstrap = bootstrap_from(config);
  options.tuning.contact_tol = optional_param<double>(p, "contact_tol");
  const TestReport report =
      run_test(estimator, static_cast<std::size_t>(n1 + n2), FunctionalSpec::stoch_dom(weight), options);
  write_json(config.out / "report.json", to_json(report));
  artifacts.outputs["report"] = config.out / "report.json";
  out << verdict("test-dominance (H0: first dominates second)", report) << '\n';
}

// diagnose-bootstrap -----------------------------------------------------

void diagnose_bootstrap(const RunConfig& config, std::ostream& out, Artifacts& artifacts) {
  const json& p = config.params;
  const bool abs_mean = p.at("functional").get<std::string>() == "abs_mean";

  Eigen::MatrixXd x;
  std::optional<Eigen::VectorXd> truth_mean;
  double sigma = p.at("sigma").get<double>();
  if (const auto path = optional_param<std::string>(p, "data")) {
    artifacts.inputs["data"] = *path;
    x = read_observations(*path, 2);
  } else {
    const Eigen::VectorXd mean = to_vector(p.at("mean"));
    const auto n = static_cast<Eigen::Index>(p.at("n").get<std::size_t>());
    RandomStream stream(derive_seed(config.seed, {stream_tag::kData}));
    x.resize(n, mean.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < mean.size(); ++j) x(i, j) = mean(j) + sigma * stream.normal();
    }
    truth_mean = mean;
  }
  const Eigen::Index k = x.cols();
  if (abs_mean && k != 1) throw UsageError("functional: abs_mean needs one-dimensional data");
  const auto n = static_cast<std::size_t>(x.rows());
  const FunctionalSpec spec = abs_mean ? FunctionalSpec::abs_mean() : FunctionalSpec::max_coord(k);
  const ScalarFunctional phi = [&spec](const Eigen::VectorXd& t) { return eval_functional(spec, t); };

  const BootstrapEnsemble ensemble = bootstrap_ensemble(weighted_mean_estimator(x), n, bootstrap_from(config));
  const EstimateBundle bundle(ensemble.theta_hat(), n);
  DerivativeTuning tuning;
  tuning.kappa = optional_param<double>(p, "selection_slack");
  const DerivativeEstimate derivative = estimate_derivative(spec, bundle, tuning);
  const EmpiricalLaw standard = standard_law(ensemble, phi);
  const EmpiricalLaw modified = modified_law(ensemble, derivative.evaluate);

  json report;
  report["n"] = n;
  report["theta_hat"] = std::vector<double>(ensemble.theta_hat().values().data(),
                                            ensemble.theta_hat().values().data() + k);
  report["tuning"] = {{"mode", derivative.tuning.mode}, {"value", derivative.tuning.value}};
  report["seed_manifest"] = to_json(ensemble.manifest());
  report["standard_vs_modified"] = {
      {"bl", law_distance(standard, modified, LawMetric::kBoundedLipschitz)},
      {"ks", law_distance(standard, modified, LawMetric::kKolmogorovSmirnov)}};

  write_law_csv(config.out / "standard_law.csv", standard);
  write_law_csv(config.out / "modified_law.csv", modified);
  artifacts.outputs["standard_law"] = config.out / "standard_law.csv";
  artifacts.outputs["modified_law"] = config.out / "modified_law.csv";

  if (truth_mean) {
    // The sample mean of Gaussian data is exactly N(mu, sigma^2 I / n), so the
    // finite-sample law of sqrt(n)(phi(theta_hat) - phi(mu)) is drawn directly.
    const auto draws = p.at("truth_draws").get<std::size_t>();
    const double root_n = std::sqrt(static_cast<double>(n));
    const double center = phi(*truth_mean);
    std::vector<double> atoms(draws);
    RandomStream stream(derive_seed(config.seed, {stream_tag::kLimitLaw}));
    Eigen::VectorXd z(k);
    for (std::size_t r = 0; r < draws; ++r) {
      for (Eigen::Index j = 0; j < k; ++j) z(j) = stream.normal();
      atoms[r] = root_n * (phi(*truth_mean + sigma * z / root_n) - center);
    }
    const EmpiricalLaw truth(std::move(atoms));
    write_law_csv(config.out / "truth_law.csv", truth);
    artifacts.outputs["truth_law"] = config.out / "truth_law.csv";
    report["standard_vs_truth"] = {{"ks", ks_distance(standard, truth)},
                                   {"bl", law_distance(standard, truth, LawMetric::kBoundedLipschitz)}};
    report["modified_vs_truth"] = {{"ks", ks_distance(modified, truth)},
                                   {"bl", law_distance(modified, truth, LawMetric::kBoundedLipschitz)}};
  }

  // Invariance probe of the estimated derivative under G ~ N(0, sample covariance).
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd covariance = centered.transpose() * centered / static_cast<double>(n - 1);
  const Eigen::MatrixXd factor = psd_factor(covariance);
  const LimitSampler sampler = [&factor, k](RandomStream& stream) {
    Eigen::VectorXd z(k);
    for (Eigen::Index j = 0; j < k; ++j) z(j) = stream.normal();
    return Eigen::VectorXd(factor * z);
  };
  std::vector<Eigen::VectorXd> shifts;
  if (const auto listed = optional_param<std::vector<std::vector<double>>>(p, "probe_shifts")) {
    for (const auto& s : *listed) {
      if (static_cast<Eigen::Index>(s.size()) != k) {
        throw UsageError("probe_shifts: each shift needs " + std::to_string(k) + " entries");
      }
      shifts.emplace_back(Eigen::Map<const Eigen::VectorXd>(s.data(), k));
    }
  } else {
    for (double scale : {0.5, 1.0, 2.0, 3.0}) shifts.push_back(scale * Eigen::VectorXd::Unit(k, 0));
  }
  const std::vector<ProbeRow> probe =
      invariance_probe(derivative.evaluate, sampler, shifts, p.at("probe_draws").get<std::size_t>(),
                       derive_seed(config.seed, {stream_tag::kProbe}), config.workers);
  write_probe_csv(config.out / "probe.csv", probe);
  artifacts.outputs["probe"] = config.out / "probe.csv";

  double worst = 0.0;
  bool invariant = true;
  for (const ProbeRow& row : probe) {
    worst = std::max(worst, row.bl_distance);
    invariant = invariant && row.indistinguishable;
  }
  report["probe_max_bl"] = worst;
  report["probe_noise_floor"] = probe.empty() ? 0.0 : probe.front().noise_floor;
  report["derivative_looks_linear"] = invariant;
  write_json(config.out / "report.json", report);
  artifacts.outputs["report"] = config.out / "report.json";

  char line[256];
  std::snprintf(line, sizeof line,
                "diagnose-bootstrap: %s (probe max BL %.4f vs noise floor %.4f; "
                "standard vs modified BL %.4f)",
                invariant ? "derivative looks linear, standard bootstrap plausible"
                          : "derivative is not translation invariant, standard bootstrap suspect",
                worst, probe.empty() ? 0.0 : probe.front().noise_floor,
                report["standard_vs_modified"]["bl"].get<double>());
  out << line << '\n';
}

// bl-distance ------------------------------------------------------------

void bl_distance(const RunConfig& config, std::ostream& out, Artifacts& artifacts) {
  const json& p = config.params;
  const auto first_path = p.at("first").get<std::string>();
  const auto second_path = p.at("second").get<std::string>();
  artifacts.inputs["first"] = first_path;
  artifacts.inputs["second"] = second_path;
  const EmpiricalLaw first = read_law_csv(first_path);
  const EmpiricalLaw second = read_law_csv(second_path);
  const bool bl = p.at("metric").get<std::string>() == "bl";
  const double d = law_distance(first, second, bl ? LawMetric::kBoundedLipschitz
                                                  : LawMetric::kKolmogorovSmirnov);
  write_json(config.out / "distance.json", json{{"metric", bl ? "bl" : "ks"}, {"distance", d}});
  artifacts.outputs["distance"] = config.out / "distance.json";
  char line[64];
  std::snprintf(line, sizeof line, "%s distance: %.6f", bl ? "bl" : "ks", d);
  out << line << '\n';
}

void write_manifest(const RunConfig& config, const Artifacts& artifacts) {
  json effective = config.effective();
  // Scheduling and destination do not change results; keep them out of the hash.
  json hashed = effective;
  hashed.erase("workers");
  hashed.erase("out");
  json manifest;
  manifest["tool"] = "dirboot";
  manifest["command"] = to_string(config.command);
  manifest["effective_config"] = effective;
  manifest["config_hash"] = git_blob_hash(hashed.dump());
  json inputs = json::object();
  for (const auto& [name, path] : artifacts.inputs) {
    inputs[name] = {{"path", path.string()}, {"hash", git_blob_hash(read_file(path))}};
  }
  json outputs = json::object();
  for (const auto& [name, path] : artifacts.outputs) {
    outputs[name] = {{"path", path.filename().string()}, {"hash", git_blob_hash(read_file(path))}};
  }
  manifest["inputs"] = inputs;
  manifest["outputs"] = outputs;
  write_json(config.out / "manifest.json", manifest);
}

}  // namespace

void dispatch(const RunConfig& config, std::ostream& out) {
  Artifacts artifacts;
  fs::create_directories(config.out);
  switch (config.command) {
    case Command::kSimulateTables: simulate_tables(config, out, artifacts); break;
    case Command::kTestMonotone: test_monotone(config, out, artifacts); break;
    case Command::kTestMoments: test_moments(config, out, artifacts); break;
    case Command::kTestDominance: test_dominance(config, out, artifacts); break;
    case Command::kDiagnoseBootstrap: diagnose_bootstrap(config, out, artifacts); break;
    case Command::kBlDistance: bl_distance(config, out, artifacts); break;
  }
  write_manifest(config, artifacts);
}

int run(const CommandLine& flags, std::ostream& out, std::ostream& err) {
  try {
    dispatch(parse_config(flags), out);
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "pipeline failure: " << e.what() << '\n';
    return kExitPipeline;
  }
}

}  // namespace dirboot::cli
