#include "dirboot/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dirboot {

const char* to_string(FunctionalKind kind) {
  switch (kind) {
    case FunctionalKind::kAbsMean: return "abs_mean";
    case FunctionalKind::kMaxCoord: return "max_coord";
    case FunctionalKind::kStochDom: return "stoch_dom";
    case FunctionalKind::kConvexDistance: return "convex_distance";
  }
  return "unknown";
}

FunctionalSpec::FunctionalSpec(FunctionalKind kind, Eigen::Index dimension)
    : kind_(kind), dimension_(dimension) {}

FunctionalSpec FunctionalSpec::abs_mean() { return FunctionalSpec(FunctionalKind::kAbsMean, 1); }

FunctionalSpec FunctionalSpec::max_coord(Eigen::Index dimension) {
  if (dimension < 1) throw std::invalid_argument("max_coord: dimension must be >= 1");
  return FunctionalSpec(FunctionalKind::kMaxCoord, dimension);
}

FunctionalSpec FunctionalSpec::stoch_dom(GridFunction weight) {
  if (weight.values().minCoeff() < 0.0) {
    throw std::invalid_argument("stoch_dom: weight function must be nonnegative");
  }
  FunctionalSpec spec(FunctionalKind::kStochDom, 2 * weight.size());
  spec.weight_ = std::move(weight);
  return spec;
}

FunctionalSpec FunctionalSpec::convex_distance(ConvexSet set) {
  FunctionalSpec spec(FunctionalKind::kConvexDistance, set.dimension());
  spec.set_ = std::make_shared<const ConvexSet>(std::move(set));
  return spec;
}

Eigen::Index FunctionalSpec::parameter_dimension() const { return dimension_; }

void FunctionalSpec::check_dimension(const Eigen::VectorXd& theta, const char* where) const {
  if (theta.size() != dimension_) {
    throw std::invalid_argument(std::string(where) + ": " + to_string(kind_) + " expects " +
                                std::to_string(dimension_) + " components, got " +
                                std::to_string(theta.size()));
  }
}

double FunctionalSpec::direction_norm(const Eigen::VectorXd& h) const {
  check_dimension(h, "direction_norm");
  switch (kind_) {
    case FunctionalKind::kAbsMean:
    case FunctionalKind::kMaxCoord:
      return h.lpNorm<Eigen::Infinity>();
    case FunctionalKind::kStochDom: {
      const Eigen::Index m = weight_.size();
      return h.head(m).lpNorm<Eigen::Infinity>() + h.tail(m).lpNorm<Eigen::Infinity>();
    }
    case FunctionalKind::kConvexDistance:
      return weighted_norm(h, set_->weights());
  }
  return 0.0;
}

double FunctionalSpec::lipschitz_constant() const {
  if (kind_ == FunctionalKind::kStochDom) {
    return weighted_inner(weight_.values(), Eigen::VectorXd::Ones(weight_.size()),
                          weight_.weights());
  }
  return 1.0;
}

namespace {

Eigen::VectorXd dominance_gap(const FunctionalSpec& spec, const Eigen::VectorXd& theta) {
  const Eigen::Index m = spec.dominance_weight().size();
  return theta.head(m) - theta.tail(m);
}

// w_i * cell_i per knot.
Eigen::VectorXd dominance_mass(const FunctionalSpec& spec) {
  return spec.dominance_weight().values().cwiseProduct(spec.dominance_weight().weights());
}

double positive_part(double x) { return x > 0.0 ? x : 0.0; }

double positive_tuning(const std::optional<double>& value, double fallback, const char* name) {
  const double v = value.value_or(fallback);
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string("estimate_derivative: ") + name +
                                " must be positive, got " + std::to_string(v));
  }
  return v;
}

}  // namespace

double eval_functional(const FunctionalSpec& spec, const Eigen::VectorXd& theta) {
  spec.check_dimension(theta, "eval_functional");
  switch (spec.kind()) {
    case FunctionalKind::kAbsMean:
      return std::abs(theta(0));
    case FunctionalKind::kMaxCoord:
      return theta.maxCoeff();
    case FunctionalKind::kStochDom:
      return dominance_mass(spec).dot(dominance_gap(spec, theta).unaryExpr(&positive_part));
    case FunctionalKind::kConvexDistance:
      return distance_to_set(spec.set(), theta);
  }
  return 0.0;
}

double eval_derivative(const FunctionalSpec& spec, const Eigen::VectorXd& theta0,
                       const Eigen::VectorXd& h) {
  spec.check_dimension(theta0, "eval_derivative");
  spec.check_dimension(h, "eval_derivative");
  switch (spec.kind()) {
    case FunctionalKind::kAbsMean:
      if (theta0(0) == 0.0) return std::abs(h(0));
      return theta0(0) > 0.0 ? h(0) : -h(0);
    case FunctionalKind::kMaxCoord: {
      const double top = theta0.maxCoeff();
      double best = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < theta0.size(); ++j) {
        if (theta0(j) == top) best = std::max(best, h(j));
      }
      return best;
    }
    case FunctionalKind::kStochDom: {
      const Eigen::VectorXd gap = dominance_gap(spec, theta0);
      const Eigen::VectorXd dh = dominance_gap(spec, h);
      const Eigen::VectorXd mass = dominance_mass(spec);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < gap.size(); ++i) {
        if (gap(i) > 0.0) {
          acc += mass(i) * dh(i);
        } else if (gap(i) == 0.0) {
          acc += mass(i) * positive_part(dh(i));
        }
      }
      return acc;
    }
    case FunctionalKind::kConvexDistance: {
      if (!spec.set().contains(theta0, 1e-9)) {
        throw std::domain_error(
            "eval_derivative: convex-distance derivative formula needs theta0 inside the set");
      }
      return cone_distance(tangent_cone(spec.set(), theta0, 1e-12), h);
    }
  }
  return 0.0;
}

DerivativeEstimate estimate_derivative(const FunctionalSpec& spec, const EstimateBundle& bundle,
                                       const DerivativeTuning& tuning) {
  const Eigen::VectorXd theta = bundle.theta_hat().values();
  spec.check_dimension(theta, "estimate_derivative");
  const double n = static_cast<double>(bundle.sample_size());
  DerivativeEstimate out;

  if (tuning.mode == DerivativeMode::kNumerical) {
    const double step = positive_tuning(tuning.step, std::pow(n, -0.25), "step");
    const double base = eval_functional(spec, theta);
    out.tuning = {"numerical_step", step};
    out.lipschitz_bound = spec.lipschitz_constant();
    out.evaluate = [spec, theta, base, step](const Eigen::VectorXd& h) {
      return (eval_functional(spec, theta + step * h) - base) / step;
    };
    return out;
  }

  switch (spec.kind()) {
    case FunctionalKind::kAbsMean: {
      const double kappa = positive_tuning(tuning.kappa, std::pow(n, -1.0 / 3.0), "kappa");
      out.tuning = {"kappa", kappa};
      out.lipschitz_bound = 1.0;
      const double value = theta(0);
      if (std::abs(value) <= kappa) {
        out.selected = {0};
        out.evaluate = [](const Eigen::VectorXd& h) { return std::abs(h(0)); };
      } else {
        const double sign = value > 0.0 ? 1.0 : -1.0;
        out.evaluate = [sign](const Eigen::VectorXd& h) { return sign * h(0); };
      }
      return out;
    }
    case FunctionalKind::kMaxCoord: {
      const double kappa = positive_tuning(tuning.kappa, std::pow(n, -1.0 / 3.0), "kappa");
      out.tuning = {"kappa", kappa};
      out.lipschitz_bound = 1.0;
      const double top = theta.maxCoeff();
      for (Eigen::Index j = 0; j < theta.size(); ++j) {
        if (theta(j) >= top - kappa) out.selected.push_back(j);
      }
      out.evaluate = [selected = out.selected](const Eigen::VectorXd& h) {
        double best = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j : selected) best = std::max(best, h(j));
        return best;
      };
      return out;
    }
    case FunctionalKind::kStochDom: {
      const double tol = positive_tuning(tuning.contact_tol, std::pow(n, -1.0 / 3.0), "contact_tol");
      out.tuning = {"contact_tol", tol};
      out.lipschitz_bound = spec.lipschitz_constant();
      const Eigen::VectorXd gap = dominance_gap(spec, theta);
      // +1 on the estimated positive set, 0 on the contact set, -1 elsewhere.
      Eigen::VectorXi region(gap.size());
      for (Eigen::Index i = 0; i < gap.size(); ++i) {
        if (std::abs(gap(i)) <= tol) {
          region(i) = 0;
          out.selected.push_back(i);
        } else {
          region(i) = gap(i) > tol ? 1 : -1;
        }
      }
      out.evaluate = [spec, region, mass = dominance_mass(spec)](const Eigen::VectorXd& h) {
        const Eigen::VectorXd dh = dominance_gap(spec, h);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < dh.size(); ++i) {
          if (region(i) > 0) {
            acc += mass(i) * dh(i);
          } else if (region(i) == 0) {
            acc += mass(i) * positive_part(dh(i));
          }
        }
        return acc;
      };
      return out;
    }
    case FunctionalKind::kConvexDistance: {
      const double eps = positive_tuning(tuning.epsilon, std::pow(n, -1.0 / 3.0), "epsilon");
      out.lipschitz_bound = 1.0;
      const Eigen::VectorXd projected = project(spec.set(), theta);
      if (tuning.sup_mode == SupMode::kThreshold) {
        out.tuning = {"epsilon_threshold", eps};
        ConeSpec cone = tangent_cone(spec.set(), projected, eps);
        out.selected = cone.active;
        out.evaluate = [cone = std::move(cone)](const Eigen::VectorXd& h) {
          return cone_distance(cone, h);
        };
      } else {
        out.tuning = {"epsilon_sup_search", eps};
        auto search = std::make_shared<SupSearchEstimator>(spec.set(), projected, eps);
        out.selected = search->candidates();
        out.evaluate = [search](const Eigen::VectorXd& h) { return (*search)(h); };
      }
      return out;
    }
  }
  throw std::invalid_argument("estimate_derivative: unknown functional");
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& covariance) {
  if (covariance.rows() != covariance.cols() || covariance.rows() == 0) {
    throw std::invalid_argument("psd_factor: covariance must be square and nonempty");
  }
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("psd_factor: covariance is not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance);
  const Eigen::VectorXd values = eig.eigenvalues();
  if (values.minCoeff() < -1e-10 * scale) {
    throw std::invalid_argument("psd_factor: covariance is not positive semidefinite (eigenvalue " +
                                std::to_string(values.minCoeff()) + ")");
  }
  return eig.eigenvectors() * values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

EmpiricalLaw local_limit_law_max(const Eigen::VectorXd& lambda,
                                 const Eigen::MatrixXd& covariance, std::size_t draws,
                                 std::uint64_t seed, std::size_t workers) {
  if (draws == 0) throw std::invalid_argument("local_limit_law_max: need at least one draw");
  if (covariance.rows() != lambda.size()) {
    throw std::invalid_argument("local_limit_law_max: covariance and lambda differ in dimension");
  }
  const Eigen::MatrixXd factor = psd_factor(covariance);
  const double top = lambda.maxCoeff();
  std::vector<double> atoms(draws);
  parallel_for(draws, workers, [&](std::size_t r) {
    RandomStream stream(derive_seed(seed, {stream_tag::kLimitLaw, r}));
    Eigen::VectorXd z(lambda.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = stream.normal();
    atoms[r] = (factor * z + lambda).maxCoeff() - top;
  });
  return EmpiricalLaw(std::move(atoms));
}

std::vector<ProbeRow> invariance_probe(const std::function<double(const Eigen::VectorXd&)>& derivative,
                                       const LimitSampler& sampler,
                                       const std::vector<Eigen::VectorXd>& shifts,
                                       std::size_t draws, std::uint64_t seed,
                                       std::size_t workers) {
  if (draws == 0) throw std::invalid_argument("invariance_probe: need at least one draw");
  std::vector<Eigen::VectorXd> limit(draws);
  parallel_for(draws, workers, [&](std::size_t r) {
    RandomStream stream(derive_seed(seed, {stream_tag::kProbe, r}));
    limit[r] = sampler(stream);
  });
  std::vector<double> base(draws);
  for (std::size_t r = 0; r < draws; ++r) base[r] = derivative(limit[r]);
  const EmpiricalLaw base_law(base);
  const double floor = 3.0 / std::sqrt(static_cast<double>(draws));

  std::vector<ProbeRow> rows;
  rows.reserve(shifts.size());
  for (std::size_t s = 0; s < shifts.size(); ++s) {
    if (shifts[s].size() != limit.front().size()) {
      throw std::invalid_argument("invariance_probe: shift " + std::to_string(s) +
                                  " has the wrong dimension");
    }
    const double at_shift = derivative(shifts[s]);
    std::vector<double> atoms(draws);
    for (std::size_t r = 0; r < draws; ++r) atoms[r] = derivative(limit[r] + shifts[s]) - at_shift;
    ProbeRow row;
    row.shift_id = s;
    row.bl_distance = law_distance(EmpiricalLaw(std::move(atoms)), base_law,
                                   LawMetric::kBoundedLipschitz);
    row.noise_floor = floor;
    row.indistinguishable = row.bl_distance < floor;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace dirboot
