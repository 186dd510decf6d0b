#include "dirboot/grid_function.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace dirboot {

Eigen::VectorXd riemann_weights(const Eigen::VectorXd& grid) {
  const Eigen::Index m = grid.size();
  if (m == 0) throw std::invalid_argument("riemann_weights: empty grid");
  Eigen::VectorXd w(m);
  if (m == 1) {
    w(0) = 1.0;
    return w;
  }
  for (Eigen::Index i = 0; i + 1 < m; ++i) w(i) = grid(i + 1) - grid(i);
  w(m - 1) = w(m - 2);
  return w;
}

GridFunction::GridFunction(Eigen::VectorXd grid, Eigen::VectorXd values, Eigen::VectorXd weights)
    : grid_(std::move(grid)), values_(std::move(values)), weights_(std::move(weights)) {
  if (grid_.size() == 0) throw std::invalid_argument("GridFunction: empty grid");
  if (values_.size() != grid_.size() || weights_.size() != grid_.size()) {
    throw std::invalid_argument("GridFunction: grid has " + std::to_string(grid_.size()) +
                                " knots but values/weights have " +
                                std::to_string(values_.size()) + "/" +
                                std::to_string(weights_.size()));
  }
  for (Eigen::Index i = 0; i + 1 < grid_.size(); ++i) {
    if (!(grid_(i) < grid_(i + 1))) {
      throw std::invalid_argument("GridFunction: grid not strictly increasing at knot " +
                                  std::to_string(i + 1));
    }
  }
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    if (!(weights_(i) > 0.0) || !std::isfinite(weights_(i))) {
      throw std::invalid_argument("GridFunction: weight at knot " + std::to_string(i) +
                                  " is not positive");
    }
  }
}

GridFunction::GridFunction(Eigen::VectorXd grid, Eigen::VectorXd values)
    : GridFunction(grid, std::move(values), riemann_weights(grid)) {}

GridFunction GridFunction::from_vector(Eigen::VectorXd values) {
  const Eigen::Index d = values.size();
  return GridFunction(Eigen::VectorXd::LinSpaced(d, 0.0, static_cast<double>(d - 1)),
                      std::move(values), Eigen::VectorXd::Ones(d));
}

GridFunction GridFunction::with_values(Eigen::VectorXd values) const {
  return GridFunction(grid_, std::move(values), weights_);
}

bool GridFunction::same_grid(const GridFunction& other) const {
  return grid_.size() == other.grid_.size() && grid_ == other.grid_ &&
         weights_ == other.weights_;
}

double inner(const GridFunction& f, const GridFunction& g) {
  if (!f.same_grid(g)) throw std::invalid_argument("inner: grid functions live on different grids");
  return weighted_inner(f.values(), g.values(), f.weights());
}

double norm(const GridFunction& f) { return weighted_norm(f.values(), f.weights()); }

EstimateBundle::EstimateBundle(GridFunction theta_hat, std::size_t sample_size,
                               double rate_exponent)
    : theta_hat_(std::move(theta_hat)),
      sample_size_(sample_size),
      rate_exponent_(rate_exponent) {
  if (sample_size_ == 0) throw std::invalid_argument("EstimateBundle: sample_size must be positive");
  if (!(rate_exponent_ > 0.0)) {
    throw std::invalid_argument("EstimateBundle: rate exponent must be positive");
  }
  rate_ = std::pow(static_cast<double>(sample_size_), rate_exponent_);
}

EstimateBundle::EstimateBundle(Eigen::VectorXd theta_hat, std::size_t sample_size,
                               double rate_exponent)
    : EstimateBundle(GridFunction::from_vector(std::move(theta_hat)), sample_size,
                     rate_exponent) {}

}  // namespace dirboot
