#pragma once

#include <Eigen/Dense>

#include <vector>

namespace dirboot {

/// Weighted pool-adjacent-violators: the projection of `values` onto the
/// nondecreasing cone under sum_i w_i (x_i - v_i)^2. Weights must be positive.
template <typename DerivedV, typename DerivedW>
Eigen::Matrix<typename DerivedV::Scalar, Eigen::Dynamic, 1> isotonic_projection(
    const Eigen::MatrixBase<DerivedV>& values, const Eigen::MatrixBase<DerivedW>& weights) {
  using Scalar = typename DerivedV::Scalar;
  struct Block {
    Scalar mean;
    Scalar weight;
    Eigen::Index count;
  };
  const Eigen::Index m = values.size();
  std::vector<Block> stack;
  stack.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    stack.push_back({values(i), static_cast<Scalar>(weights(i)), 1});
    while (stack.size() > 1 && stack[stack.size() - 2].mean > stack.back().mean) {
      const Block top = stack.back();
      stack.pop_back();
      Block& prev = stack.back();
      const Scalar w = prev.weight + top.weight;
      prev.mean = (prev.weight * prev.mean + top.weight * top.mean) / w;
      prev.weight = w;
      prev.count += top.count;
    }
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(m);
  Eigen::Index pos = 0;
  for (const Block& b : stack) {
    out.segment(pos, b.count).setConstant(b.mean);
    pos += b.count;
  }
  return out;
}

}  // namespace dirboot
