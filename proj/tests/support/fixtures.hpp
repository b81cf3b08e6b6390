#pragma once

#include "mgb/model.hpp"

namespace mgb::testing {

/// Two states, two gears, beta = 1/2; indices 1 and 2.5.
inline MultiGearModel m1_model() {
  Matrix h(2, 2);
  h << 1, 0, 2, 0;
  Matrix q(2, 2);
  q << 0, 1, 0, 1;
  Matrix p1(2, 2);
  p1 << 0.5, 0.5, 0.5, 0.5;
  return MultiGearModel(0.5, h, q, {Matrix::Identity(2, 2), p1});
}

/// Single state with identical dynamics under every gear.
inline MultiGearModel single_state(double beta, std::vector<double> h, std::vector<double> q) {
  const auto gears = static_cast<Eigen::Index>(h.size());
  Matrix hm(1, gears);
  Matrix qm(1, gears);
  for (Eigen::Index a = 0; a < gears; ++a) {
    hm(0, a) = h[static_cast<std::size_t>(a)];
    qm(0, a) = q[static_cast<std::size_t>(a)];
  }
  return MultiGearModel(beta, hm, qm,
                        std::vector<Matrix>(static_cast<std::size_t>(gears), Matrix::Ones(1, 1)));
}

/// Gear 1 at state 2 routes to the low-resource state 1, so the marginal
/// resource at state 2 is negative under the all-passive policy.
inline MultiGearModel negative_marginal_model() {
  Matrix h(2, 2);
  h << 1, 0, 1, 0;
  Matrix q(2, 2);
  q << 0, 1, 5, 5.1;
  Matrix p1(2, 2);
  p1 << 0, 1, 1, 0;
  return MultiGearModel(0.9, h, q, {Matrix::Identity(2, 2), p1});
}

}  // namespace mgb::testing
