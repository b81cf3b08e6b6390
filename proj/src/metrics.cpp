#include "mgb/metrics.hpp"

#include <cmath>

namespace mgb {

namespace {

/// Rows of I - beta P_S, with row i taken from P^{S(i)}.
Matrix policy_system(const MultiGearModel& model, const StationaryPolicy& policy) {
  const auto n = static_cast<Eigen::Index>(model.n_states());
  Matrix sys = Matrix::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    sys.row(i) -= model.discount() * model.transition(policy.gear(static_cast<State>(i))).row(i);
  return sys;
}

void require_finite(const Matrix& x, const char* what) {
  if (!x.allFinite()) throw NumericFailure(std::string("non-finite solution in ") + what);
}

}  // namespace

MetricBundle evaluate_policy(const MultiGearModel& model, const StationaryPolicy& policy) {
  check_policy(model, policy);
  const auto n = static_cast<Eigen::Index>(model.n_states());
  Matrix rhs(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Gear a = policy.gear(static_cast<State>(i));
    rhs(i, 0) = model.holding_cost(static_cast<State>(i), a);
    rhs(i, 1) = model.resource_use(static_cast<State>(i), a);
  }
  const Matrix sol = policy_system(model, policy).partialPivLu().solve(rhs);
  require_finite(sol, "policy evaluation");
  return MetricBundle{policy, sol.col(0), sol.col(1)};
}

Matrix occupancies(const MultiGearModel& model, const StationaryPolicy& policy, const Vector& p) {
  check_policy(model, policy);
  if (p.size() != static_cast<Eigen::Index>(model.n_states()))
    throw PolicyMismatch("initial distribution has the wrong length");
  // x (I - beta P_S) = p  <=>  (I - beta P_S)^T x^T = p^T
  const Vector x = policy_system(model, policy).transpose().partialPivLu().solve(p);
  require_finite(x, "occupancy solve");
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(model.n_states()), model.n_gears());
  for (Eigen::Index j = 0; j < x.size(); ++j) out(j, policy.gear(static_cast<State>(j))) = x(j);
  return out;
}

Vector uniform_distribution(std::size_t n) {
  return Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
}

double marginal_cost(const MultiGearModel& model, const MetricBundle& bundle, State j, Gear a,
                     Gear a2) {
  const auto r = static_cast<Eigen::Index>(j);
  const double flow = (model.transition(a).row(r) - model.transition(a2).row(r)).dot(bundle.cost);
  return model.holding_cost(j, a) - model.holding_cost(j, a2) + model.discount() * flow;
}

double marginal_resource(const MultiGearModel& model, const MetricBundle& bundle, State j, Gear a,
                         Gear a2) {
  const auto r = static_cast<Eigen::Index>(j);
  const double flow =
      (model.transition(a2).row(r) - model.transition(a).row(r)).dot(bundle.resource);
  return model.resource_use(j, a2) - model.resource_use(j, a) + model.discount() * flow;
}

double mp_metric(const MultiGearModel& model, const MetricBundle& bundle, State j, Gear a, Gear a2,
                 double eps_g) {
  const double g = marginal_resource(model, bundle, j, a, a2);
  if (!(g > eps_g)) throw MpUndefined(j, a, a2, g);
  return marginal_cost(model, bundle, j, a, a2) / g;
}

AdjacentMarginals adjacent_marginals(const MultiGearModel& model, const MetricBundle& bundle) {
  const auto n = static_cast<Eigen::Index>(model.n_states());
  const Gear gears = model.n_gears();
  AdjacentMarginals out{Matrix::Zero(n, gears), Matrix::Zero(n, gears)};
  // One product per gear instead of one per (j, a) pair.
  std::vector<Vector> pf(static_cast<std::size_t>(gears));
  std::vector<Vector> pg(static_cast<std::size_t>(gears));
  for (Gear a = 0; a < gears; ++a) {
    pf[static_cast<std::size_t>(a)] = model.transition(a) * bundle.cost;
    pg[static_cast<std::size_t>(a)] = model.transition(a) * bundle.resource;
  }
  const double beta = model.discount();
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto s = static_cast<State>(j);
    for (Gear a = 1; a < gears; ++a) {
      const auto lo = static_cast<std::size_t>(a - 1);
      const auto hi = static_cast<std::size_t>(a);
      out.cost(j, a) = model.holding_cost(s, a - 1) - model.holding_cost(s, a) +
                       beta * (pf[lo](j) - pf[hi](j));
      out.resource(j, a) = model.resource_use(s, a) - model.resource_use(s, a - 1) +
                           beta * (pg[hi](j) - pg[lo](j));
    }
  }
  return out;
}

ModifiedCosts modified_costs(const MultiGearModel& model) {
  const auto n = static_cast<Eigen::Index>(model.n_states());
  const double beta = model.discount();
  const Gear top = model.top_gear();
  const Matrix top_system = Matrix::Identity(n, n) - beta * model.transition(top);
  const auto lu = top_system.partialPivLu();
  const Vector top_value = lu.solve(model.holding_costs().col(top));
  require_finite(top_value, "modified cost transform");

  ModifiedCosts out{Matrix::Zero(n, model.n_gears()), lu.rcond()};
  for (Gear a = 0; a < top; ++a) {
    const Matrix sys = Matrix::Identity(n, n) - beta * model.transition(a);
    out.holding.col(a) = model.holding_costs().col(a) - sys * top_value;
  }
  return out;
}

double total_cost(const MetricBundle& bundle, double lambda, const Vector& p) {
  return p.dot(bundle.cost) + lambda * p.dot(bundle.resource);
}

}  // namespace mgb
