#pragma once

#include "mgb/model.hpp"

namespace mgb {

/// Marginal-resource positivity threshold: g <= this is treated as "not positive".
inline constexpr double kDefaultEpsG = 1e-12;

/// Discounted cost and resource metrics F(S), G(S) of one stationary policy,
/// one entry per initial state.
struct MetricBundle {
  StationaryPolicy policy;
  Vector cost;      // F_i(S)
  Vector resource;  // G_i(S)
};

/// Solves (I - beta P_S) [F G] = [h_S q_S] by dense LU with partial pivoting.
MetricBundle evaluate_policy(const MultiGearModel& model, const StationaryPolicy& policy);

/// Discounted state-gear occupancies x[j][a] from initial distribution p.
/// Nonzero only at (j, S(j)).
Matrix occupancies(const MultiGearModel& model, const StationaryPolicy& policy, const Vector& p);

/// Uniform initial distribution over all states.
Vector uniform_distribution(std::size_t n);

/// f_j^{a,a'}(S): cost decrement from switching the first-period gear at j
/// from a to a', then following S.
double marginal_cost(const MultiGearModel& model, const MetricBundle& bundle, State j, Gear a,
                     Gear a2);

/// g_j^{a,a'}(S): matching resource increment.
double marginal_resource(const MultiGearModel& model, const MetricBundle& bundle, State j, Gear a,
                         Gear a2);

/// m_j^{a,a'}(S) = f/g. Throws MpUndefined when g <= eps_g.
double mp_metric(const MultiGearModel& model, const MetricBundle& bundle, State j, Gear a, Gear a2,
                 double eps_g = kDefaultEpsG);

/// Adjacent-gear marginal metrics f_j^{a-1,a}(S) and g_j^{a-1,a}(S) for every
/// state and active gear a = 1..A. Column 0 is unused (zero).
struct AdjacentMarginals {
  Matrix cost;
  Matrix resource;
};

AdjacentMarginals adjacent_marginals(const MultiGearModel& model, const MetricBundle& bundle);

/// Holding costs with the top gear's cost folded into the others:
/// h_hat^a = h^a - (I - beta P^a)(I - beta P^A)^{-1} h^A, so h_hat^A = 0.
struct ModifiedCosts {
  Matrix holding;  // N x (A+1)
  /// Reciprocal condition estimate of I - beta P^A; degrades as beta -> 1.
  double rcond;
};

ModifiedCosts modified_costs(const MultiGearModel& model);

/// Total discounted cost V_p(lambda, S) = F_p(S) + lambda G_p(S).
double total_cost(const MetricBundle& bundle, double lambda, const Vector& p);

}  // namespace mgb
