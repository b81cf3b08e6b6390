#include "mgb/mamgbp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mgb/metrics.hpp"
#include "parallel.hpp"

namespace mgb {

namespace {

double budget_limit(double budget) { return budget + kBudgetSlack * std::max(1.0, std::abs(budget)); }

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void check_state(const JointInstance& instance, const JointState& state) {
  if (state.size() != instance.projects.size())
    throw PolicyMismatch("joint state has the wrong number of projects");
  for (std::size_t l = 0; l < state.size(); ++l)
    if (state[l] >= instance.projects[l].n_states())
      throw PolicyMismatch("joint state out of range for project " + std::to_string(l + 1));
}

double discount_of(const JointInstance& instance) {
  if (instance.projects.empty()) throw Error("instance has no projects");
  return instance.projects.front().discount();
}

struct SubgradientPoint {
  double objective;
  double subgradient;
  std::vector<double> values;
};

SubgradientPoint dual_point(const JointInstance& instance, const JointState& initial, double lambda,
                            const SolverOptions& solver, unsigned threads) {
  const std::size_t L = instance.projects.size();
  std::vector<double> values(L);
  std::vector<double> resources(L);
  detail::parallel_for(L, threads, [&](std::size_t l) {
    const auto& p = instance.projects[l];
    const auto sol = solve_lambda_price(p, lambda, solver);
    values[l] = sol.value(static_cast<Eigen::Index>(initial[l]));
    resources[l] = evaluate_policy(p, sol.policy).resource(static_cast<Eigen::Index>(initial[l]));
  });
  const double horizon_budget = instance.budget / (1.0 - discount_of(instance));
  SubgradientPoint out{-lambda * horizon_budget, -horizon_budget, values};
  for (std::size_t l = 0; l < L; ++l) {
    out.objective += values[l];
    out.subgradient += resources[l];
  }
  return out;
}

}  // namespace

std::vector<std::string> validate(const JointInstance& instance) {
  std::vector<std::string> problems;
  if (instance.projects.empty()) {
    problems.push_back("instance has no projects");
    return problems;
  }
  if (!std::isfinite(instance.budget) || instance.budget < 0.0)
    problems.push_back("budget must be finite and nonnegative");
  const double beta = instance.projects.front().discount();
  double passive_peak = 0.0;
  for (std::size_t l = 0; l < instance.projects.size(); ++l) {
    const auto& p = instance.projects[l];
    for (const auto& v : mgb::validate(p))
      problems.push_back("project " + std::to_string(l + 1) + ": " + v.message);
    if (p.discount() != beta)
      problems.push_back("project " + std::to_string(l + 1) + " has a different discount factor");
    passive_peak += p.resource_uses().col(0).maxCoeff();
  }
  if (passive_peak > budget_limit(instance.budget)) {
    std::ostringstream os;
    os.precision(17);
    os << "all-passive action needs up to " << passive_peak << " > budget " << instance.budget;
    problems.push_back(os.str());
  }
  return problems;
}

JointSpace::JointSpace(const JointInstance& instance) {
  const std::size_t L = instance.projects.size();
  radix_.resize(L);
  stride_.resize(L);
  for (std::size_t l = L; l-- > 0;) {
    radix_[l] = instance.projects[l].n_states();
    stride_[l] = size_;
    size_ *= radix_[l];
  }
}

std::size_t JointSpace::encode(const JointState& state) const {
  std::size_t idx = 0;
  for (std::size_t l = 0; l < radix_.size(); ++l) idx += state.at(l) * stride_[l];
  return idx;
}

JointState JointSpace::decode(std::size_t index) const {
  JointState s(radix_.size());
  for (std::size_t l = 0; l < radix_.size(); ++l) {
    s[l] = index / stride_[l];
    index %= stride_[l];
  }
  return s;
}

Vector JointSpace::transition_row(const JointInstance& instance, const JointState& state,
                                  const JointAction& action) const {
  Vector row = Vector::Ones(1);
  for (std::size_t l = 0; l < radix_.size(); ++l) {
    const Vector p = instance.projects[l]
                         .transition(action[l])
                         .row(static_cast<Eigen::Index>(state[l]))
                         .transpose();
    Vector next(row.size() * p.size());
    for (Eigen::Index k = 0; k < row.size(); ++k) next.segment(k * p.size(), p.size()) = row(k) * p;
    row.swap(next);
  }
  return row;
}

double joint_resource(const JointInstance& instance, const JointState& state,
                      const JointAction& action) {
  double total = 0.0;
  for (std::size_t l = 0; l < instance.projects.size(); ++l)
    total += instance.projects[l].resource_use(state[l], action[l]);
  return total;
}

double joint_cost(const JointInstance& instance, const JointState& state, const JointAction& action) {
  double total = 0.0;
  for (std::size_t l = 0; l < instance.projects.size(); ++l)
    total += instance.projects[l].holding_cost(state[l], action[l]);
  return total;
}

bool is_feasible(const JointInstance& instance, const JointState& state, const JointAction& action) {
  if (action.size() != instance.projects.size()) return false;
  for (std::size_t l = 0; l < action.size(); ++l) {
    const auto& p = instance.projects[l];
    if (action[l] < 0 || action[l] > p.top_gear()) return false;
    if (!p.is_controllable(state[l]) && action[l] != 0) return false;
  }
  return joint_resource(instance, state, action) <= budget_limit(instance.budget);
}

std::vector<JointAction> feasible_actions(const JointInstance& instance, const JointState& state) {
  const std::size_t L = instance.projects.size();
  std::vector<Gear> top(L);
  for (std::size_t l = 0; l < L; ++l)
    top[l] = instance.projects[l].is_controllable(state[l]) ? instance.projects[l].top_gear() : 0;
  std::vector<JointAction> out;
  JointAction a(L, 0);
  while (true) {
    if (joint_resource(instance, state, a) <= budget_limit(instance.budget)) out.push_back(a);
    std::size_t l = L;
    while (l > 0 && a[l - 1] == top[l - 1]) a[--l] = 0;
    if (l == 0) break;
    ++a[l - 1];
  }
  return out;
}

void check_joint_size(const JointInstance& instance, const JointLimits& limits, bool dense) {
  double states = 1.0;
  double actions = 1.0;
  for (const auto& p : instance.projects) {
    states *= static_cast<double>(p.n_states());
    actions *= static_cast<double>(p.n_gears());
  }
  if (states * actions > limits.max_state_actions) {
    std::ostringstream os;
    os << "joint problem has up to " << states * actions << " state-action pairs (cap "
       << limits.max_state_actions << ")";
    throw SizeCapExceeded(os.str(), states * actions, limits.max_state_actions);
  }
  if (dense && states > static_cast<double>(limits.max_dense_states)) {
    std::ostringstream os;
    os << "joint problem has " << states << " states (dense cap " << limits.max_dense_states << ")";
    throw SizeCapExceeded(os.str(), states, static_cast<double>(limits.max_dense_states));
  }
}

namespace {

Vector evaluate_actions(const JointInstance& instance, const JointSpace& space,
                        const std::vector<JointAction>& actions) {
  const auto n = static_cast<Eigen::Index>(space.size());
  const double beta = discount_of(instance);
  Matrix lhs = Matrix::Identity(n, n);
  Vector rhs(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto state = space.decode(static_cast<std::size_t>(s));
    const auto& a = actions[static_cast<std::size_t>(s)];
    lhs.row(s) -= beta * space.transition_row(instance, state, a).transpose();
    rhs(s) = joint_cost(instance, state, a);
  }
  Vector v = lhs.partialPivLu().solve(rhs);
  if (!v.allFinite()) throw NumericFailure("joint policy evaluation produced non-finite values");
  return v;
}

}  // namespace

JointSolution solve_joint_dp(const JointInstance& instance, const JointLimits& limits) {
  check_joint_size(instance, limits);
  const JointSpace space(instance);
  const double beta = discount_of(instance);
  const std::size_t S = space.size();

  std::vector<JointState> states(S);
  std::vector<std::vector<JointAction>> options(S);
  std::vector<std::vector<Vector>> rows(S);
  for (std::size_t s = 0; s < S; ++s) {
    states[s] = space.decode(s);
    options[s] = feasible_actions(instance, states[s]);
    if (options[s].empty()) throw Error("joint state without a feasible action");
    for (const auto& a : options[s]) rows[s].push_back(space.transition_row(instance, states[s], a));
  }

  JointSolution sol;
  std::vector<std::size_t> choice(S, 0);
  std::vector<JointAction> actions(S);
  for (std::size_t s = 0; s < S; ++s) actions[s] = options[s][0];
  for (std::size_t it = 0; it < 10000; ++it) {
    sol.iterations = it + 1;
    sol.value = evaluate_actions(instance, space, actions);
    bool changed = false;
    for (std::size_t s = 0; s < S; ++s) {
      auto q = [&](std::size_t k) {
        return joint_cost(instance, states[s], options[s][k]) + beta * rows[s][k].dot(sol.value);
      };
      const double cur = q(choice[s]);
      std::size_t best = choice[s];
      double best_q = cur;
      for (std::size_t k = 0; k < options[s].size(); ++k) {
        const double v = q(k);
        if (v < best_q) {
          best_q = v;
          best = k;
        }
      }
      if (best != choice[s] && best_q < cur - 1e-12 * (1.0 + std::abs(cur))) {
        choice[s] = best;
        actions[s] = options[s][best];
        changed = true;
      }
    }
    if (!changed) break;
  }
  sol.policy = std::move(actions);
  return sol;
}

double dual_objective(const JointInstance& instance, const JointState& initial, double lambda,
                      const SolverOptions& solver) {
  check_state(instance, initial);
  return dual_point(instance, initial, lambda, solver, 1).objective;
}

DualSolution lagrangian_bound(const JointInstance& instance, const JointState& initial,
                              const DualOptions& options) {
  check_state(instance, initial);
  DualSolution out;
  auto point = [&](double lambda) {
    ++out.iterations;
    return dual_point(instance, initial, lambda, options.solver, options.threads);
  };
  auto finish = [&](double lambda, const SubgradientPoint& p) {
    out.lambda_star = lambda;
    out.bound = p.objective;
    out.per_project_values = p.values;
    out.subgradient = p.subgradient;
    return out;
  };

  const auto at_zero = point(0.0);
  if (at_zero.subgradient <= 0.0) return finish(0.0, at_zero);

  double hi = 0.0;
  for (const auto& p : instance.projects) hi = std::max(hi, initial_price_span(p));
  auto hi_point = point(hi);
  for (std::size_t k = 0; k < options.max_doublings && hi_point.subgradient > 0.0; ++k) {
    hi *= 2.0;
    hi_point = point(hi);
  }
  double lo = 0.0;
  auto lo_point = at_zero;
  for (std::size_t k = 0; k < options.max_bisections; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    auto mp = point(mid);
    if (mp.subgradient > 0.0) {
      lo = mid;
      lo_point = std::move(mp);
    } else {
      hi = mid;
      hi_point = std::move(mp);
    }
  }
  return lo_point.objective >= hi_point.objective ? finish(lo, lo_point) : finish(hi, hi_point);
}

IndexPolicyStep downshift_policy_action(const JointInstance& instance,
                                        const std::vector<IndexTable>& tables,
                                        const JointState& state) {
  check_state(instance, state);
  if (tables.size() != instance.projects.size())
    throw PolicyMismatch("one index table per project is required");
  const std::size_t L = instance.projects.size();
  IndexPolicyStep out;
  out.action.resize(L);
  for (std::size_t l = 0; l < L; ++l)
    out.action[l] = instance.projects[l].is_controllable(state[l]) ? instance.projects[l].top_gear() : 0;

  auto index_of = [&](std::size_t l) {
    const double m = tables[l].mpi(state[l], out.action[l]);
    return std::isnan(m) ? -std::numeric_limits<double>::infinity() : m;
  };
  while (true) {
    std::size_t pick = L;
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < L; ++l) {
      if (out.action[l] == 0) continue;
      const double m = index_of(l);
      if (pick == L || m < lowest) {
        lowest = m;
        pick = l;
      }
    }
    const bool over = joint_resource(instance, state, out.action) > budget_limit(instance.budget);
    if (pick == L || !(over || lowest <= 0.0)) break;
    --out.action[pick];
    ++out.iterations;
  }
  return out;
}

JointPolicy downshift_index_policy(const JointInstance& instance, std::vector<IndexTable> tables) {
  return [&instance, tables = std::move(tables)](const JointState& s) {
    return downshift_policy_action(instance, tables, s).action;
  };
}

JointPolicy all_passive_policy(const JointInstance& instance) {
  const std::size_t L = instance.projects.size();
  return [L](const JointState&) { return JointAction(L, 0); };
}

JointPolicy tabulated_policy(const JointInstance& instance, std::vector<JointAction> actions) {
  return [space = JointSpace(instance), actions = std::move(actions)](const JointState& s) {
    return actions.at(space.encode(s));
  };
}

Vector joint_policy_values(const JointInstance& instance, const JointPolicy& policy,
                           const JointLimits& limits) {
  check_joint_size(instance, limits);
  const JointSpace space(instance);
  std::vector<JointAction> actions(space.size());
  for (std::size_t s = 0; s < space.size(); ++s) {
    const auto state = space.decode(s);
    actions[s] = policy(state);
    if (!is_feasible(instance, state, actions[s])) throw Error("joint policy selects an infeasible action");
  }
  return evaluate_actions(instance, space, actions);
}

PolicyValue evaluate_joint_policy_exact(const JointInstance& instance, const JointPolicy& policy,
                                        const JointState& initial, const JointLimits& limits) {
  check_state(instance, initial);
  const Vector v = joint_policy_values(instance, policy, limits);
  PolicyValue out;
  out.mean = v(static_cast<Eigen::Index>(JointSpace(instance).encode(initial)));
  return out;
}

std::size_t default_horizon(const JointInstance& instance) {
  const double beta = discount_of(instance);
  double hmax = 0.0;
  for (const auto& p : instance.projects) hmax = std::max(hmax, p.holding_costs().cwiseAbs().maxCoeff());
  const double scale = hmax * static_cast<double>(instance.projects.size()) / (1.0 - beta);
  if (scale < 1e-6 || beta == 0.0) return 1;
  return static_cast<std::size_t>(std::ceil(std::log(1e-6 / scale) / std::log(beta))) + 1;
}

double counter_uniform(std::uint64_t seed, std::uint64_t replication, std::uint64_t project,
                       std::uint64_t period) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ replication);
  h = splitmix(h ^ project);
  h = splitmix(h ^ period);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

PolicyValue evaluate_joint_policy_mc(const JointInstance& instance, const JointPolicy& policy,
                                     const JointState& initial, const MonteCarloOptions& options) {
  check_state(instance, initial);
  if (options.replications == 0) throw Error("at least one replication is required");
  const double beta = discount_of(instance);
  const std::size_t T = options.horizon ? options.horizon : default_horizon(instance);
  const std::size_t L = instance.projects.size();

  std::vector<double> totals(options.replications);
  detail::parallel_for(options.replications, options.threads, [&](std::size_t r) {
    JointState s = initial;
    double disc = 1.0;
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const auto a = policy(s);
      if (!is_feasible(instance, s, a)) throw Error("joint policy selects an infeasible action");
      total += disc * joint_cost(instance, s, a);
      for (std::size_t l = 0; l < L; ++l) {
        const auto& p = instance.projects[l];
        const double u = counter_uniform(options.seed, r, l, t);
        const auto row = p.transition(a[l]).row(static_cast<Eigen::Index>(s[l]));
        double acc = 0.0;
        State next = s[l];
        for (Eigen::Index j = 0; j < row.size(); ++j) {
          if (row(j) <= 0.0) continue;
          next = static_cast<State>(j);
          acc += row(j);
          if (u < acc) break;
        }
        s[l] = next;
      }
      disc *= beta;
    }
    totals[r] = total;
  });

  PolicyValue out;
  out.exact = false;
  out.replications = options.replications;
  out.horizon = T;
  double sum = 0.0;
  for (double x : totals) sum += x;
  out.mean = sum / static_cast<double>(totals.size());
  if (totals.size() > 1) {
    double ss = 0.0;
    for (double x : totals) ss += (x - out.mean) * (x - out.mean);
    out.std_error = std::sqrt(ss / static_cast<double>(totals.size() - 1) / static_cast<double>(totals.size()));
  }
  return out;
}

}  // namespace mgb
