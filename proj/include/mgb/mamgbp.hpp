#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mgb/ds_index.hpp"
#include "mgb/oracle.hpp"

namespace mgb {

using JointState = std::vector<State>;
using JointAction = std::vector<Gear>;

/// L projects sharing a discount factor and a per-period resource budget.
struct JointInstance {
  std::vector<MultiGearModel> projects;
  double budget = 0.0;
};

/// Slack allowed when comparing joint resource use against the budget.
inline constexpr double kBudgetSlack = 1e-12;

/// Problems with the instance; empty iff valid.
std::vector<std::string> validate(const JointInstance& instance);

/// Mixed-radix numbering of joint states; project 0 is the most significant digit.
class JointSpace {
 public:
  explicit JointSpace(const JointInstance& instance);

  std::size_t size() const { return size_; }
  std::size_t n_projects() const { return radix_.size(); }
  std::size_t encode(const JointState& state) const;
  JointState decode(std::size_t index) const;

  /// Product of per-project transition rows under a joint action, length size().
  Vector transition_row(const JointInstance& instance, const JointState& state,
                        const JointAction& action) const;

 private:
  std::vector<std::size_t> radix_;
  std::vector<std::size_t> stride_;
  std::size_t size_ = 1;
};

double joint_resource(const JointInstance& instance, const JointState& state,
                      const JointAction& action);
double joint_cost(const JointInstance& instance, const JointState& state,
                  const JointAction& action);
bool is_feasible(const JointInstance& instance, const JointState& state, const JointAction& action);

/// Feasible joint actions at a state, in odometer order (last project fastest).
std::vector<JointAction> feasible_actions(const JointInstance& instance, const JointState& state);

struct JointLimits {
  /// Cap on sum over joint states of the joint action count.
  double max_state_actions = 1e6;
  /// Cap on joint states for dense linear solves.
  std::size_t max_dense_states = 2000;
};

/// Joint state count and state-action count; throws SizeCapExceeded if over a cap.
void check_joint_size(const JointInstance& instance, const JointLimits& limits,
                      bool dense = true);

struct JointSolution {
  Vector value;                      // F* per joint state (encoded index)
  std::vector<JointAction> policy;   // optimal action per joint state
  std::size_t iterations = 0;

  double at(const JointSpace& space, const JointState& state) const {
    return value(static_cast<Eigen::Index>(space.encode(state)));
  }
};

/// Exact optimum of the budget-constrained problem by policy iteration on the product MDP.
JointSolution solve_joint_dp(const JointInstance& instance, const JointLimits& limits = {});

struct DualSolution {
  double lambda_star = 0.0;
  double bound = 0.0;
  std::vector<double> per_project_values;  // V_l*(i_l, lambda*)
  std::size_t iterations = 0;
  double subgradient = 0.0;  // at lambda*
};

struct DualOptions {
  std::size_t max_bisections = 64;
  std::size_t max_doublings = 60;
  SolverOptions solver;
  unsigned threads = 1;
};

/// sum_l V_l*(i_l, lambda) - lambda budget / (1 - beta).
double dual_objective(const JointInstance& instance, const JointState& initial, double lambda,
                      const SolverOptions& solver = {});

/// Maximizes the concave dual over lambda >= 0 by bisection on the sign of a subgradient.
DualSolution lagrangian_bound(const JointInstance& instance, const JointState& initial,
                              const DualOptions& options = {});

struct IndexPolicyStep {
  JointAction action;
  std::size_t iterations = 0;
};

/// Downshift index rule: start every project at its top gear, then while the
/// budget is exceeded or some active project's index is <= 0, downshift the
/// project with the smallest index at its current gear (lowest project number
/// on ties). Uncontrollable states stay at gear 0; a NaN index counts as -inf.
IndexPolicyStep downshift_policy_action(const JointInstance& instance,
                                        const std::vector<IndexTable>& tables,
                                        const JointState& state);

using JointPolicy = std::function<JointAction(const JointState&)>;

/// The returned policies keep a reference to `instance`.

JointPolicy downshift_index_policy(const JointInstance& instance, std::vector<IndexTable> tables);
JointPolicy all_passive_policy(const JointInstance& instance);
JointPolicy tabulated_policy(const JointInstance& instance, std::vector<JointAction> actions);

struct PolicyValue {
  double mean = 0.0;
  double std_error = 0.0;  // zero in exact mode
  std::size_t replications = 0;
  std::size_t horizon = 0;
  bool exact = true;
};

/// Solves the evaluation system of a feasible joint policy on the product chain.
/// Returns the value of every joint state.
Vector joint_policy_values(const JointInstance& instance, const JointPolicy& policy,
                                   const JointLimits& limits = {});

PolicyValue evaluate_joint_policy_exact(const JointInstance& instance, const JointPolicy& policy,
                                        const JointState& initial, const JointLimits& limits = {});

struct MonteCarloOptions {
  std::size_t replications = 1000;
  /// 0 chooses the smallest T with beta^T max|h| L / (1 - beta) < 1e-6.
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

std::size_t default_horizon(const JointInstance& instance);

/// Truncated-horizon simulation. Every random draw is a pure function of
/// (seed, replication, project, period), so results do not depend on threads.
PolicyValue evaluate_joint_policy_mc(const JointInstance& instance, const JointPolicy& policy,
                                     const JointState& initial, const MonteCarloOptions& options = {});

/// Uniform [0, 1) draw keyed by a counter tuple.
double counter_uniform(std::uint64_t seed, std::uint64_t replication, std::uint64_t project,
                       std::uint64_t period);

}  // namespace mgb
