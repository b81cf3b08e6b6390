#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "mgb/errors.hpp"

namespace mgb {

using State = std::size_t;  // 0-based internally; files and reports use 1-based labels
using Gear = int;           // 0 is passive, 1..A active

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A finite-state multi-gear bandit: one project, gears 0..A ordered by
/// increasing resource consumption, discounted with factor beta.
///
/// Immutable after construction. The constructor only checks that array
/// shapes agree; use validate() for the modelling invariants.
class MultiGearModel {
 public:
  /// holding_cost and resource_use are N x (A+1); transitions has A+1
  /// entries of size N x N. `uncontrollable` lists 0-based states.
  MultiGearModel(double discount, Matrix holding_cost, Matrix resource_use,
                 std::vector<Matrix> transitions,
                 std::vector<State> uncontrollable = {},
                 std::vector<std::string> state_names = {});

  std::size_t n_states() const { return static_cast<std::size_t>(holding_.rows()); }
  int n_gears() const { return static_cast<int>(holding_.cols()); }
  Gear top_gear() const { return n_gears() - 1; }
  double discount() const { return discount_; }

  double holding_cost(State i, Gear a) const { return holding_(static_cast<Eigen::Index>(i), a); }
  double resource_use(State i, Gear a) const { return resource_(static_cast<Eigen::Index>(i), a); }
  const Matrix& holding_costs() const { return holding_; }
  const Matrix& resource_uses() const { return resource_; }
  const Matrix& transition(Gear a) const { return transitions_.at(static_cast<std::size_t>(a)); }
  double transition(Gear a, State i, State j) const {
    return transitions_[static_cast<std::size_t>(a)](static_cast<Eigen::Index>(i),
                                                     static_cast<Eigen::Index>(j));
  }

  bool is_controllable(State i) const { return !uncontrollable_mask_.at(i); }
  const std::vector<State>& uncontrollable_states() const { return uncontrollable_; }
  std::vector<State> controllable_states() const;
  std::size_t n_controllable() const { return n_states() - uncontrollable_.size(); }

  /// Number of (controllable state, active gear) pairs, i.e. DS steps.
  std::size_t n_index_pairs() const {
    return n_controllable() * static_cast<std::size_t>(top_gear());
  }

  const std::vector<std::string>& state_names() const { return state_names_; }
  /// External label of a state: its alias if one was given, else the 1-based number.
  std::string state_label(State i) const;

  /// Same model with holding costs replaced.
  MultiGearModel with_holding_costs(Matrix holding_cost) const;
  /// Same model with resource consumptions replaced.
  MultiGearModel with_resource_uses(Matrix resource_use) const;
  /// Same model with another discount factor.
  MultiGearModel with_discount(double discount) const;

 private:
  double discount_;
  Matrix holding_;
  Matrix resource_;
  std::vector<Matrix> transitions_;
  std::vector<State> uncontrollable_;
  std::vector<bool> uncontrollable_mask_;
  std::vector<std::string> state_names_;
};

/// Controllable-state/active-gear pair for which an index is defined.
struct StateGearPair {
  State state;
  Gear gear;
  friend bool operator==(const StateGearPair&, const StateGearPair&) = default;
  friend auto operator<=>(const StateGearPair&, const StateGearPair&) = default;
};

struct Violation {
  enum class Kind {
    non_finite,
    discount_range,
    probability_range,
    non_stochastic_row,
    negative_resource,
    gear_ordering,
    uncontrollable_mismatch,
  };
  Kind kind;
  State state;  // 0-based; meaningless for discount_range
  Gear gear;    // -1 when not tied to a gear
  std::string message;
};

const char* to_string(Violation::Kind kind);

/// Strict gear-ordering slack: q[i][a+1] - q[i][a] must exceed this.
inline constexpr double kGearOrderingSlack = 1e-12;
inline constexpr double kRowSumTolerance = 1e-12;

/// Every violated model invariant with its coordinates; empty iff valid.
std::vector<Violation> validate(const MultiGearModel& model);

/// Stationary deterministic policy: a gear for every state. Uncontrollable
/// states are kept at gear 0 by convention (all gears coincide there).
class StationaryPolicy {
 public:
  StationaryPolicy() = default;
  explicit StationaryPolicy(std::vector<Gear> gears) : gears_(std::move(gears)) {}

  /// (empty, ..., empty, N): top gear at every controllable state.
  static StationaryPolicy top(const MultiGearModel& model);
  /// (N, empty, ..., empty): gear 0 everywhere.
  static StationaryPolicy bottom(const MultiGearModel& model);

  std::size_t size() const { return gears_.size(); }
  Gear gear(State i) const { return gears_.at(i); }
  const std::vector<Gear>& gears() const { return gears_; }

  /// The partition S_a as sorted state lists, a = 0..n_gears-1.
  std::vector<std::vector<State>> partition(int n_gears) const;

  friend bool operator==(const StationaryPolicy&, const StationaryPolicy&) = default;
  friend auto operator<=>(const StationaryPolicy&, const StationaryPolicy&) = default;

 private:
  std::vector<Gear> gears_;
};

/// Throws PolicyMismatch unless the policy fits the model (size, gear range,
/// uncontrollable states at gear 0).
void check_policy(const MultiGearModel& model, const StationaryPolicy& policy);

/// T_j^{a,a'} S: move state j from gear `from` to gear `to`.
StationaryPolicy shift(const StationaryPolicy& policy, State j, Gear from, Gear to);

enum class PolicyOrder { less_equal, greater_equal, equal, incomparable };

const char* to_string(PolicyOrder order);

/// Gear-wise partial order: less_equal iff `lhs` never selects a higher gear than `rhs`.
PolicyOrder policy_order(const StationaryPolicy& lhs, const StationaryPolicy& rhs);

/// True iff lhs ⪯ rhs (including equality).
bool precedes(const StationaryPolicy& lhs, const StationaryPolicy& rhs);

}  // namespace mgb
