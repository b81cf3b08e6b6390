#include "mgb/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mgb {

InvalidShift::InvalidShift(std::size_t state_, int from_, int to_, const std::string& why)
    : Error("invalid shift at state " + std::to_string(state_ + 1) + " from gear " +
            std::to_string(from_) + " to gear " + std::to_string(to_) + ": " + why),
      state(state_),
      from(from_),
      to(to_) {}

MpUndefined::MpUndefined(std::size_t state_, int from_, int to_, double g_)
    : Error("MP metric undefined at state " + std::to_string(state_ + 1) + " for gears (" +
            std::to_string(from_) + "," + std::to_string(to_) +
            "): marginal resource " + std::to_string(g_) + " is not positive"),
      state(state_),
      from(from_),
      to(to_),
      g(g_) {}

SizeCapExceeded::SizeCapExceeded(const std::string& what, double size_, double cap_)
    : Error(what + ": size " + std::to_string(size_) + " exceeds cap " + std::to_string(cap_)),
      size(size_),
      cap(cap_) {}

MultiGearModel::MultiGearModel(double discount, Matrix holding_cost, Matrix resource_use,
                               std::vector<Matrix> transitions,
                               std::vector<State> uncontrollable,
                               std::vector<std::string> state_names)
    : discount_(discount),
      holding_(std::move(holding_cost)),
      resource_(std::move(resource_use)),
      transitions_(std::move(transitions)),
      uncontrollable_(std::move(uncontrollable)),
      state_names_(std::move(state_names)) {
  const auto n = holding_.rows();
  const auto gears = holding_.cols();
  if (n == 0 || gears == 0) throw ShapeError("model needs at least one state and one gear");
  if (resource_.rows() != n || resource_.cols() != gears)
    throw ShapeError("resource_use must have the same shape as holding_cost");
  if (static_cast<Eigen::Index>(transitions_.size()) != gears)
    throw ShapeError("expected one transition matrix per gear");
  for (const auto& p : transitions_)
    if (p.rows() != n || p.cols() != n) throw ShapeError("transition matrices must be N x N");
  if (!state_names_.empty() && static_cast<Eigen::Index>(state_names_.size()) != n)
    throw ShapeError("state_names must have one entry per state");

  std::sort(uncontrollable_.begin(), uncontrollable_.end());
  uncontrollable_.erase(std::unique(uncontrollable_.begin(), uncontrollable_.end()),
                        uncontrollable_.end());
  uncontrollable_mask_.assign(static_cast<std::size_t>(n), false);
  for (State i : uncontrollable_) {
    if (i >= static_cast<State>(n))
      throw ShapeError("uncontrollable state " + std::to_string(i + 1) + " out of range");
    uncontrollable_mask_[i] = true;
  }
}

std::vector<State> MultiGearModel::controllable_states() const {
  std::vector<State> out;
  out.reserve(n_controllable());
  for (State i = 0; i < n_states(); ++i)
    if (is_controllable(i)) out.push_back(i);
  return out;
}

std::string MultiGearModel::state_label(State i) const {
  if (!state_names_.empty()) return state_names_.at(i);
  return std::to_string(i + 1);
}

MultiGearModel MultiGearModel::with_holding_costs(Matrix holding_cost) const {
  return MultiGearModel(discount_, std::move(holding_cost), resource_, transitions_,
                        uncontrollable_, state_names_);
}

MultiGearModel MultiGearModel::with_resource_uses(Matrix resource_use) const {
  return MultiGearModel(discount_, holding_, std::move(resource_use), transitions_,
                        uncontrollable_, state_names_);
}

MultiGearModel MultiGearModel::with_discount(double discount) const {
  return MultiGearModel(discount, holding_, resource_, transitions_, uncontrollable_,
                        state_names_);
}

const char* to_string(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::non_finite: return "non_finite";
    case Violation::Kind::discount_range: return "discount_range";
    case Violation::Kind::probability_range: return "probability_range";
    case Violation::Kind::non_stochastic_row: return "non_stochastic_row";
    case Violation::Kind::negative_resource: return "negative_resource";
    case Violation::Kind::gear_ordering: return "gear_ordering";
    case Violation::Kind::uncontrollable_mismatch: return "uncontrollable_mismatch";
  }
  return "unknown";
}

namespace {

std::string fmt_state(const MultiGearModel& m, State i) { return "state " + m.state_label(i); }

}  // namespace

std::vector<Violation> validate(const MultiGearModel& model) {
  std::vector<Violation> out;
  const double beta = model.discount();
  if (!(beta > 0.0 && beta < 1.0)) {
    std::ostringstream msg;
    msg << "discount " << beta << " not in (0,1)";
    out.push_back({Violation::Kind::discount_range, 0, -1, msg.str()});
  }

  const State n = model.n_states();
  const Gear gears = model.n_gears();
  for (State i = 0; i < n; ++i) {
    for (Gear a = 0; a < gears; ++a) {
      if (!std::isfinite(model.holding_cost(i, a)) || !std::isfinite(model.resource_use(i, a)))
        out.push_back({Violation::Kind::non_finite, i, a,
                       "non-finite cost or resource at " + fmt_state(model, i) + ", gear " +
                           std::to_string(a)});
    }
    if (model.resource_use(i, 0) < 0.0)
      out.push_back({Violation::Kind::negative_resource, i, 0,
                     "negative passive resource use at " + fmt_state(model, i)});
    for (Gear a = 0; a + 1 < gears && model.is_controllable(i); ++a) {
      if (!(model.resource_use(i, a + 1) - model.resource_use(i, a) > kGearOrderingSlack))
        out.push_back({Violation::Kind::gear_ordering, i, a + 1,
                       "resource use not strictly increasing at " + fmt_state(model, i) +
                           " between gears " + std::to_string(a) + " and " +
                           std::to_string(a + 1)});
    }
  }

  for (Gear a = 0; a < gears; ++a) {
    const Matrix& p = model.transition(a);
    for (State i = 0; i < n; ++i) {
      const auto row = p.row(static_cast<Eigen::Index>(i));
      bool in_range = true;
      for (Eigen::Index j = 0; j < row.size(); ++j)
        if (!(row(j) >= 0.0 && row(j) <= 1.0)) in_range = false;
      if (!in_range)
        out.push_back({Violation::Kind::probability_range, i, a,
                       "transition entry outside [0,1] in row of " + fmt_state(model, i) +
                           ", gear " + std::to_string(a)});
      const double sum = row.sum();
      if (!(std::abs(sum - 1.0) <= kRowSumTolerance)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "row of " << fmt_state(model, i) << ", gear " << a << " sums to " << sum;
        out.push_back({Violation::Kind::non_stochastic_row, i, a, msg.str()});
      }
    }
  }

  for (State i : model.uncontrollable_states()) {
    for (Gear a = 1; a < gears; ++a) {
      const bool same_row = model.transition(a).row(static_cast<Eigen::Index>(i)) ==
                            model.transition(0).row(static_cast<Eigen::Index>(i));
      const bool same_cost = model.holding_cost(i, a) == model.holding_cost(i, 0) &&
                             model.resource_use(i, a) == model.resource_use(i, 0);
      if (!same_row || !same_cost)
        out.push_back({Violation::Kind::uncontrollable_mismatch, i, a,
                       "uncontrollable " + fmt_state(model, i) + " differs under gear " +
                           std::to_string(a)});
    }
  }
  return out;
}

StationaryPolicy StationaryPolicy::top(const MultiGearModel& model) {
  std::vector<Gear> g(model.n_states(), 0);
  for (State i = 0; i < model.n_states(); ++i)
    if (model.is_controllable(i)) g[i] = model.top_gear();
  return StationaryPolicy(std::move(g));
}

StationaryPolicy StationaryPolicy::bottom(const MultiGearModel& model) {
  return StationaryPolicy(std::vector<Gear>(model.n_states(), 0));
}

std::vector<std::vector<State>> StationaryPolicy::partition(int n_gears) const {
  std::vector<std::vector<State>> parts(static_cast<std::size_t>(n_gears));
  for (State i = 0; i < gears_.size(); ++i) parts.at(static_cast<std::size_t>(gears_[i])).push_back(i);
  return parts;
}

void check_policy(const MultiGearModel& model, const StationaryPolicy& policy) {
  if (policy.size() != model.n_states())
    throw PolicyMismatch("policy has " + std::to_string(policy.size()) +
                         " states, model has " + std::to_string(model.n_states()));
  for (State i = 0; i < policy.size(); ++i) {
    const Gear a = policy.gear(i);
    if (a < 0 || a > model.top_gear())
      throw PolicyMismatch("gear " + std::to_string(a) + " out of range at state " +
                           model.state_label(i));
    if (!model.is_controllable(i) && a != 0)
      throw PolicyMismatch("uncontrollable state " + model.state_label(i) +
                           " must be assigned gear 0");
  }
}

StationaryPolicy shift(const StationaryPolicy& policy, State j, Gear from, Gear to) {
  if (from == to) throw InvalidShift(j, from, to, "source and target gears coincide");
  if (j >= policy.size()) throw InvalidShift(j, from, to, "state out of range");
  if (policy.gear(j) != from)
    throw InvalidShift(j, from, to, "policy selects gear " + std::to_string(policy.gear(j)));
  std::vector<Gear> g = policy.gears();
  g[j] = to;
  return StationaryPolicy(std::move(g));
}

const char* to_string(PolicyOrder order) {
  switch (order) {
    case PolicyOrder::less_equal: return "less-equal";
    case PolicyOrder::greater_equal: return "greater-equal";
    case PolicyOrder::equal: return "equal";
    case PolicyOrder::incomparable: return "incomparable";
  }
  return "unknown";
}

PolicyOrder policy_order(const StationaryPolicy& lhs, const StationaryPolicy& rhs) {
  if (lhs.size() != rhs.size()) throw PolicyMismatch("policies cover different state sets");
  bool some_lower = false;
  bool some_higher = false;
  for (State i = 0; i < lhs.size(); ++i) {
    if (lhs.gear(i) < rhs.gear(i)) some_lower = true;
    if (lhs.gear(i) > rhs.gear(i)) some_higher = true;
  }
  if (!some_lower && !some_higher) return PolicyOrder::equal;
  if (!some_higher) return PolicyOrder::less_equal;
  if (!some_lower) return PolicyOrder::greater_equal;
  return PolicyOrder::incomparable;
}

bool precedes(const StationaryPolicy& lhs, const StationaryPolicy& rhs) {
  const PolicyOrder o = policy_order(lhs, rhs);
  return o == PolicyOrder::less_equal || o == PolicyOrder::equal;
}

}  // namespace mgb
