#include "mgb/average_cost.hpp"

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/strong_components.hpp>

#include <algorithm>
#include <random>
#include <sstream>

namespace mgb {

namespace {

using Digraph = boost::adjacency_list<boost::vecS, boost::vecS, boost::directedS>;

/// Closed strongly connected components of a digraph given by an edge predicate.
template <class Edge>
std::vector<std::vector<State>> closed_components(std::size_t n, Edge&& edge) {
  Digraph g(n);
  for (State i = 0; i < n; ++i)
    for (State j = 0; j < n; ++j)
      if (edge(i, j)) boost::add_edge(i, j, g);
  std::vector<int> comp(n);
  const int count = boost::strong_components(g, comp.data());
  std::vector<bool> closed(static_cast<std::size_t>(count), true);
  for (State i = 0; i < n; ++i)
    for (State j = 0; j < n; ++j)
      if (edge(i, j) && comp[i] != comp[j]) closed[static_cast<std::size_t>(comp[i])] = false;
  std::vector<std::vector<State>> out;
  std::vector<int> slot(static_cast<std::size_t>(count), -1);
  for (State i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(comp[i]);
    if (!closed[c]) continue;
    if (slot[c] < 0) {
      slot[c] = static_cast<int>(out.size());
      out.emplace_back();
    }
    out[static_cast<std::size_t>(slot[c])].push_back(i);
  }
  return out;  // ordered by smallest member, members ascending
}

std::string policy_label(const StationaryPolicy& policy) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < policy.size(); ++i) os << (i ? "," : "") << policy.gear(i);
  os << ")";
  return os.str();
}

}  // namespace

ChainStructure chain_structure(const MultiGearModel& model, const StationaryPolicy& policy) {
  check_policy(model, policy);
  ChainStructure out;
  out.recurrent_classes = closed_components(model.n_states(), [&](State i, State j) {
    return model.transition(policy.gear(i), i, j) > 0.0;
  });
  std::vector<bool> recurrent(model.n_states(), false);
  for (const auto& c : out.recurrent_classes)
    for (State i : c) recurrent[i] = true;
  for (State i = 0; i < model.n_states(); ++i)
    if (!recurrent[i]) out.transient.push_back(i);
  return out;
}

AccessibilityReport check_unichain_and_accessibility(const MultiGearModel& model,
                                                     const PolicyFamily& family,
                                                     const AccessibilityOptions& options) {
  AccessibilityReport rep;
  const std::size_t n = model.n_states();

  auto visit = [&](const StationaryPolicy& s) {
    ++rep.policies_checked;
    const auto cs = chain_structure(model, s);
    if (!cs.unichain() && rep.unichain) {
      rep.unichain = false;
      rep.multichain_witness = s;
      rep.witness_classes = cs.recurrent_classes.size();
    }
  };
  const auto size = family.size();
  if (size && *size <= options.enumeration_cap) {
    rep.exhaustive = true;
    for (const auto& s : family.enumerate(options.enumeration_cap)) visit(s);
  } else {
    std::mt19937_64 rng(options.seed);
    visit(family.shape().top());
    visit(family.shape().bottom());
    for (std::size_t k = 0; k < options.samples; ++k) visit(sample_member(family, rng));
  }

  const auto closed = closed_components(n, [&](State i, State j) {
    for (Gear a = 0; a < model.n_gears(); ++a)
      if (model.transition(a, i, j) > 0.0) return true;
    return false;
  });
  if (closed.size() != 1) {
    rep.weakly_accessible = false;
    return rep;
  }
  // Outside the accessible class, look for a set some policy can keep closed.
  std::vector<bool> keep(n, true);
  for (State i : closed.front()) keep[i] = false;
  bool changed = true;
  while (changed) {
    changed = false;
    for (State i = 0; i < n; ++i) {
      if (!keep[i]) continue;
      bool can_stay = false;
      for (Gear a = 0; a < model.n_gears() && !can_stay; ++a) {
        bool inside = true;
        for (State j = 0; j < n && inside; ++j)
          if (model.transition(a, i, j) > 0.0 && !keep[j]) inside = false;
        can_stay = inside;
      }
      if (!can_stay) {
        keep[i] = false;
        changed = true;
      }
    }
  }
  rep.weakly_accessible = std::none_of(keep.begin(), keep.end(), [](bool b) { return b; });
  return rep;
}

AverageMetricBundle evaluate_policy_average(const MultiGearModel& model,
                                            const StationaryPolicy& policy,
                                            std::optional<State> anchor) {
  const auto cs = chain_structure(model, policy);
  if (!cs.unichain()) {
    std::ostringstream os;
    os << "policy " << policy_label(policy) << " has " << cs.recurrent_classes.size()
       << " recurrent classes";
    throw MultichainError(os.str());
  }
  const State pin = anchor.value_or(cs.recurrent_classes.front().front());
  if (pin >= model.n_states()) throw PolicyMismatch("anchor state out of range");

  const auto n = static_cast<Eigen::Index>(model.n_states());
  Matrix lhs = Matrix::Identity(n, n);
  Matrix rhs(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Gear a = policy.gear(static_cast<State>(i));
    lhs.row(i) -= model.transition(a).row(i);
    rhs(i, 0) = model.holding_cost(static_cast<State>(i), a);
    rhs(i, 1) = model.resource_use(static_cast<State>(i), a);
  }
  const auto p = static_cast<Eigen::Index>(pin);
  lhs.col(p).setOnes();
  Matrix x = lhs.partialPivLu().solve(rhs);
  if (!x.allFinite()) throw NumericFailure("average evaluation produced non-finite values");

  AverageMetricBundle out;
  out.policy = policy;
  out.anchor = pin;
  out.cost_rate = x(p, 0);
  out.resource_rate = x(p, 1);
  x.row(p).setZero();
  out.cost_bias = x.col(0);
  out.resource_bias = x.col(1);
  return out;
}

AdjacentMarginals average_marginals(const MultiGearModel& model, const AverageMetricBundle& bundle) {
  const auto n = static_cast<Eigen::Index>(model.n_states());
  AdjacentMarginals out{Matrix::Zero(n, model.n_gears()), Matrix::Zero(n, model.n_gears())};
  for (Gear a = 1; a < model.n_gears(); ++a) {
    const Matrix dp = model.transition(a - 1) - model.transition(a);
    out.cost.col(a) = model.holding_costs().col(a - 1) - model.holding_costs().col(a) + dp * bundle.cost_bias;
    out.resource.col(a) =
        model.resource_uses().col(a) - model.resource_uses().col(a - 1) - dp * bundle.resource_bias;
  }
  return out;
}

MarginalOracle average_oracle(const MultiGearModel& model) {
  return [&model](const StationaryPolicy& s) {
    return average_marginals(model, evaluate_policy_average(model, s));
  };
}

DsResult run_ds_average(const MultiGearModel& model, const PolicyFamily& family,
                        const DsOptions& options) {
  const auto oracle = average_oracle(model);
  DsResult r;
  r.table = run_ds_core(family, oracle, Criterion::average, options.eps_g);
  r.certificate = check_pcl_core(family, oracle, r.table, options);
  return r;
}

IndexabilityVerdict verify_average_surrogate(const MultiGearModel& model, const IndexTable& table,
                                             VerifyOptions options) {
  options.delta = std::max(options.delta, 1e-2);
  options.skip_band = std::max(options.skip_band, 1e-3);
  return verify_indexability(model.with_discount(kSurrogateDiscount), table, options);
}

}  // namespace mgb
