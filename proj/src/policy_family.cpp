#include "mgb/policy_family.hpp"

#include <algorithm>
#include <limits>

namespace mgb {

PolicyShape PolicyShape::of(const MultiGearModel& model) {
  PolicyShape s;
  s.n_states = model.n_states();
  s.top_gear = model.top_gear();
  s.controllable.resize(s.n_states);
  for (State i = 0; i < s.n_states; ++i) s.controllable[i] = model.is_controllable(i);
  return s;
}

StationaryPolicy PolicyShape::top() const {
  std::vector<Gear> g(n_states, 0);
  for (State i = 0; i < n_states; ++i)
    if (controllable[i]) g[i] = top_gear;
  return StationaryPolicy(std::move(g));
}

StationaryPolicy PolicyShape::bottom() const {
  return StationaryPolicy(std::vector<Gear>(n_states, 0));
}

std::size_t PolicyShape::n_controllable() const {
  return static_cast<std::size_t>(std::count(controllable.begin(), controllable.end(), true));
}

const char* to_string(PolicyFamily::Kind kind) {
  switch (kind) {
    case PolicyFamily::Kind::full: return "full";
    case PolicyFamily::Kind::multi_threshold: return "multi_threshold";
    case PolicyFamily::Kind::explicit_list: return "list";
    case PolicyFamily::Kind::custom_predicate: return "custom";
  }
  return "unknown";
}

PolicyFamily PolicyFamily::full(const MultiGearModel& model) {
  return PolicyFamily(Kind::full, PolicyShape::of(model), "full");
}

PolicyFamily PolicyFamily::multi_threshold(const MultiGearModel& model) {
  return PolicyFamily(Kind::multi_threshold, PolicyShape::of(model), "multi_threshold");
}

PolicyFamily PolicyFamily::explicit_list(const MultiGearModel& model,
                                         std::vector<StationaryPolicy> members) {
  PolicyFamily f(Kind::explicit_list, PolicyShape::of(model), "list");
  for (const auto& m : members) check_policy(model, m);
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  f.members_ = std::move(members);
  return f;
}

PolicyFamily PolicyFamily::custom(const MultiGearModel& model, Predicate predicate,
                                  std::string name) {
  PolicyFamily f(Kind::custom_predicate, PolicyShape::of(model), std::move(name));
  f.predicate_ = std::move(predicate);
  return f;
}

namespace {

bool fits_shape(const PolicyShape& shape, const StationaryPolicy& policy) {
  if (policy.size() != shape.n_states) return false;
  for (State i = 0; i < shape.n_states; ++i) {
    const Gear a = policy.gear(i);
    if (a < 0 || a > shape.top_gear) return false;
    if (!shape.controllable[i] && a != 0) return false;
  }
  return true;
}

bool nondecreasing_on_controllable(const PolicyShape& shape, const StationaryPolicy& policy) {
  Gear last = 0;
  for (State i = 0; i < shape.n_states; ++i) {
    if (!shape.controllable[i]) continue;
    if (policy.gear(i) < last) return false;
    last = policy.gear(i);
  }
  return true;
}

std::optional<std::uint64_t> checked_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return std::nullopt;
  return a * b;
}

}  // namespace

bool PolicyFamily::contains(const StationaryPolicy& policy) const {
  if (!fits_shape(shape_, policy)) return false;
  switch (kind_) {
    case Kind::full: return true;
    case Kind::multi_threshold: return nondecreasing_on_controllable(shape_, policy);
    case Kind::explicit_list:
      return std::binary_search(members_.begin(), members_.end(), policy);
    case Kind::custom_predicate: return predicate_(policy);
  }
  return false;
}

std::optional<std::uint64_t> PolicyFamily::size() const {
  const std::uint64_t nc = shape_.n_controllable();
  const auto gears = static_cast<std::uint64_t>(shape_.top_gear) + 1;
  switch (kind_) {
    case Kind::full: {
      std::optional<std::uint64_t> total = 1;
      for (std::uint64_t i = 0; i < nc && total; ++i) total = checked_mul(*total, gears);
      return total;
    }
    case Kind::multi_threshold: {
      // Nondecreasing sequences of length nc over `gears` values: C(nc + A, A).
      const std::uint64_t a = gears - 1;
      std::uint64_t c = 1;
      for (std::uint64_t k = 1; k <= a; ++k) {
        auto num = checked_mul(c, nc + k);
        if (!num) return std::nullopt;
        c = *num / k;
      }
      return c;
    }
    case Kind::explicit_list: return members_.size();
    case Kind::custom_predicate: return std::nullopt;
  }
  return std::nullopt;
}

std::vector<StationaryPolicy> PolicyFamily::enumerate(std::uint64_t cap) const {
  const auto n = size();
  if (!n) throw Error("family '" + name_ + "' is not enumerable");
  if (*n > cap) throw SizeCapExceeded("family enumeration", static_cast<double>(*n),
                                      static_cast<double>(cap));
  if (kind_ == Kind::explicit_list) return members_;

  std::vector<State> ctrl;
  for (State i = 0; i < shape_.n_states; ++i)
    if (shape_.controllable[i]) ctrl.push_back(i);

  std::vector<StationaryPolicy> out;
  out.reserve(static_cast<std::size_t>(*n));
  std::vector<Gear> gears(shape_.n_states, 0);
  const bool monotone = kind_ == Kind::multi_threshold;
  // Odometer over controllable states, least significant digit last.
  while (true) {
    out.emplace_back(gears);
    std::size_t pos = ctrl.size();
    while (pos > 0) {
      --pos;
      State s = ctrl[pos];
      if (gears[s] < shape_.top_gear) {
        ++gears[s];
        // Reset the tail to the smallest admissible values.
        for (std::size_t k = pos + 1; k < ctrl.size(); ++k)
          gears[ctrl[k]] = monotone ? gears[s] : 0;
        break;
      }
      if (pos == 0) return out;
    }
    if (ctrl.empty()) return out;
  }
}

namespace {

std::vector<StateGearPair> shift_candidates(const PolicyFamily& family,
                                            const StationaryPolicy& policy, int direction) {
  if (!family.contains(policy))
    throw PolicyMismatch("policy is not a member of family '" + family.name() + "'");
  const PolicyShape& shape = family.shape();
  std::vector<StateGearPair> out;
  for (State j = 0; j < shape.n_states; ++j) {
    if (!shape.controllable[j]) continue;
    const Gear a = policy.gear(j);
    const Gear to = a + direction;
    if (to < 0 || to > shape.top_gear) continue;
    if (family.contains(shift(policy, j, a, to))) out.push_back({j, a});
  }
  return out;
}

}  // namespace

std::vector<StateGearPair> downshift_candidates(const PolicyFamily& family,
                                                const StationaryPolicy& policy) {
  return shift_candidates(family, policy, -1);
}

std::vector<StateGearPair> upshift_candidates(const PolicyFamily& family,
                                              const StationaryPolicy& policy) {
  return shift_candidates(family, policy, +1);
}

namespace {

StationaryPolicy random_walk(const PolicyFamily& family, std::mt19937_64& rng, int direction) {
  const PolicyShape& shape = family.shape();
  StationaryPolicy s = direction < 0 ? shape.top() : shape.bottom();
  if (!family.contains(s)) return s;
  const std::size_t max_steps = shape.n_controllable() * static_cast<std::size_t>(shape.top_gear);
  std::uniform_int_distribution<std::size_t> len_dist(0, max_steps);
  const std::size_t steps = len_dist(rng);
  for (std::size_t k = 0; k < steps; ++k) {
    const auto cands =
        direction < 0 ? downshift_candidates(family, s) : upshift_candidates(family, s);
    if (cands.empty()) break;
    std::uniform_int_distribution<std::size_t> pick(0, cands.size() - 1);
    const StateGearPair c = cands[pick(rng)];
    s = shift(s, c.state, c.gear, c.gear + direction);
  }
  return s;
}

}  // namespace

StationaryPolicy sample_member(const PolicyFamily& family, std::mt19937_64& rng) {
  return random_walk(family, rng, -1);
}

const char* to_string(ConnectednessReport::Condition condition) {
  switch (condition) {
    case ConnectednessReport::Condition::none: return "none";
    case ConnectednessReport::Condition::extremes_missing: return "extremes_missing";
    case ConnectednessReport::Condition::no_downshift: return "no_downshift";
    case ConnectednessReport::Condition::no_upshift: return "no_upshift";
  }
  return "unknown";
}

ConnectednessReport check_connectedness(const PolicyFamily& family,
                                        const ConnectednessOptions& options) {
  using Condition = ConnectednessReport::Condition;
  const PolicyShape& shape = family.shape();
  const StationaryPolicy top = shape.top();
  const StationaryPolicy bottom = shape.bottom();
  ConnectednessReport report;

  auto fail = [&](Condition c, const StationaryPolicy& s) {
    report.ok = false;
    report.failed = c;
    report.witness = s;
    return report;
  };

  if (!family.contains(top)) return fail(Condition::extremes_missing, top);
  if (!family.contains(bottom)) return fail(Condition::extremes_missing, bottom);

  std::vector<StationaryPolicy> members;
  const auto n = family.size();
  if (n && *n <= options.enumeration_cap) {
    members = family.enumerate(options.enumeration_cap);
    report.exhaustive = true;
  } else {
    std::mt19937_64 rng(options.seed);
    members.reserve(options.samples);
    for (std::size_t k = 0; k < options.samples; ++k)
      members.push_back(random_walk(family, rng, k % 2 == 0 ? -1 : +1));
  }
  report.members_checked = members.size();

  for (const auto& s : members)
    if (s != bottom && downshift_candidates(family, s).empty())
      return fail(Condition::no_downshift, s);
  for (const auto& s : members)
    if (s != top && upshift_candidates(family, s).empty()) return fail(Condition::no_upshift, s);
  return report;
}

}  // namespace mgb
