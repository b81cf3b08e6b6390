#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mgb/model.hpp"

namespace mgb {

/// The state/gear layout a family is defined over.
struct PolicyShape {
  std::size_t n_states = 0;
  Gear top_gear = 0;
  std::vector<bool> controllable;

  static PolicyShape of(const MultiGearModel& model);
  StationaryPolicy top() const;
  StationaryPolicy bottom() const;
  std::size_t n_controllable() const;
};

/// A postulated structured family of stationary policies. Membership is a
/// predicate; some kinds can also enumerate their members.
class PolicyFamily {
 public:
  enum class Kind { full, multi_threshold, explicit_list, custom_predicate };
  using Predicate = std::function<bool(const StationaryPolicy&)>;

  /// Every stationary deterministic policy.
  static PolicyFamily full(const MultiGearModel& model);
  /// Gear nondecreasing in the state label over controllable states.
  static PolicyFamily multi_threshold(const MultiGearModel& model);
  /// Exactly the listed policies.
  static PolicyFamily explicit_list(const MultiGearModel& model,
                                    std::vector<StationaryPolicy> members);
  /// Arbitrary membership predicate (must be reentrant); not enumerable.
  static PolicyFamily custom(const MultiGearModel& model, Predicate predicate,
                             std::string name = "custom");

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const PolicyShape& shape() const { return shape_; }

  bool contains(const StationaryPolicy& policy) const;

  /// Number of members when enumerable, nullopt otherwise (or if it overflows).
  std::optional<std::uint64_t> size() const;
  /// All members, in a deterministic order. Throws if not enumerable or
  /// larger than `cap`.
  std::vector<StationaryPolicy> enumerate(std::uint64_t cap) const;

 private:
  PolicyFamily(Kind kind, PolicyShape shape, std::string name)
      : kind_(kind), shape_(std::move(shape)), name_(std::move(name)) {}

  Kind kind_;
  PolicyShape shape_;
  std::string name_;
  std::vector<StationaryPolicy> members_;  // explicit_list, sorted
  Predicate predicate_;                    // custom_predicate
};

const char* to_string(PolicyFamily::Kind kind);

/// (j, a) with j at gear a >= 1 under S and the one-gear downshift still in
/// the family; ordered by state then gear. Throws PolicyMismatch if S is not
/// a member.
std::vector<StateGearPair> downshift_candidates(const PolicyFamily& family,
                                                const StationaryPolicy& policy);

/// Same for one-gear upshifts (j at gear a < A).
std::vector<StateGearPair> upshift_candidates(const PolicyFamily& family,
                                              const StationaryPolicy& policy);

/// Random member reached by a random-length walk of uniformly chosen legal
/// downshifts from the top policy. Returns the top policy if it is stuck.
StationaryPolicy sample_member(const PolicyFamily& family, std::mt19937_64& rng);

struct ConnectednessReport {
  enum class Condition { none, extremes_missing, no_downshift, no_upshift };
  bool ok = true;
  Condition failed = Condition::none;
  std::optional<StationaryPolicy> witness;  // first violating member
  bool exhaustive = false;                  // false: conditions (ii)/(iii) were sampled
  std::size_t members_checked = 0;
};

const char* to_string(ConnectednessReport::Condition condition);

struct ConnectednessOptions {
  std::uint64_t enumeration_cap = 1u << 16;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
};

/// Checks that both extreme policies are members, that every member but the
/// bottom has a legal downshift, and that every member but the top has a
/// legal upshift. Exhaustive for enumerable families within the cap,
/// otherwise sampled by random downshift and upshift walks.
ConnectednessReport check_connectedness(const PolicyFamily& family,
                                        const ConnectednessOptions& options = {});

}  // namespace mgb
