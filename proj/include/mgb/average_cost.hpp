#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mgb/ds_index.hpp"
#include "mgb/oracle.hpp"

namespace mgb {

/// Communicating-class decomposition of the chain induced by a policy.
struct ChainStructure {
  std::vector<std::vector<State>> recurrent_classes;  // closed classes, sorted
  std::vector<State> transient;

  bool unichain() const { return recurrent_classes.size() == 1; }
};

ChainStructure chain_structure(const MultiGearModel& model, const StationaryPolicy& policy);

struct AccessibilityReport {
  bool unichain = true;
  std::optional<StationaryPolicy> multichain_witness;
  std::size_t witness_classes = 0;
  /// One closed class in the union graph over all gears, and no other set of
  /// states can be kept closed by any policy.
  bool weakly_accessible = true;
  bool exhaustive = false;
  std::size_t policies_checked = 0;

  bool ok() const { return unichain && weakly_accessible; }
};

struct AccessibilityOptions {
  std::uint64_t enumeration_cap = 4096;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
};

/// Unichain check over the family (all members if enumerable within the cap,
/// otherwise the extremes plus sampled members) and weak accessibility.
AccessibilityReport check_unichain_and_accessibility(const MultiGearModel& model,
                                                     const PolicyFamily& family,
                                                     const AccessibilityOptions& options = {});

/// Long-run average metrics and bias vectors of a unichain policy.
struct AverageMetricBundle {
  StationaryPolicy policy;
  double cost_rate = 0.0;      // F bar
  double resource_rate = 0.0;  // G bar
  Vector cost_bias;            // phi, zero at the anchor
  Vector resource_bias;        // gamma, zero at the anchor
  State anchor = 0;
};

/// Solves g + phi_i = c_i + sum_j p_ij phi_j with phi_anchor = 0 for both cost
/// streams. Default anchor: lowest-numbered recurrent state. Throws
/// MultichainError if the policy has more than one recurrent class.
AverageMetricBundle evaluate_policy_average(const MultiGearModel& model,
                                            const StationaryPolicy& policy,
                                            std::optional<State> anchor = std::nullopt);

/// Average-criterion adjacent-gear marginals built from the bias vectors.
AdjacentMarginals average_marginals(const MultiGearModel& model, const AverageMetricBundle& bundle);

MarginalOracle average_oracle(const MultiGearModel& model);

/// Downshift adaptive-greedy run and certificate under the average criterion.
DsResult run_ds_average(const MultiGearModel& model, const PolicyFamily& family,
                        const DsOptions& options = {});

/// Discount factor of the surrogate used to verify average-criterion tables.
inline constexpr double kSurrogateDiscount = 0.9999;

/// Approximate check: runs the discounted verifier at kSurrogateDiscount with
/// probes spread and thresholds blurred by the surrogate's O(1 - beta) bias.
IndexabilityVerdict verify_average_surrogate(const MultiGearModel& model, const IndexTable& table,
                                             VerifyOptions options = {});

}  // namespace mgb
