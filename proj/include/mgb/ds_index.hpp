#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mgb/metrics.hpp"
#include "mgb/policy_family.hpp"

namespace mgb {

/// Default slack for the nondecreasing-index check.
inline constexpr double kDefaultEpsM = 1e-9;

enum class Criterion { discounted, average };

const char* to_string(Criterion criterion);

/// One DS step: state j_k downshifted from gear a_k with index m*.
struct IndexStep {
  State state;
  Gear gear;
  double mpi;
};

/// Output of the downshift adaptive-greedy algorithm.
struct IndexTable {
  std::vector<IndexStep> steps;          // k = 1..K
  std::vector<StationaryPolicy> chain;   // S^1..S^{K+1}
  Criterion criterion = Criterion::discounted;
  std::size_t n_states = 0;
  Gear top_gear = 0;

  std::size_t size() const { return steps.size(); }
  /// Index of (state, gear >= 1); NaN if the pair has no index (uncontrollable).
  double mpi(State state, Gear gear) const;
  /// N x (A+1) matrix of indices, column 0 and uncontrollable rows NaN.
  Matrix mpi_matrix() const;
};

enum class Pcl1Coverage { candidates, chain, chain_and_sampled, exhaustive };

const char* to_string(Pcl1Coverage coverage);

struct Pcl1Witness {
  StationaryPolicy policy;
  State state;
  Gear gear;  // the pair (gear-1, gear)
  double g;
};

struct Pcl2Witness {
  std::size_t k;  // 1-based: m*_{k+1} < m*_k
  double m_k;
  double m_next;
};

struct PclCertificate {
  bool pcl1_ok = true;
  std::optional<Pcl1Witness> pcl1_witness;
  bool pcl2_ok = true;
  std::optional<Pcl2Witness> pcl2_witness;
  Pcl1Coverage coverage = Pcl1Coverage::chain;
  std::size_t policies_checked = 0;
  double eps_g = kDefaultEpsG;
  double eps_m = kDefaultEpsM;

  bool certified() const { return pcl1_ok && pcl2_ok; }
};

struct DsOptions {
  double eps_g = kDefaultEpsG;
  double eps_m = kDefaultEpsM;
  /// Check marginal resources only at the downshift candidates of the chain.
  bool fast = false;
  /// Extra family members sampled for the positivity check.
  std::size_t random_members = 1000;
  std::uint64_t seed = 0;
  /// Families at most this large are swept exhaustively instead of sampled.
  std::uint64_t exhaustive_cap = 4096;
};

struct DsResult {
  IndexTable table;
  PclCertificate certificate;
};

/// Adjacent-gear marginal metrics of a policy under some criterion.
using MarginalOracle = std::function<AdjacentMarginals(const StationaryPolicy&)>;

/// Downshift adaptive-greedy run over any marginal oracle. Exactly
/// A * N_controllable steps; throws ConnectednessError if stuck.
IndexTable run_ds_core(const PolicyFamily& family, const MarginalOracle& oracle,
                       Criterion criterion, double eps_g = kDefaultEpsG);

/// Positivity and monotonicity certificate for a table over any oracle.
PclCertificate check_pcl_core(const PolicyFamily& family, const MarginalOracle& oracle,
                              const IndexTable& table, const DsOptions& options = {});

struct DirectCheck {
  /// max |direct f/g at S^k - table index| over k.
  double max_recursion_gap = 0.0;
  /// max |m_{j_{k-1}}(S^k) - m*_{k-1}| over k = 2..K+1.
  double max_pivot_gap = 0.0;
};

DirectCheck verify_direct_core(const MarginalOracle& oracle, const IndexTable& table);

/// Discounted marginal oracle of a model.
MarginalOracle discounted_oracle(const MultiGearModel& model);

DsResult run_ds(const MultiGearModel& model, const PolicyFamily& family,
                const DsOptions& options = {});

/// m*_prev + (g_prev / g_curr)(m_prev - m*_prev); nullopt when g_curr <= eps_g.
std::optional<double> recursive_update(double m_prev, double g_prev, double g_curr,
                                       double m_star_prev, double eps_g = kDefaultEpsG);

DirectCheck verify_index_table_direct(const MultiGearModel& model, const IndexTable& table);

PclCertificate check_pcl(const MultiGearModel& model, const PolicyFamily& family,
                         const IndexTable& table, const DsOptions& options = {});

}  // namespace mgb
