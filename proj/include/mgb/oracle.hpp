#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mgb/ds_index.hpp"

namespace mgb {

/// Absolute tolerance for membership in the set of lambda-optimal gears.
inline constexpr double kDefaultEpsOpt = 1e-8;

struct SolverOptions {
  double eps_opt = kDefaultEpsOpt;
  std::size_t max_policy_iterations = 500;
  /// Value-iteration fallback stops when the span of successive differences is below this.
  double vi_tolerance = 1e-10;
  std::size_t max_value_iterations = 1000000;
};

/// Optimal solution of the lambda-price problem: minimize F + lambda G.
struct LambdaSolution {
  double lambda = 0.0;
  Vector value;                                 // V*(lambda)
  StationaryPolicy policy;                      // one optimal policy
  std::vector<std::vector<Gear>> optimal_gears; // per state, ascending
  Matrix action_values;                         // V_i(lambda, <a,*>), N x (A+1)
  double residual = 0.0;                        // Bellman residual of `value`
  std::size_t iterations = 0;
  bool value_iteration = false;                 // fallback was used

  bool is_optimal(State i, Gear a) const;
};

/// Policy iteration with exact evaluation, value iteration as fallback.
/// Uncontrollable states report gear 0 only.
LambdaSolution solve_lambda_price(const MultiGearModel& model, double lambda,
                                  const SolverOptions& options = {});

/// True iff V_i(lambda, S) <= V*_i(lambda) + tol for every i.
bool is_lambda_optimal(const MultiGearModel& model, const StationaryPolicy& policy,
                       const LambdaSolution& solution, double tol = kDefaultEpsOpt);

/// Bisection interval for the price where gears a-1 and a tie at state j.
struct DaiBracket {
  double lo = 0.0;
  double hi = 0.0;
  /// More than one sign change seen on the probe grid of the search span.
  bool non_monotone = false;
  std::size_t doublings = 0;

  double midpoint() const { return 0.5 * (lo + hi); }
};

struct BracketOptions {
  double width = 1e-8;
  std::size_t max_doublings = 60;
  std::size_t probe_points = 33;
  SolverOptions solver;
};

/// Initial half-width (max|h| + 1) / ((1 - beta) min gear gap of q).
double initial_price_span(const MultiGearModel& model);

/// Locates a root of V_j(lambda,<a,*>) - V_j(lambda,<a-1,*>). Throws
/// UnbracketableError if the difference keeps one sign over the whole span.
DaiBracket bracket_dai(const MultiGearModel& model, State j, Gear a,
                       const BracketOptions& options = {});

struct DaiEstimate {
  State state;
  Gear gear;
  double mpi;
  double lo;
  double hi;
  bool bracketed;
  bool non_monotone;

  /// |midpoint - mpi|, NaN if not bracketed.
  double gap() const;
};

struct Counterexample {
  double lambda;
  State state;
  std::string description;
};

struct IndexabilityVerdict {
  bool indexable_on_grid = true;
  std::vector<DaiEstimate> dai_estimates;
  std::optional<Counterexample> counterexample;
  double max_dai_vs_mpi_gap = 0.0;
  std::vector<double> grid;
  /// Violations of the per-state threshold and set characterizations.
  std::size_t clause_failures = 0;
  /// Prices where S^l was not optimal inside [m*_{l-1}, m*_l], or optimal outside it.
  std::size_t chain_clause_failures = 0;
  bool all_bracketed = true;
};

struct VerifyOptions {
  /// Relative offset of the probes placed on both sides of each index.
  double delta = 1e-4;
  std::size_t random_lambdas = 16;
  std::uint64_t seed = 0;
  /// Inclusive slack when comparing a probe with an index value.
  double lambda_tol = 1e-9;
  /// Probes closer than this (relative) to a threshold are not judged there.
  double skip_band = 0.0;
  bool brackets = true;
  unsigned threads = 1;
  SolverOptions solver;
  BracketOptions bracket;
};

/// Probe prices: every index, index +- delta*scale, midpoints of consecutive
/// distinct indices and seeded uniform draws around the index range. Sorted.
std::vector<double> verification_grid(const IndexTable& table, const VerifyOptions& options = {});

/// Checks the threshold characterization of optimal gears against the table
/// values as candidate critical prices, on a probe grid, plus the chain
/// clauses and bisected critical prices.
IndexabilityVerdict verify_indexability(const MultiGearModel& model, const IndexTable& table,
                                        const VerifyOptions& options = {});

}  // namespace mgb
