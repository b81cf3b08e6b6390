#include "mgb/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "mgb/metrics.hpp"
#include "parallel.hpp"

namespace mgb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix priced_costs(const MultiGearModel& model, double lambda) {
  return model.holding_costs() + lambda * model.resource_uses();
}

Matrix action_values(const MultiGearModel& model, const Matrix& cost, const Vector& v) {
  Matrix q(cost.rows(), cost.cols());
  for (Gear a = 0; a < model.n_gears(); ++a)
    q.col(a) = cost.col(a) + model.discount() * (model.transition(a) * v);
  return q;
}

Vector evaluate(const MultiGearModel& model, const Matrix& cost, const std::vector<Gear>& gears) {
  const auto n = static_cast<Eigen::Index>(model.n_states());
  Matrix lhs = Matrix::Identity(n, n);
  Vector rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Gear a = gears[static_cast<std::size_t>(i)];
    lhs.row(i) -= model.discount() * model.transition(a).row(i);
    rhs(i) = cost(i, a);
  }
  Vector v = lhs.partialPivLu().solve(rhs);
  if (!v.allFinite()) throw NumericFailure("policy evaluation produced non-finite values");
  return v;
}

Gear argmin_gear(const Matrix& q, Eigen::Index i) {
  Gear best = 0;
  for (Gear a = 1; a < q.cols(); ++a)
    if (q(i, a) < q(i, best)) best = a;
  return best;
}

double gear_gap(const MultiGearModel& model) {
  double gap = kInf;
  for (State i : model.controllable_states())
    for (Gear a = 1; a < model.n_gears(); ++a)
      gap = std::min(gap, model.resource_use(i, a) - model.resource_use(i, a - 1));
  return std::isfinite(gap) && gap > 0.0 ? gap : 1.0;
}

std::string describe_gear(Gear a, bool optimal, double lo, double hi) {
  std::ostringstream os;
  os.precision(17);
  os << "gear " << a << (optimal ? " is" : " is not") << " optimal; predicted optimal iff " << lo
     << " <= lambda <= " << hi;
  return os.str();
}

}  // namespace

bool LambdaSolution::is_optimal(State i, Gear a) const {
  const auto& set = optimal_gears.at(i);
  return std::binary_search(set.begin(), set.end(), a);
}

LambdaSolution solve_lambda_price(const MultiGearModel& model, double lambda,
                                  const SolverOptions& options) {
  const auto n = static_cast<Eigen::Index>(model.n_states());
  const Matrix cost = priced_costs(model, lambda);

  std::vector<Gear> gears(model.n_states(), 0);
  for (State i : model.controllable_states()) gears[i] = argmin_gear(cost, static_cast<Eigen::Index>(i));

  LambdaSolution sol;
  sol.lambda = lambda;
  bool converged = false;
  Vector v;
  for (std::size_t it = 0; it < options.max_policy_iterations; ++it) {
    sol.iterations = it + 1;
    v = evaluate(model, cost, gears);
    const Matrix q = action_values(model, cost, v);
    bool changed = false;
    for (State i : model.controllable_states()) {
      const auto r = static_cast<Eigen::Index>(i);
      const Gear best = argmin_gear(q, r);
      const double cur = q(r, gears[i]);
      if (q(r, best) < cur - 1e-12 * (1.0 + std::abs(cur))) {
        gears[i] = best;
        changed = true;
      }
    }
    if (!changed) {
      converged = true;
      break;
    }
  }

  if (!converged) {
    sol.value_iteration = true;
    if (v.size() == 0) v = evaluate(model, cost, gears);
    for (std::size_t it = 0; it < options.max_value_iterations; ++it) {
      const Matrix q = action_values(model, cost, v);
      Vector next(n);
      for (Eigen::Index i = 0; i < n; ++i)
        next(i) = model.is_controllable(static_cast<State>(i)) ? q.row(i).minCoeff() : q(i, 0);
      const Vector diff = next - v;
      v = next;
      if (diff.maxCoeff() - diff.minCoeff() <= options.vi_tolerance) break;
    }
  }

  sol.value = v;
  sol.action_values = action_values(model, cost, v);
  sol.optimal_gears.assign(model.n_states(), {});
  std::vector<Gear> chosen(model.n_states(), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto s = static_cast<State>(i);
    if (!model.is_controllable(s)) {
      sol.optimal_gears[s] = {0};
      sol.residual = std::max(sol.residual, std::abs(sol.action_values(i, 0) - v(i)));
      continue;
    }
    const double best = sol.action_values.row(i).minCoeff();
    sol.residual = std::max(sol.residual, std::abs(best - v(i)));
    for (Gear a = 0; a < model.n_gears(); ++a)
      if (sol.action_values(i, a) <= best + options.eps_opt) sol.optimal_gears[s].push_back(a);
    chosen[s] = sol.value_iteration ? argmin_gear(sol.action_values, i) : gears[s];
  }
  sol.policy = StationaryPolicy(std::move(chosen));
  return sol;
}

bool is_lambda_optimal(const MultiGearModel& model, const StationaryPolicy& policy,
                       const LambdaSolution& solution, double tol) {
  const Vector v = evaluate(model, priced_costs(model, solution.lambda), policy.gears());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v(i) > solution.value(i) + tol + 1e-12 * std::abs(solution.value(i))) return false;
  return true;
}

double initial_price_span(const MultiGearModel& model) {
  const double hmax = model.holding_costs().cwiseAbs().maxCoeff();
  return (hmax + 1.0) / ((1.0 - model.discount()) * gear_gap(model));
}

DaiBracket bracket_dai(const MultiGearModel& model, State j, Gear a, const BracketOptions& options) {
  if (j >= model.n_states() || !model.is_controllable(j) || a < 1 || a > model.top_gear())
    throw Error("bracket_dai: (state, gear) has no index");
  const auto r = static_cast<Eigen::Index>(j);
  auto positive = [&](double lambda) {
    const auto sol = solve_lambda_price(model, lambda, options.solver);
    return sol.action_values(r, a) - sol.action_values(r, a - 1) > 0.0;
  };

  DaiBracket out;
  double span = initial_price_span(model);
  bool left = positive(-span);
  bool right = positive(span);
  while (left == right) {
    if (out.doublings == options.max_doublings) {
      std::ostringstream os;
      os << "no sign change for state " << model.state_label(j) << ", gear " << a
         << " within +-" << span;
      throw UnbracketableError(os.str());
    }
    span *= 2.0;
    ++out.doublings;
    left = positive(-span);
    right = positive(span);
  }

  std::size_t changes = 0;
  bool prev = left;
  for (std::size_t k = 1; k < options.probe_points; ++k) {
    const double lambda =
        -span + 2.0 * span * static_cast<double>(k) / static_cast<double>(options.probe_points - 1);
    const bool cur = k + 1 == options.probe_points ? right : positive(lambda);
    if (cur != prev) ++changes;
    prev = cur;
  }
  out.non_monotone = changes > 1 || left;

  double lo = -span;
  double hi = span;
  for (int it = 0; it < 400 && hi - lo > options.width; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (positive(mid) == left ? lo : hi) = mid;
  }
  out.lo = lo;
  out.hi = hi;
  return out;
}

double DaiEstimate::gap() const {
  if (!bracketed) return std::numeric_limits<double>::quiet_NaN();
  return std::abs(0.5 * (lo + hi) - mpi);
}

std::vector<double> verification_grid(const IndexTable& table, const VerifyOptions& options) {
  std::vector<double> mpis;
  for (const auto& st : table.steps)
    if (std::isfinite(st.mpi)) mpis.push_back(st.mpi);
  std::sort(mpis.begin(), mpis.end());
  double scale = 1.0;
  for (double m : mpis) scale = std::max(scale, std::abs(m));

  std::vector<double> grid;
  for (double m : mpis) {
    grid.push_back(m);
    grid.push_back(m - options.delta * scale);
    grid.push_back(m + options.delta * scale);
  }
  const auto last = std::unique(mpis.begin(), mpis.end());
  for (auto it = mpis.begin(); it != last && it + 1 != last; ++it) grid.push_back(0.5 * (*it + *(it + 1)));

  const double lo = mpis.empty() ? -1.0 : mpis.front() - scale;
  const double hi = mpis.empty() ? 1.0 : mpis.back() + scale;
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> draw(lo, hi);
  for (std::size_t k = 0; k < options.random_lambdas; ++k) grid.push_back(draw(rng));

  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

IndexabilityVerdict verify_indexability(const MultiGearModel& model, const IndexTable& table,
                                        const VerifyOptions& options) {
  IndexabilityVerdict verdict;
  verdict.grid = verification_grid(table, options);
  double scale = 1.0;
  for (const auto& st : table.steps)
    if (std::isfinite(st.mpi)) scale = std::max(scale, std::abs(st.mpi));
  const double tol = options.lambda_tol * scale;
  const double band = options.skip_band * scale;
  auto near = [&](double lambda, double c) { return band > 0.0 && std::abs(lambda - c) <= band; };
  const Gear top = model.top_gear();
  const auto controllable = model.controllable_states();

  std::vector<LambdaSolution> sols(verdict.grid.size());
  std::vector<std::size_t> chain_fail(verdict.grid.size(), 0);
  detail::parallel_for(verdict.grid.size(), options.threads, [&](std::size_t k) {
    sols[k] = solve_lambda_price(model, verdict.grid[k], options.solver);
    const double lambda = verdict.grid[k];
    const std::size_t K = table.steps.size();
    for (std::size_t l = 0; l < table.chain.size(); ++l) {
      const double lo = l == 0 ? -kInf : table.steps[l - 1].mpi;
      const double hi = l == K ? kInf : table.steps[l].mpi;
      const bool predicted = lambda >= lo - tol && lambda <= hi + tol;
      if (near(lambda, lo) || near(lambda, hi)) continue;
      if (predicted != is_lambda_optimal(model, table.chain[l], sols[k], options.solver.eps_opt))
        ++chain_fail[k];
    }
  });
  for (auto c : chain_fail) verdict.chain_clause_failures += c;

  auto fail = [&](double lambda, State j, std::string what) {
    ++verdict.clause_failures;
    if (!verdict.counterexample) verdict.counterexample = Counterexample{lambda, j, std::move(what)};
  };

  for (State j : controllable) {
    std::vector<double> crit(static_cast<std::size_t>(top) + 2);
    crit[0] = kInf;
    crit[static_cast<std::size_t>(top) + 1] = -kInf;
    for (Gear a = 1; a <= top; ++a) crit[static_cast<std::size_t>(a)] = table.mpi(j, a);
    for (Gear a = 1; a < top; ++a) {
      const double hi = crit[static_cast<std::size_t>(a)];
      const double lo = crit[static_cast<std::size_t>(a) + 1];
      if (!(lo <= hi + tol)) fail(lo, j, "critical prices are not nonincreasing in the gear");
    }
  }

  for (std::size_t k = 0; k < verdict.grid.size(); ++k) {
    const double lambda = verdict.grid[k];
    const auto& sol = sols[k];
    for (State j : controllable) {
      auto crit = [&](Gear a) {
        if (a == 0) return kInf;
        if (a > top) return -kInf;
        return table.mpi(j, a);
      };
      for (Gear a = 0; a <= top; ++a) {
        const double lo = crit(a + 1);
        const double hi = crit(a);
        const bool predicted = lambda >= lo - tol && lambda <= hi + tol;
        const bool actual = sol.is_optimal(j, a);
        if (near(lambda, lo) || near(lambda, hi)) continue;
        if (predicted != actual) fail(lambda, j, describe_gear(a, actual, lo, hi));
      }
      for (Gear a = 1; a <= top; ++a) {
        bool upper = false;
        bool lower = false;
        for (Gear b : sol.optimal_gears[j]) (b >= a ? upper : lower) = true;
        const double c = crit(a);
        if (near(lambda, c)) continue;
        if (upper != (lambda <= c + tol))
          fail(lambda, j, "optimal gear >= " + std::to_string(a) + " set characterization fails");
        if (lower != (lambda >= c - tol))
          fail(lambda, j, "optimal gear < " + std::to_string(a) + " set characterization fails");
      }
    }
  }
  verdict.indexable_on_grid = verdict.clause_failures == 0;

  if (options.brackets) {
    std::vector<StateGearPair> pairs;
    for (State j : controllable)
      for (Gear a = 1; a <= top; ++a) pairs.push_back({j, a});
    verdict.dai_estimates.resize(pairs.size());
    detail::parallel_for(pairs.size(), options.threads, [&](std::size_t k) {
      const auto [j, a] = pairs[k];
      DaiEstimate e{j, a, table.mpi(j, a), std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN(), false, false};
      try {
        const auto b = bracket_dai(model, j, a, options.bracket);
        e.lo = b.lo;
        e.hi = b.hi;
        e.bracketed = true;
        e.non_monotone = b.non_monotone;
      } catch (const UnbracketableError&) {
      }
      verdict.dai_estimates[k] = e;
    });
    for (const auto& e : verdict.dai_estimates) {
      if (!e.bracketed) {
        verdict.all_bracketed = false;
        continue;
      }
      const double g = e.gap();
      verdict.max_dai_vs_mpi_gap =
          std::isfinite(g) ? std::max(verdict.max_dai_vs_mpi_gap, g) : kInf;
    }
  }
  return verdict;
}

}  // namespace mgb
