#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mgb/oracle.hpp"
#include "support/fixtures.hpp"
#include "support/random_model.hpp"

using namespace mgb;
using mgb::testing::m1_model;
using mgb::testing::single_state;

namespace {

/// Brute force: minimum over all deterministic policies of F + lambda G.
Vector brute_force_value(const MultiGearModel& m, double lambda) {
  const auto all = PolicyFamily::full(m).enumerate(1u << 16);
  Vector best = Vector::Constant(static_cast<Eigen::Index>(m.n_states()), INFINITY);
  for (const auto& s : all) {
    const auto b = evaluate_policy(m, s);
    best = best.cwiseMin(b.cost + lambda * b.resource);
  }
  return best;
}

}  // namespace

TEST_CASE("single state price problem") {
  const auto m = single_state(0.5, {2, 0}, {0, 1});
  const auto s5 = solve_lambda_price(m, 5.0);
  CHECK(s5.optimal_gears[0] == std::vector<Gear>{0});
  CHECK(s5.value(0) == doctest::Approx(4.0));
  const auto s2 = solve_lambda_price(m, 2.0);
  CHECK(s2.optimal_gears[0] == std::vector<Gear>{0, 1});
  const auto s1 = solve_lambda_price(m, 1.0);
  CHECK(s1.optimal_gears[0] == std::vector<Gear>{1});
}

TEST_CASE("worked two-state fixture below the smallest index") {
  const auto m = m1_model();
  const auto s = solve_lambda_price(m, 0.5);
  CHECK(s.optimal_gears[0] == std::vector<Gear>{1});
  CHECK(s.optimal_gears[1] == std::vector<Gear>{1});
  CHECK(s.policy == StationaryPolicy({1, 1}));
  CHECK(s.residual <= 1e-10);
}

TEST_CASE("policy iteration matches brute force") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    mgb::testing::RandomModelOptions opt;
    opt.n_states = 2 + rep % 4;
    opt.n_gears = 2 + rep % 3;
    const auto m = mgb::testing::random_model(opt, rng);
    std::uniform_real_distribution<double> lam(-5.0, 20.0);
    const double lambda = lam(rng);
    const auto s = solve_lambda_price(m, lambda);
    CHECK((s.value - brute_force_value(m, lambda)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(s.residual <= 1e-10);
    CHECK(is_lambda_optimal(m, s.policy, s));
    for (const auto& set : s.optimal_gears) CHECK_FALSE(set.empty());
  }
}

TEST_CASE("value iteration fallback agrees") {
  std::mt19937_64 rng(5);
  const auto m = mgb::testing::random_model({}, rng);
  SolverOptions forced;
  forced.max_policy_iterations = 0;
  const auto vi = solve_lambda_price(m, 1.5, forced);
  const auto pi = solve_lambda_price(m, 1.5);
  CHECK(vi.value_iteration);
  CHECK_FALSE(pi.value_iteration);
  CHECK((vi.value - pi.value).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("optimal value is concave and nondecreasing in the price") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const auto m = mgb::testing::random_model({}, rng);
    std::vector<Vector> v;
    const double step = 0.37;
    for (int k = 0; k < 40; ++k) v.push_back(solve_lambda_price(m, -5.0 + step * k).value);
    for (std::size_t k = 1; k < v.size(); ++k) CHECK((v[k] - v[k - 1]).minCoeff() >= -1e-9);
    for (std::size_t k = 1; k + 1 < v.size(); ++k)
      CHECK((v[k] - 0.5 * (v[k - 1] + v[k + 1])).minCoeff() >= -1e-9);
  }
}

TEST_CASE("critical price brackets") {
  const auto m = single_state(0.5, {2, 0}, {0, 1});
  const auto b = bracket_dai(m, 0, 1);
  CHECK(b.lo <= 2.0);
  CHECK(b.hi >= 2.0);
  CHECK(b.hi - b.lo <= 1e-8);
  CHECK_FALSE(b.non_monotone);

  const auto m1 = m1_model();
  CHECK(bracket_dai(m1, 0, 1).midpoint() == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(bracket_dai(m1, 1, 1).midpoint() == doctest::Approx(2.5).epsilon(1e-7));
  CHECK_THROWS_AS(bracket_dai(m1, 0, 2), Error);
}

TEST_CASE("brackets for cost-free and resource-dominated gears") {
  // Gears 0 and 1 differ only in resource use, so they tie at price zero.
  const auto m = single_state(0.5, {0, 0, 1}, {0, 1, 2});
  const auto b = bracket_dai(m, 0, 1);
  CHECK(std::abs(b.midpoint()) <= 1e-8);
  CHECK_NOTHROW(bracket_dai(m, 0, 2));
  const auto flat = single_state(0.5, {0, 5}, {0, 1});
  BracketOptions opt;
  opt.max_doublings = 3;
  const auto b2 = bracket_dai(flat, 0, 1, opt);
  CHECK(b2.midpoint() == doctest::Approx(-5.0).epsilon(1e-8));
}

TEST_CASE("worked fixture verifies") {
  const auto m = m1_model();
  const auto r = run_ds(m, PolicyFamily::full(m));
  const auto v = verify_indexability(m, r.table);
  CHECK(v.indexable_on_grid);
  CHECK_FALSE(v.counterexample);
  CHECK(v.max_dai_vs_mpi_gap <= 1e-7);
  CHECK(v.chain_clause_failures == 0);
  CHECK(v.all_bracketed);
  CHECK(v.grid.size() >= 16 + 6);
}

TEST_CASE("certified random instances are indexable with index equal to the critical price") {
  std::mt19937_64 rng(2026);
  int certified = 0;
  for (int seed = 0; seed < 200; ++seed) {
    mgb::testing::RandomModelOptions opt;
    opt.mode = seed % 2 ? mgb::testing::RandomModelOptions::Mode::diminishing
                        : mgb::testing::RandomModelOptions::Mode::generic;
    const auto m = mgb::testing::random_model(opt, rng);
    const auto r = run_ds(m, PolicyFamily::full(m));
    if (!r.certificate.certified()) continue;
    ++certified;
    VerifyOptions vo;
    vo.seed = static_cast<std::uint64_t>(seed);
    const auto v = verify_indexability(m, r.table, vo);
    INFO("seed " << seed);
    CHECK(v.indexable_on_grid);
    CHECK(v.chain_clause_failures == 0);
    CHECK(v.max_dai_vs_mpi_gap <= 1e-6);
  }
  MESSAGE("certified " << certified);
  CHECK(certified >= 10);
}

TEST_CASE("verifier reports ground truth on a descent instance") {
  const auto m = single_state(0.8, {1, 4, 0}, {0, 1, 2});
  const auto r = run_ds(m, PolicyFamily::full(m));
  REQUIRE_FALSE(r.certificate.certified());
  const auto v = verify_indexability(m, r.table);
  CHECK_FALSE(v.indexable_on_grid);
  REQUIRE(v.counterexample);
  CHECK(v.counterexample->state == 0);
}

TEST_CASE("grid probes both sides of every index") {
  const auto m = m1_model();
  const auto r = run_ds(m, PolicyFamily::full(m));
  VerifyOptions vo;
  const auto grid = verification_grid(r.table, vo);
  for (double x : {1.0, 2.5, 1.0 - 2.5e-4, 1.0 + 2.5e-4, 2.5 - 2.5e-4, 2.5 + 2.5e-4, 1.75}) {
    bool found = false;
    for (double g : grid) found = found || std::abs(g - x) < 1e-15;
    CHECK(found);
  }
  CHECK(std::is_sorted(grid.begin(), grid.end()));
  CHECK(verification_grid(r.table, vo) == grid);
}

TEST_CASE("resource metric is smallest at the bottom policy under positivity") {
  std::mt19937_64 rng(88);
  int checked = 0;
  for (int rep = 0; rep < 40; ++rep) {
    const auto m = mgb::testing::random_model({}, rng);
    const auto r = run_ds(m, PolicyFamily::full(m));
    if (!r.certificate.pcl1_ok) continue;
    const auto bottom = evaluate_policy(m, StationaryPolicy::bottom(m));
    for (int k = 0; k < 10; ++k) {
      const auto b = evaluate_policy(m, mgb::testing::random_policy(m, rng));
      CHECK((b.resource - bottom.resource).minCoeff() >= -1e-10);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("parallel verification is deterministic") {
  std::mt19937_64 rng(3);
  const auto m = mgb::testing::random_model({}, rng);
  const auto r = run_ds(m, PolicyFamily::full(m));
  VerifyOptions serial;
  VerifyOptions threaded;
  threaded.threads = 4;
  const auto a = verify_indexability(m, r.table, serial);
  MESSAGE("certified " << r.certificate.certified() << " bracketed " << a.all_bracketed);
  const auto b = verify_indexability(m, r.table, threaded);
  CHECK(a.grid == b.grid);
  CHECK(a.clause_failures == b.clause_failures);
  CHECK(a.max_dai_vs_mpi_gap == b.max_dai_vs_mpi_gap);
  REQUIRE(a.dai_estimates.size() == b.dai_estimates.size());
  for (std::size_t k = 0; k < a.dai_estimates.size(); ++k) {
    CHECK(a.dai_estimates[k].bracketed == b.dai_estimates[k].bracketed);
    if (a.dai_estimates[k].bracketed) CHECK(a.dai_estimates[k].lo == b.dai_estimates[k].lo);
  }
}
