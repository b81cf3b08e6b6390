#include "identities.hpp"

#include <algorithm>
#include <cmath>

#include "random_model.hpp"

namespace mgb::testing {

void ResidualLog::add(const std::string& name, double residual) {
  auto& e = entries_[name];
  const double r = std::isnan(residual) ? INFINITY : std::abs(residual);
  e.first = std::max(e.first, r);
  ++e.second;
}

double ResidualLog::worst(const std::string& name) const {
  const auto it = entries_.find(name);
  return it == entries_.end() ? 0.0 : it->second.first;
}

double ResidualLog::worst() const {
  double w = 0.0;
  for (const auto& [name, e] : entries_) w = std::max(w, e.first);
  return w;
}

std::size_t ResidualLog::count(const std::string& name) const {
  const auto it = entries_.find(name);
  return it == entries_.end() ? 0 : it->second.second;
}

namespace {

using Idx = Eigen::Index;

Idx ix(State i) { return static_cast<Idx>(i); }

double weighted(const Matrix& x, const Matrix& c) { return x.cwiseProduct(c).sum(); }

/// Sum over j and a < S(j) of g_j^{a,S(j)}(S) x_j^a: the slack side of the
/// inequality law at S.
double lower_gear_mass(const MultiGearModel& model, const MetricBundle& bs, const Matrix& x) {
  double total = 0.0;
  for (State j = 0; j < model.n_states(); ++j) {
    const Gear top = bs.policy.gear(j);
    for (Gear a = 0; a < top; ++a) total += marginal_resource(model, bs, j, a, top) * x(ix(j), a);
  }
  return total;
}

}  // namespace

void check_metric_identities(const MultiGearModel& model, std::mt19937_64& rng, ResidualLog& log,
                             int samples) {
  const std::size_t n = model.n_states();
  const Gear gears = model.n_gears();
  const Gear top = model.top_gear();
  const double beta = model.discount();
  const Vector p = random_distribution(n, rng);
  std::uniform_real_distribution<double> lam_dist(-5.0, 5.0);

  const StationaryPolicy s1 = StationaryPolicy::top(model);
  const MetricBundle b1 = evaluate_policy(model, s1);
  const ModifiedCosts mc = modified_costs(model);
  const MultiGearModel hat = model.with_holding_costs(mc.holding);
  log.add("modified cost vanishes at the top gear", mc.holding.col(top).cwiseAbs().maxCoeff());

  // Modified costs at the top policy: adjacent and to-top marginal costs.
  for (State j = 0; j < n; ++j) {
    for (Gear a = 1; a < gears; ++a)
      log.add("top-policy marginal cost equals modified cost gap",
              marginal_cost(model, b1, j, a - 1, a) - (mc.holding(ix(j), a - 1) - mc.holding(ix(j), a)));
    for (Gear a = 0; a < top; ++a)
      log.add("top-policy marginal cost to the top gear equals modified cost",
              marginal_cost(model, b1, j, a, top) - mc.holding(ix(j), a));
  }

  for (int rep = 0; rep < samples; ++rep) {
    const StationaryPolicy s = random_policy(model, rng);
    const MetricBundle bs = evaluate_policy(model, s);
    const Matrix xs = occupancies(model, s, p);

    for (State i = 0; i < n; ++i) {
      const Gear a = s.gear(i);
      log.add("cost evaluation residual",
              bs.cost(ix(i)) - model.holding_cost(i, a) -
                  beta * model.transition(a).row(ix(i)).dot(bs.cost));
      log.add("resource evaluation residual",
              bs.resource(ix(i)) - model.resource_use(i, a) -
                  beta * model.transition(a).row(ix(i)).dot(bs.resource));
    }

    Vector flow = Vector::Zero(static_cast<Idx>(n));
    for (Gear a = 0; a < gears; ++a)
      flow += xs.col(a) - beta * model.transition(a).transpose() * xs.col(a);
    log.add("occupancy flow balance", (flow - p).cwiseAbs().maxCoeff());
    log.add("occupancy total mass", xs.sum() - 1.0 / (1.0 - beta));
    log.add("occupancy-weighted cost", weighted(xs, model.holding_costs()) - p.dot(bs.cost));
    log.add("occupancy-weighted resource", weighted(xs, model.resource_uses()) - p.dot(bs.resource));

    // Gap structure of (I - beta P^a) F(S) - h^a and q^a - (I - beta P^a) G(S).
    for (Gear a = 0; a < gears; ++a) {
      const Vector cf = bs.cost - beta * model.transition(a) * bs.cost - model.holding_costs().col(a);
      const Vector cg = model.resource_uses().col(a) - (bs.resource - beta * model.transition(a) * bs.resource);
      for (State j = 0; j < n; ++j) {
        const Gear sj = s.gear(j);
        const double ef = sj == a ? 0.0 : marginal_cost(model, bs, j, sj, a);
        const double eg = sj == a ? 0.0 : marginal_resource(model, bs, j, sj, a);
        log.add("cost gap structure", cf(ix(j)) - ef);
        log.add("resource gap structure", cg(ix(j)) - eg);
      }
    }

    // Modified-cost model.
    const MetricBundle hs = evaluate_policy(hat, s);
    log.add("modified cost metric shifts by the top-policy cost",
            p.dot(hs.cost) - (p.dot(bs.cost) - p.dot(b1.cost)));
    const double lambda = lam_dist(rng);
    log.add("modified total cost shifts by the top-policy cost",
            total_cost(hs, lambda, p) - (total_cost(bs, lambda, p) - p.dot(b1.cost)));
    for (State j = 0; j < n; ++j)
      for (Gear a = 0; a < gears; ++a)
        for (Gear a2 = 0; a2 < gears; ++a2) {
          if (a == a2) continue;
          const double f = marginal_cost(model, bs, j, a, a2);
          const double fh = marginal_cost(hat, hs, j, a, a2);
          log.add("modified marginal cost unchanged", fh - f);
          const double g = marginal_resource(model, bs, j, a, a2);
          if (std::abs(g) > 1e-3) log.add("modified productivity unchanged", fh / g - f / g);
        }

    // Randomized policy: decomposition against S.
    const Matrix pi = random_randomized_policy(model, rng);
    const Matrix xp = randomized_occupancies(model, pi, p);
    const double fp = weighted(xp, model.holding_costs());
    const double gp = weighted(xp, model.resource_uses());
    log.add("modified cost of a randomized policy",
            weighted(xp, mc.holding) - (fp - p.dot(b1.cost)));
    double lhs_f = p.dot(bs.cost);
    double rhs_f = fp;
    double lhs_g = gp;
    double rhs_g = p.dot(bs.resource);
    for (State j = 0; j < n; ++j) {
      const Gear sj = s.gear(j);
      for (Gear a = 0; a < gears; ++a) {
        if (a == sj) continue;
        const double x = xp(ix(j), a);
        if (a < sj) {
          lhs_f += marginal_cost(model, bs, j, a, sj) * x;
          lhs_g += marginal_resource(model, bs, j, a, sj) * x;
        } else {
          rhs_f += marginal_cost(model, bs, j, sj, a) * x;
          rhs_g += marginal_resource(model, bs, j, sj, a) * x;
        }
      }
    }
    log.add("cost decomposition", lhs_f - rhs_f);
    log.add("resource decomposition", lhs_g - rhs_g);

    // Single-shift identities.
    for (State j = 0; j < n; ++j) {
      if (!model.is_controllable(j)) continue;
      const Gear a = s.gear(j);
      for (Gear a2 = 0; a2 < gears; ++a2) {
        if (a2 == a) continue;
        const StationaryPolicy t = shift(s, j, a, a2);
        const MetricBundle bt = evaluate_policy(model, t);
        const Matrix xt = occupancies(model, t, p);
        const double fs = p.dot(bs.cost), ft = p.dot(bt.cost);
        const double gs = p.dot(bs.resource), gt = p.dot(bt.resource);
        log.add("shift cost forward",
                fs - (ft + marginal_cost(model, bs, j, a, a2) * xt(ix(j), a2)));
        log.add("shift cost backward",
                ft - (fs + marginal_cost(model, bt, j, a2, a) * xs(ix(j), a)));
        log.add("shift resource forward",
                gt - (gs + marginal_resource(model, bs, j, a, a2) * xt(ix(j), a2)));
        log.add("shift resource backward",
                gs - (gt + marginal_resource(model, bt, j, a2, a) * xs(ix(j), a)));

        // Ratios in cross-multiplied form (no division by g).
        const double f_s = marginal_cost(model, bs, j, a2, a);
        const double g_s = marginal_resource(model, bs, j, a2, a);
        const double f_t = marginal_cost(model, bt, j, a2, a);
        const double g_t = marginal_resource(model, bt, j, a2, a);
        log.add("productivity invariant under its own shift", f_s * g_t - f_t * g_s);
        log.add("shift cost change proportional to resource change",
                (ft - fs) * g_s - f_s * (gs - gt));

        for (State j2 = 0; j2 < n; ++j2)
          for (Gear c = 0; c < gears; ++c)
            for (Gear c2 = 0; c2 < gears; ++c2) {
              if (c == c2) continue;
              const double df = marginal_cost(model, bs, j2, c2, c) - marginal_cost(model, bt, j2, c2, c);
              const double dg =
                  marginal_resource(model, bs, j2, c2, c) - marginal_resource(model, bt, j2, c2, c);
              log.add("marginal cost change proportional to marginal resource change",
                      g_s * df - f_s * dg);
            }

        // Downshift with positive marginal resource lowers every resource metric.
        if (a2 < a && g_s > kDefaultEpsG) {
          const double worst_rise = (bt.resource - bs.resource).maxCoeff();
          log.add("downshift never raises resource", std::max(0.0, worst_rise - 1e-12));
          log.add("downshift strictly lowers resource at the shifted state",
                  bt.resource(ix(j)) < bs.resource(ix(j)) ? 0.0 : 1.0);
        }
      }
    }
  }
}

void check_chain_identities(const MultiGearModel& model, const IndexTable& table,
                            std::mt19937_64& rng, ResidualLog& log, int samples) {
  const std::size_t n = model.n_states();
  const Gear gears = model.n_gears();
  const Gear top = model.top_gear();
  const std::size_t k_total = table.steps.size();
  const Vector p = random_distribution(n, rng);
  std::uniform_real_distribution<double> lam_dist(-5.0, 15.0);

  std::vector<MetricBundle> b;  // b[k-1] = S^k
  std::vector<Matrix> x;
  for (const auto& s : table.chain) {
    b.push_back(evaluate_policy(model, s));
    x.push_back(occupancies(model, s, p));
  }
  const ModifiedCosts mc = modified_costs(model);
  // 1-based helpers.
  auto m = [&](std::size_t k) { return table.steps[k - 1].mpi; };
  auto js = [&](std::size_t k) { return table.steps[k - 1].state; };
  auto as = [&](std::size_t k) { return table.steps[k - 1].gear; };
  auto bun = [&](std::size_t k) -> const MetricBundle& { return b[k - 1]; };
  auto gear_at = [&](std::size_t k, State j) { return table.chain[k - 1].gear(j); };
  auto dm = [&](std::size_t n_) { return m(n_) - m(n_ - 1); };

  for (std::size_t k = 1; k <= k_total; ++k)
    log.add("table index equals the direct ratio",
            marginal_cost(model, bun(k), js(k), as(k) - 1, as(k)) -
                marginal_resource(model, bun(k), js(k), as(k) - 1, as(k)) * m(k));

  for (std::size_t k = 2; k <= k_total; ++k)
    for (State j = 0; j < n; ++j) {
      if (!model.is_controllable(j)) continue;
      for (Gear a = 1; a < gears; ++a) {
        const double lhs = marginal_cost(model, bun(k), j, a - 1, a) -
                           marginal_resource(model, bun(k), j, a - 1, a) * m(k - 1);
        const double rhs = marginal_cost(model, bun(k - 1), j, a - 1, a) -
                           marginal_resource(model, bun(k - 1), j, a - 1, a) * m(k - 1);
        log.add("recursive index update", lhs - rhs);
      }
    }

  for (std::size_t k = 2; k <= k_total + 1; ++k)
    log.add("pivot productivity unchanged after its downshift",
            marginal_cost(model, bun(k), js(k - 1), as(k - 1) - 1, as(k - 1)) -
                marginal_resource(model, bun(k), js(k - 1), as(k - 1) - 1, as(k - 1)) * m(k - 1));

  // Later pivots expanded over index increments along the chain.
  for (std::size_t k = 1; k <= k_total; ++k)
    for (std::size_t l = k; l <= k_total; ++l) {
      const State j = js(l);
      const Gear a = as(l);
      if (l > k) {
        double rhs = marginal_resource(model, bun(k), j, a - 1, a) * m(k);
        for (std::size_t nn = k + 1; nn <= l; ++nn)
          rhs += marginal_resource(model, bun(nn), j, a - 1, a) * dm(nn);
        log.add("adjacent pivot expansion", marginal_cost(model, bun(k), j, a - 1, a) - rhs);
      }
      double rhs = marginal_resource(model, bun(k), j, a - 1, gear_at(k, j)) * m(k);
      for (std::size_t nn = k + 1; nn <= l; ++nn)
        rhs += marginal_resource(model, bun(nn), j, a - 1, gear_at(nn, j)) * dm(nn);
      log.add("multi-gear pivot expansion",
              marginal_cost(model, bun(k), j, a - 1, gear_at(k, j)) - rhs);
    }

  for (std::size_t l = 1; l <= k_total; ++l) {
    const State j = js(l);
    const Gear a = as(l);
    double rhs = marginal_resource(model, bun(1), j, a - 1, top) * m(1);
    for (std::size_t nn = 2; nn <= l; ++nn)
      rhs += marginal_resource(model, bun(nn), j, a - 1, gear_at(nn, j)) * dm(nn);
    log.add("modified cost as index combination", mc.holding(ix(j), a - 1) - rhs);
  }

  // Consecutive chain policies.
  for (int rep = 0; rep < samples; ++rep) {
    const double lambda = lam_dist(rng);
    auto fp = [&](std::size_t k) { return p.dot(bun(k).cost); };
    auto gp = [&](std::size_t k) { return p.dot(bun(k).resource); };
    auto vp = [&](std::size_t k) { return fp(k) + lambda * gp(k); };
    for (std::size_t k = 2; k <= k_total + 1; ++k) {
      const State j = js(k - 1);
      const Gear a = as(k - 1);
      const double xo = x[k - 2](ix(j), a);
      const double f = marginal_cost(model, bun(k), j, a - 1, a);
      const double g = marginal_resource(model, bun(k), j, a - 1, a);
      log.add("consecutive cost step", fp(k) - (fp(k - 1) + f * xo));
      log.add("consecutive resource step", gp(k) - (gp(k - 1) - g * xo));
      log.add("consecutive total cost step", vp(k) - (vp(k - 1) - (lambda - m(k - 1)) * g * xo));
    }

    // Modified total cost along the chain.
    auto vhat = [&](std::size_t k) { return fp(k) - fp(1) + lambda * gp(k); };
    log.add("modified total cost of the top policy", vhat(1) - lambda * gp(1));
    for (std::size_t l = 2; l <= k_total + 1; ++l) {
      double rhs = m(1) * gp(1);
      for (std::size_t kk = 2; kk <= l - 1; ++kk) rhs += dm(kk) * gp(kk);
      rhs += (lambda - m(l - 1)) * gp(l);
      log.add("modified total cost of chain policies", vhat(l) - rhs);
    }

    // Arbitrary randomized policy expressed through the chain.
    const Matrix pi = random_randomized_policy(model, rng);
    const Matrix xp = randomized_occupancies(model, pi, p);
    const double g_pi = weighted(xp, model.resource_uses());
    const double fhat_pi = weighted(xp, mc.holding);
    std::vector<double> c(k_total + 2);
    for (std::size_t k = 1; k <= k_total + 1; ++k) c[k] = lower_gear_mass(model, bun(k), xp);
    if (k_total == 0) continue;
    double rhs = m(1) * c[1];
    for (std::size_t k = 2; k <= k_total; ++k) rhs += dm(k) * c[k];
    log.add("modified cost through the chain", fhat_pi - rhs);
    const double vhat_pi = fhat_pi + lambda * g_pi;
    log.add("modified total cost through the chain, low price form",
            vhat_pi - (lambda * gp(1) + (m(1) - lambda) * c[1] + (rhs - m(1) * c[1])));
    double high = m(1) * gp(1) + (lambda - m(k_total)) * g_pi;
    for (std::size_t k = 2; k <= k_total; ++k) high += dm(k) * (g_pi + c[k]);
    log.add("modified total cost through the chain, high price form", vhat_pi - high);
    if (k_total >= 2) {
      std::uniform_int_distribution<std::size_t> pick_l(2, k_total);
      const std::size_t l = pick_l(rng);
      double mid = m(1) * gp(1);
      for (std::size_t k = 2; k <= l - 1; ++k) mid += dm(k) * (g_pi + c[k]);
      mid += (lambda - m(l - 1)) * (g_pi + c[l]) + (m(l) - lambda) * c[l];
      for (std::size_t k = l + 1; k <= k_total; ++k) mid += dm(k) * c[k];
      log.add("modified total cost through the chain, middle price form", vhat_pi - mid);
    }
  }
}

void check_conservation(const MultiGearModel& model, const IndexTable& table,
                        std::mt19937_64& rng, int samples, ConservationStats& stats,
                        double equality_tol) {
  const Vector p = random_distribution(model.n_states(), rng);
  std::vector<MetricBundle> b;
  for (const auto& s : table.chain) b.push_back(evaluate_policy(model, s));
  for (int rep = 0; rep < samples; ++rep) {
    const StationaryPolicy pi = random_policy(model, rng);
    const Matrix xp = occupancies(model, pi, p);
    const double g_pi = weighted(xp, model.resource_uses());
    for (std::size_t k = 0; k < b.size(); ++k) {
      const double lhs = g_pi + lower_gear_mass(model, b[k], xp);
      const double slack = lhs - p.dot(b[k].resource);
      ++stats.checks;
      if (k == 0) stats.max_law_residual = std::max(stats.max_law_residual, std::abs(slack));
      stats.worst_inequality = std::min(stats.worst_inequality, slack);
      const bool equal = std::abs(slack) <= equality_tol;
      if (equal != precedes(pi, b[k].policy)) ++stats.equality_mismatches;
    }
  }
}

}  // namespace mgb::testing
