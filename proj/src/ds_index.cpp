#include "mgb/ds_index.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace mgb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string gears_text(const StationaryPolicy& s) {
  std::string out = "(";
  for (State i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s.gear(i));
  }
  return out + ")";
}

/// f/g where the ratio is meaningful, NaN otherwise.
double direct_ratio(double f, double g, double eps_g) {
  return std::abs(g) > eps_g ? f / g : kNaN;
}

/// NaN sorts after every number.
bool before(double x, double y) {
  if (std::isnan(x)) return false;
  if (std::isnan(y)) return true;
  return x < y;
}

}  // namespace

const char* to_string(Criterion criterion) {
  return criterion == Criterion::discounted ? "discounted" : "average";
}

const char* to_string(Pcl1Coverage coverage) {
  switch (coverage) {
    case Pcl1Coverage::candidates: return "candidates";
    case Pcl1Coverage::chain: return "chain";
    case Pcl1Coverage::chain_and_sampled: return "chain_and_sampled";
    case Pcl1Coverage::exhaustive: return "exhaustive";
  }
  return "unknown";
}

double IndexTable::mpi(State state, Gear gear) const {
  for (const auto& s : steps)
    if (s.state == state && s.gear == gear) return s.mpi;
  return kNaN;
}

Matrix IndexTable::mpi_matrix() const {
  Matrix out = Matrix::Constant(static_cast<Eigen::Index>(n_states), top_gear + 1, kNaN);
  for (const auto& s : steps) out(static_cast<Eigen::Index>(s.state), s.gear) = s.mpi;
  return out;
}

std::optional<double> recursive_update(double m_prev, double g_prev, double g_curr,
                                       double m_star_prev, double eps_g) {
  if (!(g_curr > eps_g)) return std::nullopt;
  return m_star_prev + (g_prev / g_curr) * (m_prev - m_star_prev);
}

IndexTable run_ds_core(const PolicyFamily& family, const MarginalOracle& oracle,
                       Criterion criterion, double eps_g) {
  const PolicyShape& shape = family.shape();
  IndexTable table;
  table.criterion = criterion;
  table.n_states = shape.n_states;
  table.top_gear = shape.top_gear;

  StationaryPolicy s = shape.top();
  if (!family.contains(s))
    throw ConnectednessError("top policy is not a member of family '" + family.name() + "'",
                             s.gears());
  if (!family.contains(shape.bottom()))
    throw ConnectednessError(
        "bottom policy is not a member of family '" + family.name() + "'", shape.bottom().gears());

  const std::size_t k_total = shape.n_controllable() * static_cast<std::size_t>(shape.top_gear);
  const auto n = static_cast<Eigen::Index>(shape.n_states);
  const Gear gears = shape.top_gear + 1;
  table.chain.reserve(k_total + 1);
  table.chain.push_back(s);
  table.steps.reserve(k_total);

  AdjacentMarginals marg = oracle(s);
  Matrix m(n, gears);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Gear a = 1; a < gears; ++a)
      m(j, a) = direct_ratio(marg.cost(j, a), marg.resource(j, a), eps_g);

  for (std::size_t k = 1; k <= k_total; ++k) {
    if (k > 1) {
      const AdjacentMarginals next = oracle(s);
      const double m_star_prev = table.steps.back().mpi;
      for (Eigen::Index j = 0; j < n; ++j) {
        for (Gear a = 1; a < gears; ++a) {
          const double g_prev = marg.resource(j, a);
          const double g_curr = next.resource(j, a);
          std::optional<double> upd;
          if (std::isfinite(m(j, a)) && std::isfinite(m_star_prev))
            upd = recursive_update(m(j, a), g_prev, g_curr, m_star_prev, eps_g);
          m(j, a) = upd ? *upd : direct_ratio(next.cost(j, a), g_curr, eps_g);
        }
      }
      marg = next;
    }

    const auto cands = downshift_candidates(family, s);
    if (cands.empty())
      throw ConnectednessError("no legal downshift from member " + gears_text(s) + " of family '" +
                                   family.name() + "'",
                               s.gears());
    StateGearPair best = cands.front();
    double best_m = m(static_cast<Eigen::Index>(best.state), best.gear);
    for (std::size_t c = 1; c < cands.size(); ++c) {
      const double v = m(static_cast<Eigen::Index>(cands[c].state), cands[c].gear);
      if (before(v, best_m)) {
        best = cands[c];
        best_m = v;
      }
    }
    table.steps.push_back({best.state, best.gear, best_m});
    s = shift(s, best.state, best.gear, best.gear - 1);
    table.chain.push_back(s);
  }
  return table;
}

PclCertificate check_pcl_core(const PolicyFamily& family, const MarginalOracle& oracle,
                              const IndexTable& table, const DsOptions& options) {
  const PolicyShape& shape = family.shape();
  PclCertificate cert;
  cert.eps_g = options.eps_g;
  cert.eps_m = options.eps_m;
  const Gear gears = shape.top_gear + 1;

  auto record = [&](const StationaryPolicy& s, State j, Gear a, double g) {
    if (g > options.eps_g || !cert.pcl1_ok) return;
    cert.pcl1_ok = false;
    cert.pcl1_witness = Pcl1Witness{s, j, a, g};
  };
  auto sweep = [&](const StationaryPolicy& s) {
    const AdjacentMarginals marg = oracle(s);
    ++cert.policies_checked;
    for (State j = 0; j < shape.n_states; ++j) {
      if (!shape.controllable[j]) continue;
      for (Gear a = 1; a < gears; ++a)
        record(s, j, a, marg.resource(static_cast<Eigen::Index>(j), a));
    }
  };

  if (options.fast) {
    cert.coverage = Pcl1Coverage::candidates;
    for (std::size_t k = 0; k < table.steps.size(); ++k) {
      const StationaryPolicy& s = table.chain[k];
      const AdjacentMarginals marg = oracle(s);
      ++cert.policies_checked;
      for (const auto& c : downshift_candidates(family, s))
        record(s, c.state, c.gear, marg.resource(static_cast<Eigen::Index>(c.state), c.gear));
    }
  } else {
    cert.coverage = Pcl1Coverage::chain;
    const auto n = family.size();
    if (n && *n <= options.exhaustive_cap) {
      cert.coverage = Pcl1Coverage::exhaustive;
      for (const auto& s : family.enumerate(options.exhaustive_cap)) sweep(s);
    } else {
      for (const auto& s : table.chain) sweep(s);
      if (options.random_members > 0) {
        cert.coverage = Pcl1Coverage::chain_and_sampled;
        std::mt19937_64 rng(options.seed);
        for (std::size_t r = 0; r < options.random_members; ++r) sweep(sample_member(family, rng));
      }
    }
  }

  for (std::size_t k = 0; k + 1 < table.steps.size(); ++k) {
    const double cur = table.steps[k].mpi;
    const double nxt = table.steps[k + 1].mpi;
    if (!(nxt >= cur - options.eps_m)) {
      cert.pcl2_ok = false;
      cert.pcl2_witness = Pcl2Witness{k + 1, cur, nxt};
      break;
    }
  }
  if (table.steps.size() == 1 && !std::isfinite(table.steps[0].mpi)) {
    cert.pcl2_ok = false;
    cert.pcl2_witness = Pcl2Witness{1, table.steps[0].mpi, table.steps[0].mpi};
  }
  return cert;
}

DirectCheck verify_direct_core(const MarginalOracle& oracle, const IndexTable& table) {
  DirectCheck out;
  const std::size_t k_total = table.steps.size();
  for (std::size_t k = 0; k <= k_total; ++k) {
    const AdjacentMarginals marg = oracle(table.chain[k]);
    if (k < k_total) {
      const auto& st = table.steps[k];
      const auto j = static_cast<Eigen::Index>(st.state);
      const double direct = marg.cost(j, st.gear) / marg.resource(j, st.gear);
      out.max_recursion_gap = std::max(out.max_recursion_gap, std::abs(direct - st.mpi));
    }
    if (k > 0) {
      const auto& prev = table.steps[k - 1];
      const auto j = static_cast<Eigen::Index>(prev.state);
      const double pivot = marg.cost(j, prev.gear) / marg.resource(j, prev.gear);
      out.max_pivot_gap = std::max(out.max_pivot_gap, std::abs(pivot - prev.mpi));
    }
  }
  return out;
}

MarginalOracle discounted_oracle(const MultiGearModel& model) {
  return [&model](const StationaryPolicy& s) {
    return adjacent_marginals(model, evaluate_policy(model, s));
  };
}

DsResult run_ds(const MultiGearModel& model, const PolicyFamily& family,
                const DsOptions& options) {
  const MarginalOracle oracle = discounted_oracle(model);
  DsResult out;
  out.table = run_ds_core(family, oracle, Criterion::discounted, options.eps_g);
  out.certificate = check_pcl_core(family, oracle, out.table, options);
  return out;
}

DirectCheck verify_index_table_direct(const MultiGearModel& model, const IndexTable& table) {
  return verify_direct_core(discounted_oracle(model), table);
}

PclCertificate check_pcl(const MultiGearModel& model, const PolicyFamily& family,
                         const IndexTable& table, const DsOptions& options) {
  return check_pcl_core(family, discounted_oracle(model), table, options);
}

}  // namespace mgb
