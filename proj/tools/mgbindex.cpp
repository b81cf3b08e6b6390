// mgbindex: index computation, verification and joint-problem bounds for
// multi-gear bandit models.

#include <CLI11.hpp>

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "mgb/average_cost.hpp"
#include "mgb/ds_index.hpp"
#include "mgb/io.hpp"
#include "mgb/mamgbp.hpp"
#include "mgb/oracle.hpp"

namespace {

using mgb::io::Json;

enum Exit : int {
  kOk = 0,
  kViolation = 1,
  kParse = 2,
  kNotCertified = 3,
  kConnectedness = 4,
  kSizeCap = 5,
  kUsage = 6,
  kNumeric = 7,
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Tolerances {
  double eps_g = mgb::kDefaultEpsG;
  double eps_m = mgb::kDefaultEpsM;
  double eps_opt = mgb::kDefaultEpsOpt;
};

double env_tolerance(const char* name, double fallback) {
  const char* raw = std::getenv(name);
  if (!raw || !*raw) return fallback;
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(raw, &end);
  if (errno || *end || !std::isfinite(x) || x <= 0.0)
    throw UsageError(std::string(name) + " must be a positive number, got '" + raw + "'");
  return x;
}

Tolerances read_tolerances() {
  return {env_tolerance("MGB_EPS_G", mgb::kDefaultEpsG),
          env_tolerance("MGB_EPS_M", mgb::kDefaultEpsM),
          env_tolerance("MGB_EPS_OPT", mgb::kDefaultEpsOpt)};
}

struct Config {
  std::string model_path;
  std::string table_path;
  std::string instance_path;
  std::string family;
  std::string criterion = "discounted";
  std::string format = "csv";
  std::string mode = "exact";
  std::string policy = "index";
  std::string output;
  bool fast = false;
  bool metrics = false;
  bool no_optimum = false;
  std::uint64_t seed = 0;
  std::size_t reps = 1000;
  std::size_t horizon = 0;
  unsigned threads = 1;
};

void emit(const Config& cfg, const std::string& text) {
  if (cfg.output.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(cfg.output, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write '" + cfg.output + "'");
}

Json header(const char* command) {
  Json doc;
  doc["schema_version"] = mgb::io::kSchemaVersion;
  doc["command"] = command;
  return doc;
}

Json violations_json(const mgb::MultiGearModel& model, const std::vector<mgb::Violation>& vs) {
  Json out = Json::array();
  for (const auto& v : vs) {
    Json row;
    row["kind"] = mgb::to_string(v.kind);
    row["state"] = v.kind == mgb::Violation::Kind::discount_range
                       ? Json(nullptr)
                       : mgb::io::state_label_json(model, v.state);
    row["gear"] = v.gear < 0 ? Json(nullptr) : Json(v.gear);
    row["message"] = v.message;
    out.push_back(std::move(row));
  }
  return out;
}

/// Loads a model and reports invariant violations; nullopt after reporting.
std::optional<mgb::io::ModelDocument> load_valid_model(const Config& cfg, const char* command) {
  auto doc = mgb::io::load_model(cfg.model_path);
  const auto vs = mgb::validate(doc.model);
  if (vs.empty()) return doc;
  Json out = header(command);
  out["valid"] = false;
  out["violations"] = violations_json(doc.model, vs);
  emit(cfg, mgb::io::dump(out));
  std::cerr << "mgbindex: model has " << vs.size() << " violation(s)\n";
  return std::nullopt;
}

int cmd_validate(const Config& cfg) {
  const auto doc = mgb::io::load_model(cfg.model_path);
  const auto vs = mgb::validate(doc.model);
  Json out = header("validate");
  out["valid"] = vs.empty();
  out["n_states"] = doc.model.n_states();
  out["n_gears"] = doc.model.n_gears();
  out["violations"] = violations_json(doc.model, vs);
  emit(cfg, mgb::io::dump(out));
  return vs.empty() ? kOk : kViolation;
}

Json chain_metrics(const mgb::MultiGearModel& model, const mgb::IndexTable& table) {
  Json rows = Json::array();
  for (std::size_t k = 0; k < table.steps.size(); ++k) {
    const auto& st = table.steps[k];
    const auto& s = table.chain[k];
    Json row;
    row["k"] = k + 1;
    row["policy"] = mgb::io::policy_to_json(s);
    const auto r = static_cast<Eigen::Index>(st.state);
    if (table.criterion == mgb::Criterion::discounted) {
      const auto b = mgb::evaluate_policy(model, s);
      const auto mg = mgb::adjacent_marginals(model, b);
      row["F"] = std::vector<double>(b.cost.data(), b.cost.data() + b.cost.size());
      row["G"] = std::vector<double>(b.resource.data(), b.resource.data() + b.resource.size());
      row["f"] = mg.cost(r, st.gear);
      row["g"] = mg.resource(r, st.gear);
    } else {
      const auto b = mgb::evaluate_policy_average(model, s);
      const auto mg = mgb::average_marginals(model, b);
      row["F_rate"] = b.cost_rate;
      row["G_rate"] = b.resource_rate;
      row["f"] = mg.cost(r, st.gear);
      row["g"] = mg.resource(r, st.gear);
    }
    row["m"] = row["f"].get<double>() / row["g"].get<double>();
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_index(const Config& cfg, const Tolerances& tol) {
  const auto doc = load_valid_model(cfg, "index");
  if (!doc) return kViolation;
  const auto& model = doc->model;

  mgb::io::FamilySpec spec;
  if (!cfg.family.empty())
    spec = mgb::io::parse_family_spec(cfg.family);
  else if (doc->family)
    spec = *doc->family;
  const auto family = mgb::io::make_family(model, spec);
  const std::string family_name =
      spec.kind == mgb::PolicyFamily::Kind::explicit_list
          ? "list:" + spec.list_path.string()
          : std::string(mgb::to_string(spec.kind));

  mgb::ConnectednessOptions co;
  co.seed = cfg.seed;
  const auto conn = mgb::check_connectedness(family, co);
  if (!conn.ok) {
    Json out = header("index");
    out["family"] = family_name;
    out["connectedness"] = mgb::io::connectedness_to_json(conn);
    emit(cfg, mgb::io::dump(out));
    std::cerr << "mgbindex: family fails connectedness (" << mgb::to_string(conn.failed) << ")\n";
    return kConnectedness;
  }

  mgb::DsOptions opts;
  opts.eps_g = tol.eps_g;
  opts.eps_m = tol.eps_m;
  opts.fast = cfg.fast;
  opts.seed = cfg.seed;

  Json out = header("index");
  out["family"] = family_name;
  out["criterion"] = cfg.criterion;
  mgb::DsResult r;
  if (cfg.criterion == "average") {
    mgb::AccessibilityOptions ao;
    ao.seed = cfg.seed;
    const auto acc = mgb::check_unichain_and_accessibility(model, family, ao);
    if (!acc.ok()) {
      out["unichain"] = acc.unichain;
      out["multichain_witness"] =
          acc.multichain_witness ? mgb::io::policy_to_json(*acc.multichain_witness) : Json(nullptr);
      out["weakly_accessible"] = acc.weakly_accessible;
      emit(cfg, mgb::io::dump(out));
      std::cerr << "mgbindex: average criterion needs unichain, weakly accessible models\n";
      return kViolation;
    }
    r = mgb::run_ds_average(model, family, opts);
  } else {
    r = mgb::run_ds(model, family, opts);
  }

  if (cfg.format == "csv") {
    emit(cfg, mgb::io::table_csv(r.table, model));
  } else {
    out["table"] = mgb::io::table_to_json(r.table, model);
    out["certificate"] = mgb::io::certificate_to_json(r.certificate, model);
    out["connectedness"] = mgb::io::connectedness_to_json(conn);
    if (cfg.metrics) out["metrics"] = chain_metrics(model, r.table);
    emit(cfg, mgb::io::dump(out));
  }
  if (!r.certificate.certified()) {
    std::cerr << "mgbindex: table not certified (pcl1 " << (r.certificate.pcl1_ok ? "ok" : "failed")
              << ", pcl2 " << (r.certificate.pcl2_ok ? "ok" : "failed") << ")\n";
    return kNotCertified;
  }
  return kOk;
}

int cmd_verify(const Config& cfg, const Tolerances& tol) {
  const auto doc = load_valid_model(cfg, "verify");
  if (!doc) return kViolation;
  const auto& model = doc->model;
  auto table = mgb::io::parse_table(mgb::io::read_text(cfg.table_path), model);
  if (!cfg.criterion.empty() && cfg.criterion != mgb::to_string(table.criterion)) {
    // A CSV table carries no criterion; the flag supplies it.
    if (cfg.criterion == "average") table.criterion = mgb::Criterion::average;
  }

  mgb::VerifyOptions vo;
  vo.seed = cfg.seed;
  vo.threads = cfg.threads;
  vo.solver.eps_opt = tol.eps_opt;
  vo.bracket.solver.eps_opt = tol.eps_opt;
  const auto verdict = table.criterion == mgb::Criterion::average
                           ? mgb::verify_average_surrogate(model, table, vo)
                           : mgb::verify_indexability(model, table, vo);
  Json out = header("verify");
  out["criterion"] = mgb::to_string(table.criterion);
  out["verdict"] = mgb::io::verdict_to_json(verdict, model);
  emit(cfg, mgb::io::dump(out));
  return verdict.counterexample || !verdict.indexable_on_grid ? kViolation : kOk;
}

/// Validates an instance; reports and returns nullopt when invalid.
std::optional<mgb::io::InstanceDocument> load_valid_instance(const Config& cfg, const char* command) {
  auto doc = mgb::io::load_instance(cfg.instance_path);
  const auto problems = mgb::validate(doc.instance);
  if (problems.empty()) return doc;
  Json out = header(command);
  out["valid"] = false;
  out["problems"] = problems;
  emit(cfg, mgb::io::dump(out));
  std::cerr << "mgbindex: instance has " << problems.size() << " problem(s)\n";
  return std::nullopt;
}

Json joint_state_json(const mgb::io::InstanceDocument& doc) {
  Json out = Json::array();
  for (std::size_t l = 0; l < doc.initial.size(); ++l)
    out.push_back(mgb::io::state_label_json(doc.instance.projects[l], doc.initial[l]));
  return out;
}

double relative_gap(double upper, double bound) {
  return (upper - bound) / std::max(std::abs(bound), 1e-300);
}

int cmd_bound(const Config& cfg, const Tolerances& tol) {
  const auto doc = load_valid_instance(cfg, "bound");
  if (!doc) return kViolation;
  mgb::DualOptions dopt;
  dopt.threads = cfg.threads;
  dopt.solver.eps_opt = tol.eps_opt;
  const auto dual = mgb::lagrangian_bound(doc->instance, doc->initial, dopt);

  Json out = header("bound");
  out["initial_state"] = joint_state_json(*doc);
  out["budget"] = doc->instance.budget;
  out["lambda_star"] = dual.lambda_star;
  out["bound"] = dual.bound;
  out["per_project_values"] = dual.per_project_values;
  out["optimum"] = nullptr;
  out["policy_value"] = nullptr;
  out["stderr"] = nullptr;
  out["rel_gap"] = nullptr;
  if (!cfg.no_optimum) {
    try {
      mgb::check_joint_size(doc->instance, {});
      const mgb::JointSpace space(doc->instance);
      const double opt = mgb::solve_joint_dp(doc->instance).at(space, doc->initial);
      out["optimum"] = opt;
      out["rel_gap"] = relative_gap(opt, dual.bound);
    } catch (const mgb::SizeCapExceeded& e) {
      out["optimum_skipped"] = e.what();
    }
  }
  emit(cfg, mgb::io::dump(out));
  return kOk;
}

int cmd_simulate(const Config& cfg, const Tolerances& tol) {
  const auto doc = load_valid_instance(cfg, "simulate");
  if (!doc) return kViolation;
  const auto& inst = doc->instance;
  const bool exact = cfg.mode == "exact";
  if (exact) mgb::check_joint_size(inst, {});

  Json out = header("simulate");
  out["initial_state"] = joint_state_json(*doc);
  out["mode"] = cfg.mode;
  out["policy"] = cfg.policy;

  mgb::JointPolicy policy;
  if (cfg.policy == "index") {
    mgb::DsOptions opts;
    opts.eps_g = tol.eps_g;
    opts.eps_m = tol.eps_m;
    opts.seed = cfg.seed;
    std::vector<mgb::IndexTable> tables;
    Json certified = Json::array();
    for (const auto& p : inst.projects) {
      auto r = mgb::run_ds(p, mgb::PolicyFamily::full(p), opts);
      certified.push_back(r.certificate.certified());
      tables.push_back(std::move(r.table));
    }
    out["certified"] = std::move(certified);
    policy = mgb::downshift_index_policy(inst, std::move(tables));
  } else {
    policy = mgb::all_passive_policy(inst);
  }

  mgb::DualOptions dopt;
  dopt.threads = cfg.threads;
  dopt.solver.eps_opt = tol.eps_opt;
  const auto dual = mgb::lagrangian_bound(inst, doc->initial, dopt);
  out["bound"] = dual.bound;

  mgb::PolicyValue value;
  if (exact) {
    value = mgb::evaluate_joint_policy_exact(inst, policy, doc->initial);
    const mgb::JointSpace space(inst);
    out["optimum"] = mgb::solve_joint_dp(inst).at(space, doc->initial);
  } else {
    mgb::MonteCarloOptions mc;
    mc.replications = cfg.reps;
    mc.horizon = cfg.horizon;
    mc.seed = cfg.seed;
    mc.threads = cfg.threads;
    value = mgb::evaluate_joint_policy_mc(inst, policy, doc->initial, mc);
    out["optimum"] = nullptr;
  }
  out["policy_value"] = value.mean;
  out["stderr"] = value.std_error;
  out["replications"] = value.replications;
  out["horizon"] = value.horizon;
  out["rel_gap"] = relative_gap(value.mean, dual.bound);
  emit(cfg, mgb::io::dump(out));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Marginal productivity indices for multi-gear bandits"};
  app.require_subcommand(1);
  Config cfg;

  auto* validate = app.add_subcommand("validate", "Check a model file");
  validate->add_option("model", cfg.model_path, "Model file")->required();

  auto* index = app.add_subcommand("index", "Compute the index table and its certificate");
  index->add_option("model", cfg.model_path, "Model file")->required();
  index->add_option("--family", cfg.family, "full | multi_threshold | list:<path>");
  index->add_option("--criterion", cfg.criterion, "Cost criterion")
      ->check(CLI::IsMember({"discounted", "average"}));
  index->add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  index->add_flag("--fast", cfg.fast, "Check positivity only at the chain candidates");
  index->add_flag("--metrics", cfg.metrics, "Add per-step metrics to JSON output");
  index->add_option("--seed", cfg.seed, "Seed for sampled checks");

  auto* verify = app.add_subcommand("verify", "Check a table against the price-problem oracle");
  verify->add_option("model", cfg.model_path, "Model file")->required();
  verify->add_option("table", cfg.table_path, "Index table (CSV or JSON)")->required();
  verify->add_option("--criterion", cfg.criterion, "Criterion of a CSV table")
      ->check(CLI::IsMember({"discounted", "average"}));
  verify->add_option("--seed", cfg.seed, "Seed for random probe prices");

  auto* bound = app.add_subcommand("bound", "Lagrangian lower bound of a joint instance");
  bound->add_option("instance", cfg.instance_path, "Instance file")->required();
  bound->add_flag("--no-optimum", cfg.no_optimum, "Skip the exact joint optimum");

  auto* simulate = app.add_subcommand("simulate", "Value of the index policy on a joint instance");
  simulate->add_option("instance", cfg.instance_path, "Instance file")->required();
  simulate->add_option("--mode", cfg.mode, "exact | mc")->check(CLI::IsMember({"exact", "mc"}));
  simulate->add_option("--policy", cfg.policy, "index | passive")
      ->check(CLI::IsMember({"index", "passive"}));
  simulate->add_option("--reps", cfg.reps, "Monte Carlo replications")->check(CLI::PositiveNumber);
  simulate->add_option("--horizon", cfg.horizon, "Monte Carlo horizon (0: automatic)");
  simulate->add_option("--seed", cfg.seed, "Monte Carlo seed");

  for (auto* sub : {validate, index, verify, bound, simulate})
    sub->add_option("-o,--output", cfg.output, "Write the report to a file");
  for (auto* sub : {verify, bound, simulate})
    sub->add_option("--threads", cfg.threads, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    const Tolerances tol = read_tolerances();
    if (validate->parsed()) return cmd_validate(cfg);
    if (index->parsed()) return cmd_index(cfg, tol);
    if (verify->parsed()) return cmd_verify(cfg, tol);
    if (bound->parsed()) return cmd_bound(cfg, tol);
    return cmd_simulate(cfg, tol);
  } catch (const UsageError& e) {
    std::cerr << "mgbindex: " << e.what() << "\n";
    return kUsage;
  } catch (const mgb::ParseError& e) {
    std::cerr << "mgbindex: parse error: " << e.what() << "\n";
    return kParse;
  } catch (const mgb::ConnectednessError& e) {
    std::cerr << "mgbindex: connectedness: " << e.what() << "\n";
    return kConnectedness;
  } catch (const mgb::SizeCapExceeded& e) {
    Json out = header("size_cap");
    out["size"] = e.size;
    out["cap"] = e.cap;
    out["message"] = e.what();
    std::cout << mgb::io::dump(out);
    std::cerr << "mgbindex: " << e.what() << "\n";
    return kSizeCap;
  } catch (const mgb::MultichainError& e) {
    std::cerr << "mgbindex: " << e.what() << "\n";
    return kViolation;
  } catch (const std::exception& e) {
    std::cerr << "mgbindex: numeric failure: " << e.what() << "\n";
    return kNumeric;
  }
}
