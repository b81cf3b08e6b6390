#include "mgb/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace mgb::io {

namespace fs = std::filesystem;

namespace {

void write_value(std::string& out, const Json& v, int indent, int depth) {
  const auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (const auto& [key, item] : v.items()) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += Json(key).dump();
        out += indent < 0 ? ":" : ": ";
        write_value(out, item, indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      const bool flat = std::none_of(v.begin(), v.end(), [](const Json& x) { return x.is_structured(); });
      out += '[';
      bool first = true;
      for (const auto& item : v) {
        if (!first) out += flat ? ", " : ",";
        first = false;
        if (!flat) newline(depth + 1);
        write_value(out, item, indent, depth + 1);
      }
      if (!flat) newline(depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float:
      out += std::isfinite(v.get<double>()) ? format_double(v.get<double>()) : "null";
      return;
    default:
      out += v.dump();
  }
}

[[noreturn]] void fail(const std::string& what) { throw ParseError(what); }

const Json& require(const Json& doc, const char* key) {
  if (!doc.is_object()) fail("expected a JSON object");
  const auto it = doc.find(key);
  if (it == doc.end()) fail(std::string("missing field '") + key + "'");
  return *it;
}

double number(const Json& v, const std::string& where) {
  if (!v.is_number()) fail(where + ": expected a number");
  return v.get<double>();
}

long long integer(const Json& v, const std::string& where) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (std::isfinite(x) && x == std::floor(x)) return static_cast<long long>(x);
  }
  fail(where + ": expected an integer");
}

Matrix read_matrix(const Json& v, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  if (!v.is_array() || static_cast<Eigen::Index>(v.size()) != rows)
    fail(name + ": expected " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      fail(name + ": row " + std::to_string(i + 1) + " must have " + std::to_string(cols) + " entries");
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = number(row[static_cast<std::size_t>(j)], name);
  }
  return m;
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed JSON: ") + e.what());
  }
}

void check_schema(const Json& doc) {
  if (!doc.is_object()) return;
  const auto it = doc.find("schema_version");
  if (it != doc.end() && integer(*it, "schema_version") != kSchemaVersion)
    fail("unsupported schema_version " + it->dump());
}

Criterion parse_criterion(const std::string& s) {
  if (s == "discounted") return Criterion::discounted;
  if (s == "average") return Criterion::average;
  fail("unknown criterion '" + s + "'");
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  if (s == "nan" || s == "NaN") return std::nan("");
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(s, &used);
  } catch (const std::exception&) {
    fail(where + ": not a number '" + s + "'");
  }
  if (used != s.size()) fail(where + ": not a number '" + s + "'");
  return x;
}

IndexTable build_table(const MultiGearModel& model, Criterion criterion,
                       std::vector<std::pair<long long, IndexStep>> rows) {
  std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  IndexTable t;
  t.criterion = criterion;
  t.n_states = model.n_states();
  t.top_gear = model.top_gear();
  if (rows.size() != model.n_index_pairs())
    fail("table has " + std::to_string(rows.size()) + " rows, model needs " +
         std::to_string(model.n_index_pairs()));
  StationaryPolicy s = StationaryPolicy::top(model);
  t.chain.push_back(s);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].first != static_cast<long long>(k + 1)) fail("table steps must be numbered 1..K");
    const IndexStep& st = rows[k].second;
    if (!model.is_controllable(st.state)) fail("table row " + std::to_string(k + 1) + ": uncontrollable state");
    if (st.gear < 1 || st.gear > model.top_gear() || s.gear(st.state) != st.gear)
      fail("table row " + std::to_string(k + 1) + ": gear does not match the downshift chain");
    s = shift(s, st.state, st.gear, st.gear - 1);
    t.steps.push_back(st);
    t.chain.push_back(s);
  }
  return t;
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string dump(const Json& doc, int indent) {
  std::string out;
  write_value(out, doc, indent, 0);
  if (indent >= 0) out += '\n';
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot read '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) fail("cannot read '" + path.string() + "'");
  return os.str();
}

FamilySpec parse_family_spec(std::string_view text, const fs::path& base_dir) {
  FamilySpec spec;
  if (text == "full") return spec;
  if (text == "multi_threshold") {
    spec.kind = PolicyFamily::Kind::multi_threshold;
    return spec;
  }
  if (text.substr(0, 5) == "list:" && text.size() > 5) {
    spec.kind = PolicyFamily::Kind::explicit_list;
    fs::path p(std::string(text.substr(5)));
    spec.list_path = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    return spec;
  }
  fail("unknown family '" + std::string(text) + "' (full, multi_threshold, list:<path>)");
}

State parse_state_label(const MultiGearModel& model, const Json& label) {
  if (label.is_string()) {
    const auto& names = model.state_names();
    const auto s = label.get<std::string>();
    const auto it = std::find(names.begin(), names.end(), s);
    if (it != names.end()) return static_cast<State>(it - names.begin());
    if (names.empty() && !s.empty() && s.find_first_not_of("0123456789") == std::string::npos)
      return parse_state_label(model, Json(std::stoll(s)));
    fail("unknown state label '" + s + "'");
  }
  const long long k = integer(label, "state label");
  if (k < 1 || k > static_cast<long long>(model.n_states()))
    fail("state label " + std::to_string(k) + " out of range 1.." + std::to_string(model.n_states()));
  return static_cast<State>(k - 1);
}

Json state_label_json(const MultiGearModel& model, State i) {
  if (!model.state_names().empty()) return model.state_names()[i];
  return static_cast<long long>(i + 1);
}

MultiGearModel model_from_json(const Json& doc) {
  check_schema(doc);
  try {
    const long long n = integer(require(doc, "n_states"), "n_states");
    const long long g = integer(require(doc, "n_gears"), "n_gears");
    if (n < 1) fail("n_states must be positive");
    if (g < 1) fail("n_gears must be positive");
    const double beta = number(require(doc, "discount"), "discount");
    const auto N = static_cast<Eigen::Index>(n);
    const auto G = static_cast<Eigen::Index>(g);
    Matrix h = read_matrix(require(doc, "holding_cost"), N, G, "holding_cost");
    Matrix q = read_matrix(require(doc, "resource_use"), N, G, "resource_use");
    const auto& tr = require(doc, "transitions");
    if (!tr.is_array() || static_cast<Eigen::Index>(tr.size()) != G)
      fail("transitions: expected " + std::to_string(g) + " matrices");
    std::vector<Matrix> p;
    for (Eigen::Index a = 0; a < G; ++a)
      p.push_back(read_matrix(tr[static_cast<std::size_t>(a)], N, N,
                              "transitions[" + std::to_string(a) + "]"));

    std::vector<std::string> names;
    if (const auto it = doc.find("state_names"); it != doc.end()) {
      if (!it->is_array() || static_cast<Eigen::Index>(it->size()) != N)
        fail("state_names: expected one name per state");
      for (const auto& s : *it) {
        if (!s.is_string()) fail("state_names: expected strings");
        names.push_back(s.get<std::string>());
      }
      auto sorted = names;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        fail("state_names: duplicate name");
    }
    // Labels are resolved against a shell model carrying the names.
    const MultiGearModel shell(beta, h, q, p, {}, names);
    std::vector<State> unc;
    if (const auto it = doc.find("uncontrollable"); it != doc.end()) {
      if (!it->is_array()) fail("uncontrollable: expected an array of state labels");
      for (const auto& l : *it) unc.push_back(parse_state_label(shell, l));
      std::sort(unc.begin(), unc.end());
      if (std::adjacent_find(unc.begin(), unc.end()) != unc.end())
        fail("uncontrollable: duplicate state");
    }
    return MultiGearModel(beta, std::move(h), std::move(q), std::move(p), std::move(unc),
                          std::move(names));
  } catch (const ShapeError& e) {
    fail(e.what());
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  }
}

ModelDocument parse_model(std::string_view text, const fs::path& base_dir) {
  const Json doc = parse_json(text);
  ModelDocument out{model_from_json(doc), std::nullopt};
  if (const auto it = doc.find("family"); it != doc.end()) {
    if (!it->is_string()) fail("family: expected a string");
    out.family = parse_family_spec(it->get<std::string>(), base_dir);
  }
  return out;
}

ModelDocument load_model(const fs::path& path) {
  return parse_model(read_text(path), path.parent_path());
}

Json model_to_json(const MultiGearModel& model) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["n_states"] = model.n_states();
  doc["n_gears"] = model.n_gears();
  doc["discount"] = model.discount();
  if (!model.state_names().empty()) doc["state_names"] = model.state_names();
  doc["holding_cost"] = matrix_json(model.holding_costs());
  doc["resource_use"] = matrix_json(model.resource_uses());
  Json tr = Json::array();
  for (Gear a = 0; a < model.n_gears(); ++a) tr.push_back(matrix_json(model.transition(a)));
  doc["transitions"] = std::move(tr);
  Json unc = Json::array();
  for (State i : model.uncontrollable_states()) unc.push_back(state_label_json(model, i));
  doc["uncontrollable"] = std::move(unc);
  return doc;
}

std::vector<StationaryPolicy> parse_policy_list(std::string_view text, const MultiGearModel& model) {
  const Json doc = parse_json(text);
  check_schema(doc);
  const Json& list = doc.is_array() ? doc : require(doc, "policies");
  if (!list.is_array()) fail("policies: expected an array");
  std::vector<StationaryPolicy> out;
  for (std::size_t k = 0; k < list.size(); ++k) {
    const auto where = "policy " + std::to_string(k + 1);
    if (!list[k].is_array() || list[k].size() != model.n_states())
      fail(where + ": expected one gear per state");
    std::vector<Gear> gears;
    for (const auto& g : list[k]) gears.push_back(static_cast<Gear>(integer(g, where)));
    StationaryPolicy s(std::move(gears));
    try {
      check_policy(model, s);
    } catch (const PolicyMismatch& e) {
      fail(where + ": " + e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

PolicyFamily make_family(const MultiGearModel& model, const FamilySpec& spec) {
  switch (spec.kind) {
    case PolicyFamily::Kind::multi_threshold: return PolicyFamily::multi_threshold(model);
    case PolicyFamily::Kind::explicit_list:
      return PolicyFamily::explicit_list(model, parse_policy_list(read_text(spec.list_path), model));
    default: return PolicyFamily::full(model);
  }
}

std::string table_csv(const IndexTable& table, const MultiGearModel& model) {
  std::string out = "k,state,gear,mpi\n";
  for (std::size_t k = 0; k < table.steps.size(); ++k) {
    const auto& s = table.steps[k];
    out += std::to_string(k + 1) + "," + model.state_label(s.state) + "," + std::to_string(s.gear) +
           "," + format_double(s.mpi) + "\n";
  }
  return out;
}

Json policy_to_json(const StationaryPolicy& policy) { return policy.gears(); }

Json table_to_json(const IndexTable& table, const MultiGearModel& model) {
  Json doc;
  doc["criterion"] = to_string(table.criterion);
  doc["n_states"] = table.n_states;
  doc["n_gears"] = table.top_gear + 1;
  Json steps = Json::array();
  for (std::size_t k = 0; k < table.steps.size(); ++k) {
    const auto& s = table.steps[k];
    Json row;
    row["k"] = k + 1;
    row["state"] = state_label_json(model, s.state);
    row["gear"] = s.gear;
    row["mpi"] = s.mpi;
    steps.push_back(std::move(row));
  }
  doc["steps"] = std::move(steps);
  Json chain = Json::array();
  for (const auto& s : table.chain) chain.push_back(policy_to_json(s));
  doc["chain"] = std::move(chain);
  return doc;
}

Json certificate_to_json(const PclCertificate& cert, const MultiGearModel& model) {
  Json doc;
  doc["certified"] = cert.certified();
  doc["pcl1_ok"] = cert.pcl1_ok;
  doc["pcl2_ok"] = cert.pcl2_ok;
  doc["coverage"] = to_string(cert.coverage);
  doc["policies_checked"] = cert.policies_checked;
  doc["eps_g"] = cert.eps_g;
  doc["eps_m"] = cert.eps_m;
  if (cert.pcl1_witness) {
    const auto& w = *cert.pcl1_witness;
    doc["pcl1_witness"] = Json{{"policy", policy_to_json(w.policy)},
                               {"state", state_label_json(model, w.state)},
                               {"gears", Json::array({w.gear - 1, w.gear})},
                               {"g", w.g}};
  } else {
    doc["pcl1_witness"] = nullptr;
  }
  if (cert.pcl2_witness) {
    const auto& w = *cert.pcl2_witness;
    doc["pcl2_witness"] = Json{{"k", w.k}, {"m_k", w.m_k}, {"m_next", w.m_next}};
  } else {
    doc["pcl2_witness"] = nullptr;
  }
  return doc;
}

Json connectedness_to_json(const ConnectednessReport& report) {
  Json doc;
  doc["ok"] = report.ok;
  doc["failed"] = to_string(report.failed);
  doc["witness"] = report.witness ? policy_to_json(*report.witness) : Json(nullptr);
  doc["exhaustive"] = report.exhaustive;
  doc["members_checked"] = report.members_checked;
  return doc;
}

IndexTable parse_table(std::string_view text, const MultiGearModel& model) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) fail("empty table");
  std::vector<std::pair<long long, IndexStep>> rows;

  if (text[first] == '{') {
    const Json doc = parse_json(text);
    check_schema(doc);
    const Json& body = doc.contains("table") ? doc["table"] : doc;
    try {
      const auto criterion = body.contains("criterion")
                                 ? parse_criterion(body["criterion"].get<std::string>())
                                 : Criterion::discounted;
      if (body.contains("n_states") && integer(body["n_states"], "n_states") !=
                                           static_cast<long long>(model.n_states()))
        fail("table n_states does not match the model");
      const auto& steps = require(body, "steps");
      if (!steps.is_array()) fail("steps: expected an array");
      for (const auto& row : steps) {
        const double mpi = row.contains("mpi") && row["mpi"].is_null()
                               ? std::nan("")
                               : number(require(row, "mpi"), "mpi");
        rows.push_back({integer(require(row, "k"), "k"),
                        IndexStep{parse_state_label(model, require(row, "state")),
                                  static_cast<Gear>(integer(require(row, "gear"), "gear")), mpi}});
      }
      IndexTable t = build_table(model, criterion, std::move(rows));
      if (const auto it = body.find("chain"); it != body.end()) {
        if (!it->is_array() || it->size() != t.chain.size()) fail("chain length does not match steps");
        for (std::size_t k = 0; k < t.chain.size(); ++k)
          if ((*it)[k].get<std::vector<Gear>>() != t.chain[k].gears())
            fail("chain entry " + std::to_string(k + 1) + " does not match the steps");
      }
      return t;
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    }
  }

  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (!header) {
      if (cells != std::vector<std::string>{"k", "state", "gear", "mpi"})
        fail("table CSV must start with header k,state,gear,mpi");
      header = true;
      continue;
    }
    const auto where = "line " + std::to_string(lineno);
    if (cells.size() != 4) fail(where + ": expected 4 columns");
    const double k = parse_double(cells[0], where);
    const double gear = parse_double(cells[2], where);
    if (k != std::floor(k) || gear != std::floor(gear)) fail(where + ": k and gear must be integers");
    rows.push_back({static_cast<long long>(k),
                    IndexStep{parse_state_label(model, Json(cells[1])), static_cast<Gear>(gear),
                              parse_double(cells[3], where)}});
  }
  if (!header) fail("empty table");
  return build_table(model, Criterion::discounted, std::move(rows));
}

Json verdict_to_json(const IndexabilityVerdict& verdict, const MultiGearModel& model) {
  Json doc;
  doc["indexable"] = verdict.indexable_on_grid;
  if (verdict.counterexample) {
    const auto& c = *verdict.counterexample;
    doc["counterexample"] = Json{{"lambda", c.lambda},
                                 {"state", state_label_json(model, c.state)},
                                 {"description", c.description}};
  } else {
    doc["counterexample"] = nullptr;
  }
  doc["max_gap"] = verdict.max_dai_vs_mpi_gap;
  doc["all_bracketed"] = verdict.all_bracketed;
  doc["clause_failures"] = verdict.clause_failures;
  doc["chain_clause_failures"] = verdict.chain_clause_failures;
  doc["grid_size"] = verdict.grid.size();
  Json entries = Json::array();
  for (const auto& e : verdict.dai_estimates) {
    Json row;
    row["state"] = state_label_json(model, e.state);
    row["gear"] = e.gear;
    row["mpi"] = e.mpi;
    row["dai_lo"] = e.bracketed ? Json(e.lo) : Json(nullptr);
    row["dai_hi"] = e.bracketed ? Json(e.hi) : Json(nullptr);
    row["gap"] = e.bracketed ? Json(e.gap()) : Json(nullptr);
    row["non_monotone"] = e.non_monotone;
    entries.push_back(std::move(row));
  }
  doc["entries"] = std::move(entries);
  return doc;
}

InstanceDocument parse_instance(std::string_view text, const fs::path& base_dir) {
  const Json doc = parse_json(text);
  check_schema(doc);
  InstanceDocument out;
  try {
    out.instance.budget = number(require(doc, "budget"), "budget");
    const auto& projects = require(doc, "projects");
    if (!projects.is_array() || projects.empty()) fail("projects: expected a non-empty array");
    for (const auto& p : projects) {
      if (p.is_string()) {
        fs::path path(p.get<std::string>());
        if (!path.is_absolute() && !base_dir.empty()) path = base_dir / path;
        out.instance.projects.push_back(load_model(path).model);
      } else {
        out.instance.projects.push_back(model_from_json(p));
      }
    }
    const auto L = out.instance.projects.size();
    out.initial.assign(L, 0);
    if (const auto it = doc.find("initial_state"); it != doc.end()) {
      if (!it->is_array() || it->size() != L) fail("initial_state: expected one label per project");
      for (std::size_t l = 0; l < L; ++l)
        out.initial[l] = parse_state_label(out.instance.projects[l], (*it)[l]);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(e.what());
  }
  return out;
}

InstanceDocument load_instance(const fs::path& path) {
  return parse_instance(read_text(path), path.parent_path());
}

}  // namespace mgb::io
