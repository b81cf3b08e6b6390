#pragma once

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mgb/average_cost.hpp"
#include "mgb/ds_index.hpp"
#include "mgb/mamgbp.hpp"
#include "mgb/oracle.hpp"

namespace mgb::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Serializes with every floating-point number printed as %.17g and
/// non-finite numbers as null.
std::string dump(const Json& doc, int indent = 2);

/// %.17g
std::string format_double(double x);

/// Whole file as text; ParseError if it cannot be read.
std::string read_text(const std::filesystem::path& path);

/// Family selection: full, multi_threshold or list:<path>.
struct FamilySpec {
  PolicyFamily::Kind kind = PolicyFamily::Kind::full;
  std::filesystem::path list_path;  // explicit_list only
};

FamilySpec parse_family_spec(std::string_view text, const std::filesystem::path& base_dir = {});

struct ModelDocument {
  MultiGearModel model;
  std::optional<FamilySpec> family;
};

/// Parses a model document. State labels are 1-based integers or aliases
/// from the optional `state_names` array.
ModelDocument parse_model(std::string_view text, const std::filesystem::path& base_dir = {});
ModelDocument load_model(const std::filesystem::path& path);
MultiGearModel model_from_json(const Json& doc);
Json model_to_json(const MultiGearModel& model);

/// 0-based state of an external label (number or alias); ParseError if unknown.
State parse_state_label(const MultiGearModel& model, const Json& label);
Json state_label_json(const MultiGearModel& model, State i);

/// Policy list: a JSON array of gear vectors, or an object with `policies`.
std::vector<StationaryPolicy> parse_policy_list(std::string_view text, const MultiGearModel& model);

PolicyFamily make_family(const MultiGearModel& model, const FamilySpec& spec);

/// CSV with header k,state,gear,mpi.
std::string table_csv(const IndexTable& table, const MultiGearModel& model);
Json table_to_json(const IndexTable& table, const MultiGearModel& model);
Json certificate_to_json(const PclCertificate& cert, const MultiGearModel& model);
Json connectedness_to_json(const ConnectednessReport& report);
Json policy_to_json(const StationaryPolicy& policy);

/// Table from CSV or JSON text. The chain is rebuilt from the steps and, for
/// JSON input carrying one, cross-checked against it.
IndexTable parse_table(std::string_view text, const MultiGearModel& model);

Json verdict_to_json(const IndexabilityVerdict& verdict, const MultiGearModel& model);

struct InstanceDocument {
  JointInstance instance;
  JointState initial;  // 0-based, defaults to the first state of each project
};

/// Instance: `budget`, `projects` (model paths relative to the instance file,
/// or inline model objects) and optional `initial_state` labels.
InstanceDocument parse_instance(std::string_view text, const std::filesystem::path& base_dir = {});
InstanceDocument load_instance(const std::filesystem::path& path);

}  // namespace mgb::io
