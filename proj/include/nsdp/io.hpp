#pragma once

// JSON model, expression and program files; value-table export; JSON views
// of certificates for reports. The schema is documented in README.md.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "nsdp/dp.hpp"
#include "nsdp/stochastic.hpp"

namespace nsdp::io {

using Json = nlohmann::ordered_json;

struct ModelFile {
  std::optional<DPModel> deterministic;
  std::optional<StochasticDPModel> stochastic;

  bool is_stochastic() const { return stochastic.has_value(); }
};

struct ProgramFile {
  std::vector<Eigen::VectorXd> states;  // deterministic
  AdaptedProcess process;               // stochastic
  bool stochastic = false;
};

// Syntax errors throw ParseError with 1-based line and column. Schema errors
// throw ModelError whose message starts with the JSON pointer of the
// offending value.
Json parse_json(const std::string& text);
ModelFile parse_model(const std::string& text);
ProgramFile parse_program(const std::string& text);
std::string read_file(const std::string& path);

Expr expr_from_json(const Json& j, const std::string& where = "");
FeasibilitySet set_from_json(const Json& j, const std::string& where = "");
Grid grid_from_json(const Json& j, const std::string& where = "");

// Serialization of built-in expressions; custom atoms throw ModelError.
Json to_json(const Expr& e);
Json to_json(const FeasibilitySet& s);
Json to_json(const Grid& g);
Json to_json(const BoundSequence& b);
Json to_json(const DPModel& m);
Json to_json(const StochasticDPModel& m);

Json vector_json(const Eigen::VectorXd& v);
Json to_json(const Polytope& p);
Json to_json(const PolyhedralCone& c);
Json to_json(const MembershipCertificate& c);
Json to_json(const ViabilityReport& r);

// One header comment block then one tab-separated row per (stage, node):
// stage, node, coordinates, value (or "inf"), ';'-separated candidates with
// ','-separated coordinates. Numbers use %.17g.
std::string export_table(const ValueTable& table);

std::string format_double(double v);

}  // namespace nsdp::io
