#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nsdp/io.hpp"

namespace nsdp::cli {

constexpr const char* kVersion = "0.1.0";

enum ExitCode { kPass = 0, kCheckFailure = 1, kInputError = 2 };

struct RunConfig {
  std::string command;
  std::string model_path;
  std::string program_path;
  std::string out_path;     // solve: table export
  std::string report_path;  // machine-readable report; empty = none
  std::optional<double> epsilon;
  std::vector<std::string> checks{"bellman", "euler", "viability", "subdiff"};
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double tol_active = kDefaultActiveTol;
  double tol_face = kDefaultFaceTol;
  double tol_policy = 1e-9;
  double tol_membership = 1e-9;
  double tol_audit = 1e-6;
  double tol_bellman = 1e-9;
};

struct Report {
  int exit_code = kPass;
  io::Json json;
  std::string text;
};

Report cmd_validate(const RunConfig& config);
Report cmd_solve(const RunConfig& config);
Report cmd_audit(const RunConfig& config);

std::string sha256_hex(const std::string& bytes);

// Parses arguments, dispatches, prints the text report to `out` and
// diagnostics to `err`, writes --report / --out files. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nsdp::cli
