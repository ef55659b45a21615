#include "commands.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "nsdp/errors.hpp"

namespace nsdp::cli {

namespace {

using io::Json;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Loaded {
  io::ModelFile file;
  std::string digest;
};

Loaded load_model(const std::string& path) {
  std::string bytes;
  try {
    bytes = io::read_file(path);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  Loaded out;
  out.digest = "sha256:" + sha256_hex(bytes);
  try {
    out.file = io::parse_model(bytes);
  } catch (const ParseError& e) {
    throw InputError(path + ": parse error at " + e.what());
  } catch (const std::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  return out;
}

Json header(const RunConfig& config, const std::string& digest) {
  return Json{{"tool", "nsdp"}, {"version", kVersion}, {"command", config.command}, {"model_digest", digest}};
}

Report input_error(const RunConfig& config, const std::string& message) {
  Report r;
  r.exit_code = kInputError;
  r.json = Json{{"tool", "nsdp"}, {"version", kVersion}, {"command", config.command}, {"status", "input_error"},
                {"error", message}};
  r.text = "input error: " + message + "\n";
  return r;
}

// Structural and assumption diagnostics shared by every command.
struct Validation {
  std::vector<std::string> errors;
  std::vector<std::string> notes;
  Json json;
};

Validation validate_loaded(const io::ModelFile& file, std::uint64_t seed) {
  Validation v;
  v.json = Json::object();
  if (file.deterministic) {
    const DPModel& m = *file.deterministic;
    v.json["kind"] = "deterministic";
    v.json["stages"] = m.stages.size();
    if (m.bounds) {
      const SummabilityResult s = check_summability(m);
      v.json["summability"] = Json{{"ok", s.ok}, {"horizon", s.horizon}, {"tail", s.tail}};
      if (!s.ok) v.errors.push_back("cost-bound summability assumption failed: " + s.message);
    } else {
      v.notes.push_back("no cost bounds supplied; summability not checked");
    }
    return v;
  }
  const StochasticDPModel& m = *file.stochastic;
  v.json["kind"] = "stochastic";
  v.json["atoms"] = m.tree.atoms();
  v.json["stages"] = m.stages.size();
  const AssumptionReport a = check_assumptions(m, seed);
  v.errors = a.messages;
  v.notes = a.notes;
  Json lipschitz = Json::array();
  for (const auto& le : a.lipschitz) {
    Json entry{{"stage", le.stage}, {"atom", le.atom}, {"estimated_at_least", le.estimated_at_least}};
    if (le.declared) entry["declared"] = *le.declared;
    entry["falsified"] = le.falsified;
    lipschitz.push_back(std::move(entry));
  }
  v.json["assumptions"] = Json{{"bound_sums", a.bound_sums}, {"envelope_ok", a.envelope_ok}, {"lipschitz", lipschitz}};
  if (a.structure.ok() && !m.atom_bounds.empty()) {
    const DPModel reduced = reduce_to_deterministic(m);
    const SummabilityResult s = check_summability(*reduced.bounds, m.horizon.epsilon);
    v.json["summability"] = Json{{"ok", s.ok}, {"horizon", s.horizon}, {"tail", s.tail}};
    if (!s.ok) v.errors.push_back("cost-bound summability assumption failed: " + s.message);
  }
  return v;
}

DPModel deterministic_view(const io::ModelFile& file, const RunConfig& config) {
  DPModel m = file.deterministic ? *file.deterministic : reduce_to_deterministic(*file.stochastic);
  if (config.epsilon) {
    if (!(*config.epsilon > 0.0)) throw InputError("--epsilon must be positive");
    if (!m.bounds) throw InputError("--epsilon needs cost bounds in the model");
    m.horizon = Horizon{HorizonMode::truncated, *config.epsilon};
  }
  return m;
}

ValueTable solve(const DPModel& m, const RunConfig& config) {
  SolveOptions options;
  options.policy_tol = config.tol_policy;
  options.threads = config.threads;
  try {
    return solve_value(m, options);
  } catch (const AllInfeasibleStage& e) {
    throw InputError("stage " + std::to_string(e.stage()) + " has no feasible grid node: " + e.what());
  } catch (const ModelError& e) {
    throw InputError(e.what());
  }
}

std::string format_vector(const Eigen::VectorXd& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? ", " : "") + io::format_double(v(i));
  return out + "]";
}

CheckOptions check_options(const RunConfig& config) {
  CheckOptions o;
  o.active_tol = config.tol_active;
  o.face_tol = config.tol_face;
  o.policy_tol = config.tol_policy;
  o.viability.seed = config.seed;
  o.membership.residual = config.tol_membership;
  o.membership.margin = config.tol_membership;
  o.audit_tol = config.tol_audit;
  return o;
}

// Aggregates per-stage outcomes of one check. Premise failures are recorded as
// not applicable and do not fail the section.
struct Section {
  explicit Section(std::string n) : name(std::move(n)) {}

  std::string name;
  Json entries = Json::array();
  std::ostringstream text;
  std::size_t passed = 0, failed = 0, skipped = 0;

  void pass(Json entry, const std::string& line) {
    ++passed;
    add(std::move(entry), line);
  }
  void fail(Json entry, const std::string& line) {
    ++failed;
    add(std::move(entry), line);
  }
  void not_applicable(Json entry, const PremiseViolation& e) {
    ++skipped;
    entry["status"] = "not_applicable";
    entry["premise"] = e.premise();
    entry["detail"] = e.what();
    add(std::move(entry), "not applicable (premise " + e.premise() + " uncertified)");
  }
  std::string status() const {
    if (failed) return "fail";
    if (!passed) return "not_applicable";
    return "pass";
  }
  Json json() const { return Json{{"status", status()}, {"stages", entries}}; }

 private:
  void add(Json entry, const std::string& line) {
    text << "  " << name << " stage " << entry.value("stage", 0) << ": " << line << "\n";
    entries.push_back(std::move(entry));
  }
};

struct AuditContext {
  const RunConfig& config;
  const io::ModelFile& file;
  const DPModel& model;  // deterministic or reduced
  const ValueTable& table;
  const std::vector<Eigen::VectorXd>& states;  // flattened program
  CheckOptions options;
  StochasticCheckOptions stochastic_options;

  std::size_t last_checked_stage() const {
    return std::min(states.size() - 2, table.horizon);
  }
};

Json membership_entry(std::size_t t, const MembershipCertificate& c, double residual_l1) {
  return Json{{"stage", t},
              {"status", c.is_member() ? "member" : "non_member"},
              {"residual_l1", residual_l1},
              {"certificate", io::to_json(c)}};
}

std::string membership_line(const MembershipCertificate& c, double residual_l1) {
  if (c.is_member()) return "member (residual " + io::format_double(residual_l1) + ")";
  std::string line = "non_member";
  if (c.separator) line += ", separator " + format_vector(*c.separator) + ", margin " + io::format_double(c.margin);
  return line;
}

Section bellman_section(const AuditContext& ctx) {
  Section s("bellman");
  const std::vector<double> residuals = bellman_residual(ctx.model, ctx.table, ctx.states);
  for (std::size_t t = 0; t < residuals.size(); ++t) {
    Json entry{{"stage", t}, {"residual", residuals[t]}};
    const std::string line = "residual " + io::format_double(residuals[t]);
    if (std::abs(residuals[t]) <= ctx.config.tol_bellman) {
      entry["status"] = "pass";
      s.pass(std::move(entry), "pass, " + line);
    } else {
      entry["status"] = "fail";
      s.fail(std::move(entry), "fail, " + line);
    }
  }
  return s;
}

// The program's next state when it is a policy point, otherwise the first
// policy candidate at the action.
std::pair<Eigen::VectorXd, std::string> next_action(const AuditContext& ctx, std::size_t t) {
  if (t + 1 > ctx.table.horizon) return {Eigen::VectorXd(), "none"};
  if (t + 2 < ctx.states.size() &&
      is_policy_point(ctx.model, ctx.table, t + 1, ctx.states[t + 1], ctx.states[t + 2], ctx.options.policy_tol)) {
    return {ctx.states[t + 2], "program"};
  }
  try {
    const Polytope policy = extract_policy(ctx.model, ctx.table, t + 1, ctx.states[t + 1], ctx.options.policy_tol);
    return {policy.generators().front(), "policy"};
  } catch (const EmptyPolicySet& e) {
    throw PremiseViolation("next_policy_point", e.what());
  }
}

Section euler_section(const AuditContext& ctx) {
  Section s("euler");
  for (std::size_t t = 0; t <= ctx.last_checked_stage(); ++t) {
    Json entry{{"stage", t}};
    try {
      const auto [z, source] = next_action(ctx, t);
      entry["next_source"] = source;
      if (ctx.file.deterministic) {
        const EulerCertificate c = euler_check(ctx.model, ctx.table, t, ctx.states[t], ctx.states[t + 1], z, ctx.options);
        Json e = membership_entry(t, c.membership, c.residual_l1);
        e["next_source"] = source;
        e["y_on_policy"] = c.y_on_policy;
        e["cost_y"] = io::to_json(c.cost_y);
        e["next_cost_x"] = io::to_json(c.next_cost_x);
        e["normal"] = io::to_json(c.normal);
        if (c.member()) {
          s.pass(std::move(e), membership_line(c.membership, c.residual_l1));
        } else {
          s.fail(std::move(e), membership_line(c.membership, c.residual_l1));
        }
        continue;
      }
      const StochasticDPModel& m = *ctx.file.stochastic;
      const auto f = unflatten(m, t, ctx.states[t]);
      const auto g = unflatten(m, t + 1, ctx.states[t + 1]);
      const auto next = z.size() ? unflatten(m, t + 2, z) : std::vector<Eigen::VectorXd>{};
      const StochasticEuler c = stochastic_euler_check(m, ctx.model, ctx.table, t, f, g, next, ctx.stochastic_options);
      Json atoms = Json::array();
      std::string line = c.member() ? "member" : "non_member";
      for (const auto& a : c.atoms) {
        Json ae = membership_entry(t, a.membership, a.residual_l1);
        ae.erase("stage");
        ae["atom"] = a.atom;
        ae["cost_y"] = io::to_json(a.cost_y);
        ae["next_cost_x"] = io::to_json(a.next_cost_x);
        ae["normal"] = io::to_json(a.normal);
        atoms.push_back(std::move(ae));
        line += "\n    atom " + std::to_string(a.atom) + ": " + membership_line(a.membership, a.residual_l1);
      }
      Json e{{"stage", t}, {"status", c.member() ? "member" : "non_member"}, {"next_source", source},
             {"y_on_policy", c.y_on_policy}, {"atoms", std::move(atoms)}};
      if (c.member()) {
        s.pass(std::move(e), line);
      } else {
        s.fail(std::move(e), line);
      }
    } catch (const PremiseViolation& e) {
      s.not_applicable(std::move(entry), e);
    }
  }
  return s;
}

Section viability_section(const AuditContext& ctx) {
  Section s("viability");
  for (std::size_t t = 0; t <= ctx.last_checked_stage(); ++t) {
    const Stage stage = ctx.model.stage(t);
    const PolicyMap policy = policy_map(ctx.model, ctx.table, t, ctx.options.policy_tol);
    Json entry{{"stage", t}};
    try {
      const ViabilityReport lower = check_lower_viability(policy, stage.feasibility, ctx.states[t], ctx.options.viability);
      const ViabilityReport upper = check_upper_viability(policy, stage.feasibility, ctx.states[t], ctx.options.viability);
      entry["lower"] = io::to_json(lower);
      entry["upper"] = io::to_json(upper);
      const bool ok = lower.holds() && upper.holds();
      entry["status"] = ok ? "pass" : "fail";
      const std::string line = std::string("lower ") + to_string(lower.verdict) + ", upper " + to_string(upper.verdict);
      if (ok) {
        s.pass(std::move(entry), line);
      } else {
        s.fail(std::move(entry), line);
      }
    } catch (const EmptyPolicySet& e) {
      entry["status"] = "fail";
      entry["detail"] = e.what();
      s.fail(std::move(entry), std::string("fail, ") + e.what());
    }
  }
  return s;
}

Section subdiff_section(const AuditContext& ctx) {
  Section s("subdiff");
  for (std::size_t t = 0; t <= ctx.last_checked_stage(); ++t) {
    Json entry{{"stage", t}};
    try {
      if (ctx.file.deterministic) {
        const Eigen::VectorXd& x = ctx.states[t];
        const Eigen::VectorXd& y = ctx.states[t + 1];
        const SubdiffBound b = value_subdiff_bound(ctx.model, ctx.table, t, x, y, ctx.options);
        entry["bound"] = io::to_json(b.bound);
        Json audit = Json::array();
        for (const auto& a : b.audit) {
          audit.push_back(Json{{"direction", io::vector_json(a.direction)}, {"estimate", a.estimate},
                               {"support", a.support}, {"ok", a.ok}});
        }
        entry["audit"] = std::move(audit);
        entry["viability"] = io::to_json(b.viability);
        bool ok = b.audit_ok;
        std::string line = std::string("directional audit ") + (b.audit_ok ? "pass" : "fail");
        if (b.bound.is_singleton()) {
          const StrictDiffResult sd = strict_diff_value(ctx.model, ctx.table, t, x, y, ctx.options);
          entry["strict"] = Json{{"gradient", io::vector_json(sd.gradient)},
                                 {"table_gradient", io::vector_json(sd.table_gradient)},
                                 {"tolerance", sd.tolerance},
                                 {"ok", sd.audit_ok}};
          ok = ok && sd.audit_ok;
          line += std::string(", strict gradient ") + (sd.audit_ok ? "pass" : "fail");
        }
        entry["status"] = ok ? "pass" : "fail";
        if (ok) {
          s.pass(std::move(entry), line);
        } else {
          s.fail(std::move(entry), line);
        }
        continue;
      }
      const StochasticDPModel& m = *ctx.file.stochastic;
      const StochasticSubdiff r = stochastic_value_subdiff(m, ctx.model, ctx.table, t, unflatten(m, t, ctx.states[t]),
                                                           unflatten(m, t + 1, ctx.states[t + 1]),
                                                           ctx.stochastic_options);
      Json per_atom = Json::array();
      for (const auto& p : r.per_atom) per_atom.push_back(io::to_json(p));
      entry["per_atom"] = std::move(per_atom);
      entry["viability"] = io::to_json(r.viability);
      std::string line = "per-atom bounds computed";
      if (r.strict) {
        entry["strict"] = Json{{"table_gradient", io::vector_json(r.table_gradient)},
                               {"tolerance", r.tolerance},
                               {"ok", r.audit_ok}};
        line += std::string(", strict gradient ") + (r.audit_ok ? "pass" : "fail");
      }
      entry["status"] = r.audit_ok ? "pass" : "fail";
      if (r.audit_ok) {
        s.pass(std::move(entry), line);
      } else {
        s.fail(std::move(entry), line);
      }
    } catch (const PremiseViolation& e) {
      s.not_applicable(std::move(entry), e);
    }
  }
  return s;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr);
  std::ostringstream out;
  for (unsigned int i = 0; i < length; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

Report cmd_validate(const RunConfig& config) {
  Loaded loaded;
  try {
    loaded = load_model(config.model_path);
  } catch (const InputError& e) {
    return input_error(config, e.what());
  }
  const Validation v = validate_loaded(loaded.file, config.seed);
  Report r;
  r.json = header(config, loaded.digest);
  r.json["model"] = v.json;
  r.json["diagnostics"] = v.errors;
  r.json["notes"] = v.notes;
  r.json["status"] = v.errors.empty() ? "pass" : "fail";
  r.exit_code = v.errors.empty() ? kPass : kCheckFailure;
  std::ostringstream text;
  text << "validate " << config.model_path << " (" << v.json.value("kind", "") << ")\n";
  for (const auto& e : v.errors) text << "  error: " << e << "\n";
  for (const auto& n : v.notes) text << "  note: " << n << "\n";
  text << (v.errors.empty() ? "PASS" : "FAIL") << "\n";
  r.text = text.str();
  return r;
}

Report cmd_solve(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  try {
    const Loaded loaded = load_model(config.model_path);
    const Validation v = validate_loaded(loaded.file, config.seed);
    Report r;
    r.json = header(config, loaded.digest);
    if (!v.errors.empty()) {
      r.exit_code = kCheckFailure;
      r.json["diagnostics"] = v.errors;
      r.json["status"] = "fail";
      r.text = "model does not validate:\n";
      for (const auto& e : v.errors) r.text += "  error: " + e + "\n";
      return r;
    }
    const DPModel m = deterministic_view(loaded.file, config);
    const ValueTable table = solve(m, config);
    if (!config.out_path.empty()) {
      std::ofstream out(config.out_path, std::ios::binary);
      if (!out) throw InputError("cannot write '" + config.out_path + "'");
      out << io::export_table(table);
    }
    double v0_min = std::numeric_limits<double>::infinity();
    std::size_t infeasible = 0;
    for (const auto& v0 : table.values.front()) {
      if (v0.is_finite()) {
        v0_min = std::min(v0_min, v0.value());
      } else {
        ++infeasible;
      }
    }
    r.json["horizon"] = table.horizon;
    r.json["tail_error"] = table.tail_error;
    r.json["interpolation_tolerance"] = table.interpolation_tolerance;
    r.json["v0_min"] = v0_min;
    r.json["v0_infeasible_nodes"] = infeasible;
    r.json["status"] = "pass";
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream text;
    text << "solve " << config.model_path << "\n"
         << "  T_eff = " << table.horizon << "\n"
         << "  tail_error = " << io::format_double(table.tail_error) << "\n"
         << "  min v0 = " << io::format_double(v0_min) << " (" << infeasible << " infeasible nodes)\n"
         << "  time = " << std::fixed << std::setprecision(1) << ms << " ms\n";
    if (!config.out_path.empty()) text << "  table written to " << config.out_path << "\n";
    r.text = text.str();
    return r;
  } catch (const InputError& e) {
    return input_error(config, e.what());
  } catch (const std::invalid_argument& e) {
    return input_error(config, e.what());
  }
}

Report cmd_audit(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  try {
    const Loaded loaded = load_model(config.model_path);
    io::ProgramFile program;
    std::string program_digest;
    try {
      const std::string bytes = io::read_file(config.program_path);
      program_digest = "sha256:" + sha256_hex(bytes);
      program = io::parse_program(bytes);
    } catch (const ParseError& e) {
      throw InputError(config.program_path + ": parse error at " + e.what());
    } catch (const std::exception& e) {
      throw InputError(config.program_path + ": " + e.what());
    }
    const Validation v = validate_loaded(loaded.file, config.seed);
    if (!v.errors.empty()) throw InputError("model does not validate: " + v.errors.front());
    if (program.stochastic != loaded.file.is_stochastic()) {
      throw InputError("program kind does not match the model kind");
    }
    const DPModel m = deterministic_view(loaded.file, config);
    const ValueTable table = solve(m, config);

    std::vector<Eigen::VectorXd> states = program.states;
    if (loaded.file.is_stochastic()) {
      const StochasticDPModel& sm = *loaded.file.stochastic;
      for (std::size_t t = 0; t < program.process.size(); ++t) {
        for (const auto& value : program.process[t]) {
          if (value.size() != sm.grid(t).dim()) {
            throw InputError("program stage " + std::to_string(t) + " has the wrong state dimension");
          }
        }
      }
      const AdaptednessResult adapted = validate_adapted(program.process, sm.tree);
      if (!adapted.ok) throw InputError("adaptedness violation: " + adapted.message);
      for (std::size_t t = 0; t < program.process.size(); ++t) states.push_back(flatten(sm, t, program.process[t]));
    }
    if (states.size() < 2) throw InputError("program needs at least two states");
    for (std::size_t t = 0; t < states.size(); ++t) {
      if (states[t].size() != m.grid(t).dim()) {
        throw InputError("program stage " + std::to_string(t) + " has the wrong state dimension");
      }
    }

    AuditContext ctx{config, loaded.file, m, table, states, check_options(config), {}};
    ctx.stochastic_options.base = ctx.options;
    ctx.stochastic_options.seed = config.seed;

    std::vector<Section> sections;
    try {
      for (const auto& check : config.checks) {
        if (check == "bellman") sections.push_back(bellman_section(ctx));
        if (check == "euler") sections.push_back(euler_section(ctx));
        if (check == "viability") sections.push_back(viability_section(ctx));
        if (check == "subdiff") sections.push_back(subdiff_section(ctx));
      }
    } catch (const InadmissibleProgram& e) {
      throw InputError("inadmissible program at stage " + std::to_string(e.stage()) + ": " + e.what());
    } catch (const AdaptednessViolation& e) {
      throw InputError("adaptedness violation at stage " + std::to_string(e.stage()) + ": " + e.what());
    }

    Report r;
    r.json = header(config, loaded.digest);
    r.json["program_digest"] = program_digest;
    r.json["seed"] = config.seed;
    r.json["options"] = Json{{"tol_active", config.tol_active},   {"tol_face", config.tol_face},
                             {"tol_policy", config.tol_policy},   {"tol_membership", config.tol_membership},
                             {"tol_audit", config.tol_audit},     {"tol_bellman", config.tol_bellman},
                             {"threads", config.threads}};
    if (config.epsilon) r.json["options"]["epsilon"] = *config.epsilon;
    r.json["horizon"] = table.horizon;
    r.json["tail_error"] = table.tail_error;
    Json checks = Json::object();
    bool ok = true;
    std::ostringstream text;
    text << "audit " << config.model_path << " " << config.program_path << "\n";
    text << "  T_eff = " << table.horizon << ", tail_error = " << io::format_double(table.tail_error) << "\n";
    for (const auto& s : sections) {
      checks[s.name] = s.json();
      ok = ok && s.failed == 0;
      text << s.name << ": " << s.status() << "\n" << s.text.str();
    }
    r.json["checks"] = std::move(checks);
    r.json["status"] = ok ? "pass" : "fail";
    r.exit_code = ok ? kPass : kCheckFailure;
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    text << (ok ? "PASS" : "FAIL") << " (" << std::fixed << std::setprecision(1) << ms << " ms)\n";
    r.text = text.str();
    return r;
  } catch (const InputError& e) {
    return input_error(config, e.what());
  } catch (const std::invalid_argument& e) {
    return input_error(config, e.what());
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nonsmooth dynamic programming: validate, solve and audit models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  RunConfig config;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--report", config.report_path, "Write the machine-readable JSON report here");
    sub->add_option("--seed", config.seed, "Seed for sampled diagnostics")->capture_default_str();
    sub->add_option("--threads", config.threads, "Worker threads for solving")->capture_default_str()
        ->check(CLI::PositiveNumber);
  };

  CLI::App* validate = app.add_subcommand("validate", "Check model structure and standing assumptions");
  validate->add_option("model", config.model_path, "Model file (JSON)")->required();
  add_common(validate);

  CLI::App* solve_cmd = app.add_subcommand("solve", "Solve the grid Bellman recursion and export the table");
  solve_cmd->add_option("model", config.model_path, "Model file (JSON)")->required();
  solve_cmd->add_option("--epsilon", config.epsilon, "Truncate the horizon at tail <= epsilon");
  solve_cmd->add_option("--out", config.out_path, "Value table output path")->required();
  add_common(solve_cmd);

  std::string checks = "bellman,euler,viability,subdiff";
  CLI::App* audit = app.add_subcommand("audit", "Check optimality conditions along a program");
  audit->add_option("model", config.model_path, "Model file (JSON)")->required();
  audit->add_option("program", config.program_path, "Program file (JSON)")->required();
  audit->add_option("--checks", checks, "Comma-separated subset of bellman,euler,viability,subdiff")
      ->capture_default_str();
  audit->add_option("--epsilon", config.epsilon, "Truncate the horizon at tail <= epsilon");
  audit->add_option("--tol-active", config.tol_active, "Active-branch tolerance")->capture_default_str();
  audit->add_option("--tol-face", config.tol_face, "Active-face tolerance")->capture_default_str();
  audit->add_option("--tol-policy", config.tol_policy, "Policy tie tolerance")->capture_default_str();
  audit->add_option("--tol-membership", config.tol_membership, "Membership residual and margin")
      ->capture_default_str();
  audit->add_option("--tol-audit", config.tol_audit, "Finite-difference audit tolerance")->capture_default_str();
  audit->add_option("--tol-bellman", config.tol_bellman, "Bellman residual tolerance")->capture_default_str();
  add_common(audit);

  std::vector<std::string> argv_storage{"nsdp"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kPass : kInputError;
  }

  Report report;
  try {
  if (validate->parsed()) {
    config.command = "validate";
    report = cmd_validate(config);
  } else if (solve_cmd->parsed()) {
    config.command = "solve";
    report = cmd_solve(config);
  } else {
    config.command = "audit";
    config.checks.clear();
    std::stringstream list(checks);
    std::string item;
    const std::set<std::string> known{"bellman", "euler", "viability", "subdiff"};
    while (std::getline(list, item, ',')) {
      if (!known.count(item)) {
        err << "unknown check '" << item << "'\n";
        return kInputError;
      }
      config.checks.push_back(item);
    }
    report = cmd_audit(config);
  }
  } catch (const std::exception& e) {
    report = input_error(config, e.what());
  }

  (report.exit_code == kInputError ? err : out) << report.text;
  if (!config.report_path.empty()) {
    std::ofstream file(config.report_path, std::ios::binary);
    if (!file) {
      err << "cannot write report '" << config.report_path << "'\n";
      return kInputError;
    }
    file << report.json.dump(2) << "\n";
  }
  return report.exit_code;
}

}  // namespace nsdp::cli
