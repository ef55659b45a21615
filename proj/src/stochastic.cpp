#include "nsdp/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "nsdp/errors.hpp"
#include "nsdp/sampling.hpp"

namespace nsdp {

namespace {

std::string describe_cell(const Cell& cell) {
  std::ostringstream out;
  out << "{";
  for (std::size_t i = 0; i < cell.size(); ++i) out << (i ? "," : "") << cell[i];
  out << "}";
  return out.str();
}

bool bitwise_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (!(a(i) == b(i))) return false;
  }
  return true;
}

std::set<std::set<std::size_t>> as_sets(const Partition& p) {
  std::set<std::set<std::size_t>> out;
  for (const auto& cell : p) out.insert(std::set<std::size_t>(cell.begin(), cell.end()));
  return out;
}

// Stage data, synthesizing tail stages.
std::vector<Expr> stage_costs(const StochasticDPModel& model, std::size_t t) {
  if (t < model.stages.size()) return model.stages[t].costs;
  if (!model.tail) throw ModelError("stage " + std::to_string(t) + " requested beyond the supplied stages");
  const double factor = std::pow(model.tail->discount, static_cast<double>(t - model.stages.size() + 1));
  std::vector<Expr> costs;
  for (const auto& c : model.stages.back().costs) costs.push_back(Expr::scale(factor, c));
  return costs;
}

const std::vector<FeasibilitySet>& stage_sets(const StochasticDPModel& model, std::size_t t) {
  if (t < model.stages.size()) return model.stages[t].feasibility;
  if (!model.tail) throw ModelError("stage " + std::to_string(t) + " requested beyond the supplied stages");
  return model.stages.back().feasibility;
}

void require_measurable(const std::vector<Eigen::VectorXd>& values, const ScenarioTree& tree, long info,
                        std::size_t stage, const char* what) {
  const AdaptednessResult r = check_measurable(values, tree, info, stage);
  if (!r.ok) throw AdaptednessViolation(stage, std::string(what) + ": " + r.message);
}

std::string join_trace(const RegularityReport& report) {
  std::string out;
  for (const auto& line : report.trace) out += (out.empty() ? "" : "; ") + line;
  return out;
}

void require_regular_atom(const Expr& cost, const Eigen::VectorXd& point, double tol, std::size_t stage,
                          std::size_t atom) {
  const RegularityReport r = is_regular(cost, point, tol);
  if (!r.regular()) {
    throw PremiseViolation("regularity", "stage " + std::to_string(stage) + " cost of atom " +
                                             std::to_string(atom) + " is not certified regular: " + join_trace(r));
  }
}

ViabilityReport require_reduced_viability(const DPModel& reduced, const ValueTable& table, std::size_t t,
                                          const Eigen::VectorXd& x, const CheckOptions& options) {
  ViabilityReport report;
  try {
    report = check_upper_viability(policy_map(reduced, table, t, options.policy_tol), reduced.stage(t).feasibility,
                                   x, options.viability);
  } catch (const EmptyPolicySet& e) {
    throw PremiseViolation("upper_viability", "reduced stage " + std::to_string(t) + ": " + e.what());
  }
  if (!report.holds()) {
    throw PremiseViolation("upper_viability", "reduced policy set of stage " + std::to_string(t) +
                                                  " leaves the feasibility set near the base state");
  }
  return report;
}

}  // namespace

const Partition& ScenarioTree::partition(long t) const {
  if (partitions.empty()) throw ModelError("scenario tree has no partitions");
  if (t < 0) return partitions.front();
  if (static_cast<std::size_t>(t) >= partitions.size()) return partitions.back();
  return partitions[static_cast<std::size_t>(t)];
}

std::size_t ScenarioTree::cell_of(long t, std::size_t atom) const {
  const Partition& p = partition(t);
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (std::find(p[c].begin(), p[c].end(), atom) != p[c].end()) return c;
  }
  throw ModelError("atom " + std::to_string(atom) + " is in no cell of partition " + std::to_string(t));
}

Diagnostics validate_tree(const ScenarioTree& tree) {
  Diagnostics d;
  const std::size_t n = tree.atoms();
  if (n == 0) d.messages.push_back("tree has no atoms");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = tree.probabilities[i];
    if (!std::isfinite(mu) || !(mu > 0.0)) {
      d.messages.push_back("atom " + std::to_string(i) + " has non-positive probability");
    }
    total += mu;
  }
  if (n > 0 && !(std::abs(total - 1.0) <= 1e-12)) {
    std::ostringstream out;
    out.precision(17);
    out << "probabilities sum to " << total << ", not 1";
    d.messages.push_back(out.str());
  }
  if (tree.partitions.empty()) d.messages.push_back("tree has no partitions");
  for (std::size_t t = 0; t < tree.partitions.size(); ++t) {
    std::vector<int> seen(n, 0);
    for (const auto& cell : tree.partitions[t]) {
      if (cell.empty()) d.messages.push_back("partition " + std::to_string(t) + " has an empty cell");
      for (std::size_t atom : cell) {
        if (atom >= n) {
          d.messages.push_back("partition " + std::to_string(t) + " names unknown atom " + std::to_string(atom));
        } else {
          ++seen[atom];
        }
      }
    }
    for (std::size_t a = 0; a < n; ++a) {
      if (seen[a] != 1) {
        d.messages.push_back("partition " + std::to_string(t) + ": atom " + std::to_string(a) + " appears " +
                             std::to_string(seen[a]) + " times");
      }
    }
  }
  if (!d.ok()) return d;
  for (std::size_t t = 0; t + 1 < tree.partitions.size(); ++t) {
    for (const auto& fine : tree.partitions[t + 1]) {
      const std::size_t parent = tree.cell_of(static_cast<long>(t), fine.front());
      const Cell& coarse = tree.partitions[t][parent];
      for (std::size_t atom : fine) {
        if (std::find(coarse.begin(), coarse.end(), atom) == coarse.end()) {
          d.messages.push_back("refinement violated at stage " + std::to_string(t + 1) + ": cell " +
                               describe_cell(fine) + " is not inside a cell of partition " + std::to_string(t));
          break;
        }
      }
    }
  }
  return d;
}

AdaptednessResult check_measurable(const std::vector<Eigen::VectorXd>& values, const ScenarioTree& tree,
                                   long information_stage, std::size_t stage_label) {
  AdaptednessResult r;
  r.stage = stage_label;
  if (values.size() != tree.atoms()) {
    r.ok = false;
    r.message = "stage " + std::to_string(stage_label) + " has " + std::to_string(values.size()) +
                " atom values, expected " + std::to_string(tree.atoms());
    return r;
  }
  for (const auto& cell : tree.partition(information_stage)) {
    for (std::size_t k = 1; k < cell.size(); ++k) {
      if (!bitwise_equal(values[cell.front()], values[cell[k]])) {
        r.ok = false;
        r.cell = cell;
        r.first_atom = cell.front();
        r.second_atom = cell[k];
        r.first_value = values[cell.front()];
        r.second_value = values[cell[k]];
        r.message = "stage " + std::to_string(stage_label) + " is not constant on cell " + describe_cell(cell) +
                    " (atoms " + std::to_string(cell.front()) + " and " + std::to_string(cell[k]) + " differ)";
        return r;
      }
    }
  }
  return r;
}

AdaptednessResult validate_adapted(const AdaptedProcess& process, const ScenarioTree& tree) {
  for (std::size_t t = 0; t < process.size(); ++t) {
    AdaptednessResult r = check_measurable(process[t], tree, static_cast<long>(t) - 1, t);
    if (!r.ok) return r;
  }
  return {};
}

const Grid& StochasticDPModel::grid(std::size_t t) const {
  if (t < stages.size()) return stages[t].grid;
  if (t == stages.size() && terminal_grid) return *terminal_grid;
  if (t == stages.size() || tail) return stages.back().grid;
  throw ModelError("grid of stage " + std::to_string(t) + " requested beyond the model");
}

Diagnostics validate_stochastic_model(const StochasticDPModel& model) {
  Diagnostics d = validate_tree(model.tree);
  if (!d.ok()) return d;
  const std::size_t n = model.tree.atoms();
  if (model.stages.empty()) d.messages.push_back("model has no stages");
  for (std::size_t t = 0; t < model.stages.size(); ++t) {
    const StochasticStage& s = model.stages[t];
    const std::string where = "stage " + std::to_string(t) + ": ";
    if (s.costs.size() != n || s.feasibility.size() != n) {
      d.messages.push_back(where + "needs one cost and one feasibility set per atom");
      continue;
    }
    const Eigen::Index e = s.grid.dim();
    const Eigen::Index e_next = model.grid(t + 1).dim();
    for (std::size_t a = 0; a < n; ++a) {
      if (s.costs[a].input_dim() != e + e_next) {
        d.messages.push_back(where + "cost of atom " + std::to_string(a) + " has the wrong input dimension");
      }
      if (s.feasibility[a].state_dim() != e || s.feasibility[a].action_dim() != e_next) {
        d.messages.push_back(where + "feasibility set of atom " + std::to_string(a) + " has the wrong dimensions");
      }
    }
    for (const auto& cell : model.tree.partition(static_cast<long>(t))) {
      for (std::size_t k = 1; k < cell.size(); ++k) {
        if (!structurally_equal(s.costs[cell.front()], s.costs[cell[k]])) {
          d.messages.push_back(where + "cost differs within cell " + describe_cell(cell));
          break;
        }
        if (!(s.feasibility[cell.front()] == s.feasibility[cell[k]])) {
          d.messages.push_back(where + "feasibility set differs within cell " + describe_cell(cell));
          break;
        }
      }
    }
  }
  if (!model.atom_bounds.empty() && model.atom_bounds.size() != n) {
    d.messages.push_back("bounds: per_atom needs one entry per atom");
  }
  if (!model.alpha.empty() && model.alpha.size() != n) d.messages.push_back("bounds: alpha needs one entry per atom");
  if (!model.lipschitz.empty()) {
    if (model.lipschitz.size() != model.stages.size()) {
      d.messages.push_back("bounds: lipschitz needs one row per stage");
    } else {
      for (const auto& row : model.lipschitz) {
        if (row.size() != n) {
          d.messages.push_back("bounds: lipschitz rows need one entry per atom");
          break;
        }
      }
    }
  }
  if (model.horizon.mode == HorizonMode::truncated && model.atom_bounds.empty()) {
    d.messages.push_back("truncated horizon requires per-atom cost bounds");
  }
  if (model.tail && !model.stages.empty()) {
    const long last = static_cast<long>(model.stages.size()) - 1;
    if (as_sets(model.tree.partition(last - 1)) != as_sets(model.tree.partition(last))) {
      d.messages.push_back("tail extension needs the last two partitions to coincide");
    }
    if (!(model.grid(model.stages.size()) == model.stages.back().grid)) {
      d.messages.push_back("tail extension needs the terminal grid to equal the last stage's grid");
    }
  }
  if (!(model.p >= 1.0)) d.messages.push_back("p must lie in [1, inf]");
  return d;
}

DPModel reduce_to_deterministic(const StochasticDPModel& model) {
  const Diagnostics d = validate_stochastic_model(model);
  if (!d.ok()) throw ModelError(d.messages.front());
  const ScenarioTree& tree = model.tree;
  const std::size_t n = tree.atoms();

  auto reduced_grid = [&](std::size_t t) {
    const Grid& g = model.grid(t);
    std::vector<std::vector<double>> axes;
    for (std::size_t c = 0; c < tree.partition(static_cast<long>(t) - 1).size(); ++c) {
      axes.insert(axes.end(), g.axes().begin(), g.axes().end());
    }
    return Grid(std::move(axes));
  };

  DPModel out;
  out.horizon = model.horizon;
  out.tail = model.tail;
  for (std::size_t t = 0; t < model.stages.size(); ++t) {
    const StochasticStage& s = model.stages[t];
    const long info = static_cast<long>(t);
    const Eigen::Index e = s.grid.dim();
    const Eigen::Index e_next = model.grid(t + 1).dim();
    const Eigen::Index state_cells = static_cast<Eigen::Index>(tree.partition(info - 1).size());
    const Eigen::Index action_cells = static_cast<Eigen::Index>(tree.partition(info).size());
    const Eigen::Index state_dim = e * state_cells;
    const Eigen::Index action_dim = e_next * action_cells;

    std::vector<SetBlock> blocks;
    for (std::size_t c = 0; c < tree.partition(info).size(); ++c) {
      const std::size_t atom = tree.partition(info)[c].front();
      const auto parent = static_cast<Eigen::Index>(tree.cell_of(info - 1, atom));
      blocks.push_back({s.feasibility[atom], parent * e, static_cast<Eigen::Index>(c) * e_next});
    }

    std::vector<Expr> terms;
    for (std::size_t atom = 0; atom < n; ++atom) {
      const auto sc = static_cast<Eigen::Index>(tree.cell_of(info - 1, atom));
      const auto ac = static_cast<Eigen::Index>(tree.cell_of(info, atom));
      std::vector<Eigen::Index> indices;
      for (Eigen::Index i = 0; i < e; ++i) indices.push_back(sc * e + i);
      for (Eigen::Index i = 0; i < e_next; ++i) indices.push_back(state_dim + ac * e_next + i);
      terms.push_back(Expr::scale(tree.probabilities[atom],
                                  Expr::select(s.costs[atom], std::move(indices), state_dim + action_dim)));
    }
    out.stages.push_back(Stage{reduced_grid(t), assemble_blocks(state_dim, action_dim, blocks), Expr::sum(std::move(terms))});
  }
  out.terminal_grid = reduced_grid(model.stages.size());
  if (!model.atom_bounds.empty()) {
    BoundSequence total;
    for (std::size_t atom = 0; atom < n; ++atom) {
      total = total + model.atom_bounds[atom].scaled(tree.probabilities[atom]);
    }
    out.bounds = total;
  }
  return out;
}

Eigen::VectorXd flatten(const StochasticDPModel& model, std::size_t t, const std::vector<Eigen::VectorXd>& values) {
  const Partition& cells = model.tree.partition(static_cast<long>(t) - 1);
  const Eigen::Index e = model.grid(t).dim();
  if (values.size() != model.tree.atoms()) throw DimensionMismatch("flatten: one value per atom required");
  Eigen::VectorXd flat(e * static_cast<Eigen::Index>(cells.size()));
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const Eigen::VectorXd& v = values[cells[c].front()];
    if (v.size() != e) throw DimensionMismatch("flatten: value dimension mismatch");
    flat.segment(static_cast<Eigen::Index>(c) * e, e) = v;
  }
  return flat;
}

std::vector<Eigen::VectorXd> unflatten(const StochasticDPModel& model, std::size_t t, const Eigen::VectorXd& flat) {
  const Eigen::Index e = model.grid(t).dim();
  const long info = static_cast<long>(t) - 1;
  if (flat.size() != e * static_cast<Eigen::Index>(model.tree.partition(info).size())) {
    throw DimensionMismatch("unflatten: vector size does not match the cell blocks");
  }
  std::vector<Eigen::VectorXd> values;
  for (std::size_t atom = 0; atom < model.tree.atoms(); ++atom) {
    values.push_back(flat.segment(static_cast<Eigen::Index>(model.tree.cell_of(info, atom)) * e, e));
  }
  return values;
}

double integral_cost(const StochasticDPModel& model, std::size_t t, const std::vector<Eigen::VectorXd>& f,
                     const std::vector<Eigen::VectorXd>& g) {
  require_measurable(f, model.tree, static_cast<long>(t) - 1, t, "state");
  require_measurable(g, model.tree, static_cast<long>(t), t + 1, "action");
  const auto costs = stage_costs(model, t);
  double total = 0.0;
  for (std::size_t atom = 0; atom < model.tree.atoms(); ++atom) {
    total += model.tree.probabilities[atom] * costs[atom].evaluate(join(f[atom], g[atom]));
  }
  return total;
}

double stochastic_objective(const StochasticDPModel& model, const AdaptedProcess& process) {
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < process.size(); ++t) total += integral_cost(model, t, process[t], process[t + 1]);
  return total;
}

IntegralSubdiff integral_subdiff(const StochasticDPModel& model, std::size_t t,
                                 const std::vector<Eigen::VectorXd>& f, const std::vector<Eigen::VectorXd>& g,
                                 Block block, const StochasticCheckOptions& options) {
  const long info = static_cast<long>(t);
  require_measurable(f, model.tree, info - 1, t, "state");
  require_measurable(g, model.tree, info, t + 1, "action");
  const auto costs = stage_costs(model, t);
  const std::size_t n = model.tree.atoms();
  const double tol = options.base.active_tol;

  IntegralSubdiff result;
  for (std::size_t atom = 0; atom < n; ++atom) {
    const Eigen::VectorXd point = join(f[atom], g[atom]);
    require_regular_atom(costs[atom], point, tol, t, atom);
    const Eigen::Index e = f[atom].size();
    result.per_atom.push_back(block == Block::x
                                  ? clarke_gradient(partial_in_x(costs[atom], e, g[atom]), f[atom], tol)
                                  : clarke_gradient(partial_in_y(costs[atom], e, f[atom]), g[atom], tol));
  }

  const DPModel reduced = reduce_to_deterministic(model);
  const Expr u = reduced.stage(t).cost;
  const Eigen::VectorXd F = flatten(model, t, f);
  const Eigen::VectorXd G = flatten(model, t + 1, g);
  const Eigen::VectorXd base = join(F, G);
  const double u0 = u.evaluate(base);
  const double theta = options.base.fd_step;
  const long direction_info = block == Block::x ? info - 1 : info;
  const Eigen::Index e = block == Block::x ? F.size() / static_cast<Eigen::Index>(model.tree.partition(info - 1).size())
                                           : G.size() / static_cast<Eigen::Index>(model.tree.partition(info).size());
  Rng rng(options.seed);
  result.audit.ok = true;
  for (std::size_t k = 0; k < options.audit_directions; ++k) {
    const Partition& cells = model.tree.partition(direction_info);
    std::vector<Eigen::VectorXd> h(n);
    for (const auto& cell : cells) {
      const Eigen::VectorXd v = rng.uniform_vector(e, -1.0, 1.0);
      for (std::size_t atom : cell) h[atom] = v;
    }
    double weighted = 0.0;
    for (std::size_t atom = 0; atom < n; ++atom) {
      weighted += model.tree.probabilities[atom] * result.per_atom[atom].support(h[atom]);
    }
    Eigen::VectorXd shifted = base;
    if (block == Block::x) {
      shifted.head(F.size()) += theta * flatten(model, t, h);
    } else {
      shifted.tail(G.size()) += theta * flatten(model, t + 1, h);
    }
    const double fd = (u.evaluate(shifted) - u0) / theta;
    const double error = std::abs(fd - weighted);
    result.audit.samples.emplace_back(fd, weighted);
    result.audit.max_error = std::max(result.audit.max_error, error);
    result.audit.ok = result.audit.ok && error <= options.base.audit_tol;
  }
  return result;
}

SelectionNormals selection_normal_cone(const StochasticDPModel& model, std::size_t t,
                                       const std::vector<Eigen::VectorXd>& f,
                                       const std::vector<Eigen::VectorXd>& g,
                                       const StochasticCheckOptions& options) {
  const long info = static_cast<long>(t);
  require_measurable(f, model.tree, info - 1, t, "state");
  require_measurable(g, model.tree, info, t + 1, "action");
  const auto& sets = stage_sets(model, t);
  SelectionNormals result;
  for (std::size_t atom = 0; atom < model.tree.atoms(); ++atom) {
    result.per_atom.push_back(normal_cone(sets[atom], f[atom], g[atom], options.base.face_tol));
  }

  const DPModel reduced = reduce_to_deterministic(model);
  const FeasibilitySet& product = reduced.stage(t).feasibility;
  const Eigen::VectorXd F = flatten(model, t, f);
  const Eigen::VectorXd G = flatten(model, t + 1, g);
  const PolyhedralCone reduced_cone = normal_cone(product, F, G, options.base.face_tol);
  const Eigen::Index e_next = g.front().size();
  std::vector<Eigen::VectorXd> mapped;
  for (std::size_t atom = 0; atom < model.tree.atoms(); ++atom) {
    const auto cell = static_cast<Eigen::Index>(model.tree.cell_of(info, atom));
    for (const auto& ray : result.per_atom[atom].rays()) {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(G.size());
      r.segment(cell * e_next, e_next) = model.tree.probabilities[atom] * ray;
      mapped.push_back(std::move(r));
    }
  }
  const PolyhedralCone mapped_cone(G.size(), mapped);
  result.audit_ok = true;
  for (const auto& r : mapped_cone.rays()) result.audit_ok = result.audit_ok && cone_contains(reduced_cone, r);
  for (const auto& r : reduced_cone.rays()) result.audit_ok = result.audit_ok && cone_contains(mapped_cone, r);
  return result;
}

StochasticSubdiff stochastic_value_subdiff(const StochasticDPModel& model, const DPModel& reduced,
                                           const ValueTable& table, std::size_t t,
                                           const std::vector<Eigen::VectorXd>& f,
                                           const std::vector<Eigen::VectorXd>& g,
                                           const StochasticCheckOptions& options) {
  const long info = static_cast<long>(t);
  require_measurable(f, model.tree, info - 1, t, "state");
  require_measurable(g, model.tree, info, t + 1, "action");
  if (t > table.horizon) throw std::out_of_range("stage beyond the solved horizon");
  const CheckOptions& base = options.base;
  const Eigen::VectorXd F = flatten(model, t, f);
  const Eigen::VectorXd G = flatten(model, t + 1, g);
  if (!is_policy_point(reduced, table, t, F, G, base.policy_tol)) {
    throw PremiseViolation("policy_point", "the action is not a Bellman minimizer of the reduced model");
  }
  const auto costs = stage_costs(model, t);
  for (std::size_t atom = 0; atom < model.tree.atoms(); ++atom) {
    require_regular_atom(costs[atom], join(f[atom], g[atom]), base.active_tol, t, atom);
  }
  StochasticSubdiff result;
  result.viability = require_reduced_viability(reduced, table, t, F, base);

  bool singleton = true;
  for (std::size_t atom = 0; atom < model.tree.atoms(); ++atom) {
    const Eigen::Index e = f[atom].size();
    result.per_atom.push_back(clarke_gradient(partial_in_x(costs[atom], e, g[atom]), f[atom], base.active_tol));
    singleton = singleton && result.per_atom.back().is_singleton();
  }
  if (!singleton) return result;

  std::vector<Eigen::VectorXd> strict;
  Eigen::VectorXd euclidean = Eigen::VectorXd::Zero(F.size());
  const Eigen::Index e = f.front().size();
  for (std::size_t atom = 0; atom < model.tree.atoms(); ++atom) {
    strict.push_back(result.per_atom[atom].generators().front());
    const auto cell = static_cast<Eigen::Index>(model.tree.cell_of(info - 1, atom));
    euclidean.segment(cell * e, e) += model.tree.probabilities[atom] * strict.back();
  }
  result.strict = std::move(strict);
  result.table_gradient = table_gradient(table, t, F);
  result.tolerance = 10.0 * table.interpolation_tolerance[t];
  result.audit_ok = result.table_gradient.allFinite() &&
                    (result.table_gradient - euclidean).lpNorm<Eigen::Infinity>() <= result.tolerance;
  return result;
}

bool StochasticEuler::member() const {
  return std::all_of(atoms.begin(), atoms.end(), [](const AtomEuler& a) { return a.membership.is_member(); });
}

StochasticEuler stochastic_euler_check(const StochasticDPModel& model, const DPModel& reduced,
                                       const ValueTable& table, std::size_t t,
                                       const std::vector<Eigen::VectorXd>& f,
                                       const std::vector<Eigen::VectorXd>& g,
                                       const std::vector<Eigen::VectorXd>& next,
                                       const StochasticCheckOptions& options) {
  const long info = static_cast<long>(t);
  if (t > table.horizon) throw std::out_of_range("stage beyond the solved horizon");
  const bool has_next = t + 1 <= table.horizon;
  require_measurable(f, model.tree, info - 1, t, "state");
  require_measurable(g, model.tree, info, t + 1, "action");
  if (has_next) require_measurable(next, model.tree, info + 1, t + 2, "next action");
  const CheckOptions& base = options.base;
  const std::size_t n = model.tree.atoms();
  const auto costs = stage_costs(model, t);
  const auto& sets = stage_sets(model, t);

  StochasticEuler result;
  result.stage = t;
  std::vector<PolyhedralCone> normals;
  for (std::size_t atom = 0; atom < n; ++atom) {
    try {
      normals.push_back(normal_cone(sets[atom], f[atom], g[atom], base.face_tol));
    } catch (const InfeasiblePoint& e) {
      throw PremiseViolation("feasibility", "atom " + std::to_string(atom) + ": " + e.what());
    }
    require_regular_atom(costs[atom], join(f[atom], g[atom]), base.active_tol, t, atom);
  }
  std::vector<Expr> next_costs;
  if (has_next) {
    next_costs = stage_costs(model, t + 1);
    for (std::size_t atom = 0; atom < n; ++atom) {
      require_regular_atom(next_costs[atom], join(g[atom], next[atom]), base.active_tol, t + 1, atom);
    }
  }

  const Eigen::VectorXd F = flatten(model, t, f);
  const Eigen::VectorXd G = flatten(model, t + 1, g);
  if (has_next) {
    const Eigen::VectorXd Z = flatten(model, t + 2, next);
    if (!is_policy_point(reduced, table, t + 1, G, Z, base.policy_tol)) {
      throw PremiseViolation("next_policy_point", "the next action is not a Bellman minimizer of the reduced model");
    }
  }
  result.viability.push_back(require_reduced_viability(reduced, table, t, F, base));
  if (has_next) result.viability.push_back(require_reduced_viability(reduced, table, t + 1, G, base));
  result.y_on_policy = is_policy_point(reduced, table, t, F, G, base.policy_tol);

  for (std::size_t atom = 0; atom < n; ++atom) {
    const Eigen::Index e = f[atom].size();
    const Eigen::Index e_next = g[atom].size();
    AtomEuler entry{atom,
                    clarke_gradient(partial_in_y(costs[atom], e, f[atom]), g[atom], base.active_tol),
                    Polytope::point(Eigen::VectorXd::Zero(e_next)),
                    normals[atom],
                    {},
                    0.0};
    if (has_next) {
      entry.next_cost_x = clarke_gradient(partial_in_x(next_costs[atom], e_next, next[atom]), g[atom], base.active_tol);
    }
    const Polytope parts[] = {entry.cost_y, entry.next_cost_x};
    entry.membership = contains_zero(parts, entry.normal, base.membership);
    entry.residual_l1 = distance_to_origin(parts, entry.normal, 1e6);
    result.atoms.push_back(std::move(entry));
  }
  return result;
}

AssumptionReport check_assumptions(const StochasticDPModel& model, std::uint64_t seed, std::size_t samples) {
  AssumptionReport report;
  report.structure = validate_stochastic_model(model);
  for (const auto& m : report.structure.messages) report.messages.push_back(m);
  const std::size_t n = model.tree.atoms();
  bool ok = report.structure.ok();

  if (model.atom_bounds.size() != n) {
    report.notes.push_back("no per-atom cost bounds supplied; envelope not checked");
  } else {
    for (std::size_t atom = 0; atom < n; ++atom) {
      const BoundSequence& b = model.atom_bounds[atom];
      const double sum = b.summable() ? b.at(0) + b.tail_after(0) : std::numeric_limits<double>::infinity();
      report.bound_sums.push_back(sum);
      bool atom_ok = std::isfinite(sum);
      if (!atom_ok) {
        report.messages.push_back("atom " + std::to_string(atom) + ": cost bounds are not summable");
      } else if (model.alpha.size() == n) {
        atom_ok = sum <= model.alpha[atom] * (1.0 + 1e-12) + 1e-15;
        if (!atom_ok) {
          std::ostringstream out;
          out.precision(17);
          out << "atom " << atom << ": bound sum " << sum << " exceeds alpha " << model.alpha[atom];
          report.messages.push_back(out.str());
        }
      } else {
        if (atom == 0) report.notes.push_back("no alpha supplied; envelope not checked");
      }
      report.envelope_ok.push_back(atom_ok);
      ok = ok && atom_ok;
    }
  }

  if (report.structure.ok()) {
    constexpr double kStep = 1e-6;
    for (std::size_t t = 0; t < model.stages.size(); ++t) {
      const Grid& here = model.grid(t);
      const Grid& there = model.grid(t + 1);
      const Eigen::VectorXd lower = join(here.lower(), there.lower());
      const Eigen::VectorXd upper = join(here.upper(), there.upper());
      for (const auto& cell : model.tree.partition(static_cast<long>(t))) {
        const Expr& cost = model.stages[t].costs[cell.front()];
        HaltonSequence halton(static_cast<std::size_t>(lower.size()), seed + t);
        double estimate = 0.0;
        for (std::size_t s = 0; s < samples; ++s) {
          const Eigen::VectorXd z = lower + (upper - lower).cwiseProduct(halton.next());
          const double fz = cost.evaluate(z);
          for (Eigen::Index i = 0; i < z.size(); ++i) {
            Eigen::VectorXd w = z;
            w(i) = z(i) + kStep <= upper(i) ? z(i) + kStep : z(i) - kStep;
            estimate = std::max(estimate, std::abs(cost.evaluate(w) - fz) / kStep);
          }
        }
        for (std::size_t atom : cell) {
          LipschitzEstimate le{t, atom, estimate, std::nullopt, false};
          if (!model.lipschitz.empty()) {
            le.declared = model.lipschitz[t][atom];
            le.falsified = estimate > *le.declared + 1e-6 * std::max(1.0, *le.declared);
            if (le.falsified) {
              report.messages.push_back("stage " + std::to_string(t) + " atom " + std::to_string(atom) +
                                        ": declared Lipschitz constant is below a sampled difference quotient");
              ok = false;
            }
          }
          report.lipschitz.push_back(le);
        }
      }
    }
  }
  std::sort(report.lipschitz.begin(), report.lipschitz.end(), [](const auto& a, const auto& b) {
    return a.stage != b.stage ? a.stage < b.stage : a.atom < b.atom;
  });
  report.ok = ok;
  return report;
}

}  // namespace nsdp
