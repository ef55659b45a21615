#include "nsdp/dp.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "nsdp/errors.hpp"

namespace nsdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool lexicographic_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

// Feasible grid nodes of the successor grid, plus (optionally) l1
// projections of the infeasible ones onto Gamma_t(x) that land inside the
// successor grid box. Sorted and exactly deduplicated.
std::vector<Eigen::VectorXd> candidate_actions(const FeasibilitySet& gamma, const Grid& next,
                                               const Eigen::VectorXd& x, const SolveOptions& options) {
  std::vector<Eigen::VectorXd> candidates;
  for (std::size_t j = 0; j < next.size(); ++j) {
    Eigen::VectorXd y = next.node(j);
    if (feasible(gamma, x, y, options.feasibility_tol)) {
      candidates.push_back(std::move(y));
    } else if (options.candidates == CandidateMode::grid_and_projections) {
      auto p = project_l1(gamma, x, y);
      if (!p) return {};  // Gamma_t(x) is empty
      if (next.contains(*p) && feasible(gamma, x, *p, options.feasibility_tol)) {
        candidates.push_back(p->cwiseMax(next.lower()).cwiseMin(next.upper()));
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(), lexicographic_less);
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  return candidates;
}

struct NodeResult {
  StageValue value = StageValue::infeasible();
  std::vector<Eigen::VectorXd> argmin;
};

NodeResult minimize_at(const Stage& stage, const Grid& next_grid, const std::vector<StageValue>& next_values,
                       const Eigen::VectorXd& x, const SolveOptions& options) {
  NodeResult result;
  const auto candidates = candidate_actions(stage.feasibility, next_grid, x, options);
  std::vector<double> totals(candidates.size(), kInf);
  double best = kInf;
  Eigen::VectorXd xy(x.size() + next_grid.dim());
  xy.head(x.size()) = x;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto continuation = interpolate(next_grid, next_values, candidates[k]);
    if (!continuation) continue;
    xy.tail(next_grid.dim()) = candidates[k];
    totals[k] = stage.cost.evaluate(xy) + *continuation;
    best = std::min(best, totals[k]);
  }
  if (!std::isfinite(best)) return result;
  result.value = StageValue::finite(best);
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (totals[k] <= best + options.policy_tol) result.argmin.push_back(candidates[k]);
  }
  return result;
}

double stage_tolerance(const Grid& grid, const std::vector<StageValue>& values) {
  double q = 0.0;
  double scale = 0.0;
  for (const auto& v : values) {
    if (v.is_finite()) scale = std::max(scale, std::abs(v.value()));
  }
  for (std::size_t index = 0; index < grid.size(); ++index) {
    if (!values[index].is_finite()) continue;
    const auto multi = grid.multi_index(index);
    for (std::size_t d = 0; d < grid.axes().size(); ++d) {
      const auto& axis = grid.axes()[d];
      const std::size_t i = multi[d];
      if (i == 0 || i + 1 >= axis.size()) continue;
      auto neighbour = multi;
      neighbour[d] = i - 1;
      const StageValue& left = values[grid.flat_index(neighbour)];
      neighbour[d] = i + 1;
      const StageValue& right = values[grid.flat_index(neighbour)];
      if (!left.is_finite() || !right.is_finite()) continue;
      const double h_left = axis[i] - axis[i - 1];
      const double h_right = axis[i + 1] - axis[i];
      const double second = ((right.value() - values[index].value()) / h_right -
                             (values[index].value() - left.value()) / h_left) /
                            (h_left + h_right);
      q = std::max(q, std::abs(second));
    }
  }
  const double dx = grid.max_spacing();
  return 2.0 * q * dx * dx + 1e-12 * (1.0 + scale);
}

std::size_t resolve_horizon(const DPModel& model, const SolveOptions& options, double& tail) {
  tail = 0.0;
  std::size_t horizon = 0;
  if (options.horizon_override) {
    horizon = *options.horizon_override;
    if (model.horizon.mode == HorizonMode::truncated && model.bounds) tail = model.bounds->tail_after(horizon);
  } else if (model.horizon.mode == HorizonMode::finite) {
    horizon = model.stages.size() - 1;
  } else {
    const SummabilityResult summability = check_summability(model);
    if (!summability.ok) throw ModelError("summability: " + summability.message);
    horizon = summability.horizon;
    tail = summability.tail;
  }
  const auto last = model.last_stage();
  if (last && horizon > *last) {
    throw ModelError("horizon " + std::to_string(horizon) + " exceeds the " +
                     std::to_string(model.stages.size()) + " supplied stages and no tail extension is given");
  }
  return horizon;
}

}  // namespace

BoundSequence::BoundSequence(std::vector<BoundTerm> terms) : terms_(std::move(terms)) {
  for (const auto& term : terms_) {
    if (!(term.prefix >= 0.0) || !(term.ratio >= 0.0) || !std::isfinite(term.prefix) ||
        !std::isfinite(term.ratio)) {
      throw ModelError("bound terms need finite nonnegative prefix and ratio");
    }
  }
}

double BoundSequence::at(std::size_t t) const {
  double total = 0.0;
  for (const auto& term : terms_) total += term.prefix * std::pow(term.ratio, static_cast<double>(t));
  return total;
}

bool BoundSequence::summable() const {
  return std::all_of(terms_.begin(), terms_.end(),
                     [](const BoundTerm& term) { return term.prefix == 0.0 || term.ratio < 1.0; });
}

double BoundSequence::tail_after(std::size_t T) const {
  double total = 0.0;
  for (const auto& term : terms_) {
    if (term.prefix == 0.0) continue;
    if (term.ratio >= 1.0) return kInf;
    total += term.prefix * std::pow(term.ratio, static_cast<double>(T + 1)) / (1.0 - term.ratio);
  }
  return total;
}

BoundSequence BoundSequence::scaled(double factor) const {
  std::vector<BoundTerm> terms = terms_;
  for (auto& term : terms) term.prefix *= factor;
  return BoundSequence(std::move(terms));
}

BoundSequence BoundSequence::operator+(const BoundSequence& other) const {
  std::vector<BoundTerm> terms = terms_;
  terms.insert(terms.end(), other.terms_.begin(), other.terms_.end());
  return BoundSequence(std::move(terms));
}

Stage DPModel::stage(std::size_t t) const {
  if (t < stages.size()) return stages[t];
  if (!tail || stages.empty()) {
    throw ModelError("stage " + std::to_string(t) + " requested beyond the supplied stages");
  }
  const Stage& last = stages.back();
  const double factor = std::pow(tail->discount, static_cast<double>(t - stages.size() + 1));
  return Stage{last.grid, last.feasibility, Expr::scale(factor, last.cost)};
}

const Grid& DPModel::grid(std::size_t t) const {
  if (t < stages.size()) return stages[t].grid;
  if (t == stages.size() && terminal_grid) return *terminal_grid;
  if (t == stages.size() || tail) return stages.back().grid;
  throw ModelError("grid of stage " + std::to_string(t) + " requested beyond the model");
}

std::optional<std::size_t> DPModel::last_stage() const {
  if (tail) return std::nullopt;
  return stages.size() - 1;
}

void validate_model(const DPModel& model) {
  if (model.stages.empty()) throw ModelError("model has no stages");
  for (std::size_t t = 0; t < model.stages.size(); ++t) {
    const Stage& s = model.stages[t];
    const Eigen::Index n = s.grid.dim();
    const Eigen::Index m = model.grid(t + 1).dim();
    const std::string where = "stage " + std::to_string(t) + ": ";
    if (s.feasibility.state_dim() != n) {
      throw ModelError(where + "feasibility state dimension does not match the grid");
    }
    if (s.feasibility.action_dim() != m) {
      throw ModelError(where + "feasibility action dimension does not match the next stage's grid");
    }
    if (s.cost.input_dim() != n + m) {
      throw ModelError(where + "cost input dimension must be state dim + action dim");
    }
  }
  if (model.tail) {
    if (!(model.tail->discount >= 0.0)) throw ModelError("tail discount must be nonnegative");
    const Grid& last = model.stages.back().grid;
    if (model.grid(model.stages.size()).axes() != last.axes()) {
      throw ModelError("tail extension needs the terminal grid to equal the last stage's grid");
    }
  }
  if (model.horizon.mode == HorizonMode::truncated) {
    if (!model.bounds) throw ModelError("truncated horizon requires cost bounds");
    if (!(model.horizon.epsilon > 0.0)) throw ModelError("truncation epsilon must be positive");
  }
}

SummabilityResult check_summability(const BoundSequence& bounds, double epsilon) {
  SummabilityResult result;
  if (!bounds.summable()) {
    result.message = "cost bounds are not summable (a term has ratio >= 1)";
    std::size_t stage = 0;
    for (const auto& term : bounds.terms()) {
      if (term.prefix > 0.0 && term.ratio >= 1.0) break;
      ++stage;
    }
    result.message += "; offending bound term " + std::to_string(stage);
    result.tail = kInf;
    return result;
  }
  constexpr std::size_t kMaxHorizon = 1u << 20;
  for (std::size_t T = 0; T < kMaxHorizon; ++T) {
    const double tail = bounds.tail_after(T);
    if (tail <= epsilon) {
      result.ok = true;
      result.horizon = T;
      result.tail = tail;
      return result;
    }
  }
  result.message = "tail does not fall below epsilon within 2^20 stages";
  result.tail = bounds.tail_after(kMaxHorizon);
  return result;
}

SummabilityResult check_summability(const DPModel& model) {
  if (!model.bounds) {
    SummabilityResult result;
    result.message = "no cost bounds supplied";
    return result;
  }
  return check_summability(*model.bounds, model.horizon.epsilon);
}

std::optional<double> ValueTable::interpolate(std::size_t t, const Eigen::VectorXd& x) const {
  if (t >= grids.size()) throw std::out_of_range("value table: stage out of range");
  return nsdp::interpolate(grids[t], values[t], x);
}

ValueTable solve_value(const DPModel& model, const SolveOptions& options) {
  validate_model(model);
  ValueTable table;
  table.options = options;
  table.horizon = resolve_horizon(model, options, table.tail_error);
  const std::size_t H = table.horizon;

  table.grids.resize(H + 2);
  table.values.resize(H + 2);
  table.policies.resize(H + 1);
  table.interpolation_tolerance.assign(H + 2, 0.0);
  for (std::size_t t = 0; t <= H + 1; ++t) table.grids[t] = model.grid(t);
  table.values[H + 1].assign(table.grids[H + 1].size(), StageValue::finite(0.0));

  const unsigned threads = std::max(1u, options.threads);
  for (std::size_t t = H + 1; t-- > 0;) {
    const Stage stage = model.stage(t);
    const Grid& grid = table.grids[t];
    const Grid& next_grid = table.grids[t + 1];
    const auto& next_values = table.values[t + 1];
    std::vector<NodeResult> results(grid.size());

    auto work = [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        results[i] = minimize_at(stage, next_grid, next_values, grid.node(i), options);
      }
    };
    if (threads == 1 || grid.size() < 2 * threads) {
      work(0, grid.size());
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(threads);
      const std::size_t chunk = (grid.size() + threads - 1) / threads;
      for (unsigned k = 0; k < threads; ++k) {
        const std::size_t begin = std::min(grid.size(), k * chunk);
        const std::size_t end = std::min(grid.size(), begin + chunk);
        pool.emplace_back([&, k, begin, end] {
          try {
            work(begin, end);
          } catch (...) {
            errors[k] = std::current_exception();
          }
        });
      }
      for (auto& thread : pool) thread.join();
      for (auto& error : errors) {
        if (error) std::rethrow_exception(error);
      }
    }

    table.values[t].reserve(grid.size());
    table.policies[t].reserve(grid.size());
    bool any_finite = false;
    for (auto& r : results) {
      any_finite = any_finite || r.value.is_finite();
      table.values[t].push_back(r.value);
      table.policies[t].push_back(std::move(r.argmin));
    }
    if (!any_finite) {
      throw AllInfeasibleStage(t, "stage " + std::to_string(t) + ": no grid node admits a feasible continuation");
    }
  }
  for (std::size_t t = 0; t <= H + 1; ++t) {
    table.interpolation_tolerance[t] = stage_tolerance(table.grids[t], table.values[t]);
  }
  return table;
}

Lookahead bellman_lookahead(const DPModel& model, const ValueTable& table, std::size_t t,
                            const Eigen::VectorXd& x) {
  if (t > table.horizon) throw std::out_of_range("lookahead: stage beyond the solved horizon");
  const Stage stage = model.stage(t);
  if (x.size() != stage.grid.dim()) throw DimensionMismatch("lookahead: state dimension mismatch");
  NodeResult r = minimize_at(stage, table.grids[t + 1], table.values[t + 1], x, table.options);
  return {r.value, std::move(r.argmin)};
}

Polytope extract_policy(const DPModel& model, const ValueTable& table, std::size_t t,
                        const Eigen::VectorXd& x, double tol) {
  SolveOptions options = table.options;
  options.policy_tol = tol;
  if (t > table.horizon) throw std::out_of_range("extract_policy: stage beyond the solved horizon");
  const Stage stage = model.stage(t);
  if (x.size() != stage.grid.dim()) throw DimensionMismatch("extract_policy: state dimension mismatch");
  NodeResult r = minimize_at(stage, table.grids[t + 1], table.values[t + 1], x, options);
  if (r.argmin.empty()) throw EmptyPolicySet("no feasible action with a finite continuation");
  return Polytope(std::move(r.argmin));
}

bool is_policy_point(const DPModel& model, const ValueTable& table, std::size_t t,
                     const Eigen::VectorXd& x, const Eigen::VectorXd& y, double tol) {
  const Stage stage = model.stage(t);
  if (!feasible(stage.feasibility, x, y, table.options.feasibility_tol)) return false;
  const auto continuation = table.interpolate(t + 1, y);
  if (!continuation) return false;
  const Lookahead best = bellman_lookahead(model, table, t, x);
  if (!best.value.is_finite()) return false;
  return stage.cost.evaluate(join(x, y)) + *continuation <= best.value.value() + tol;
}

PolicyMap policy_map(const DPModel& model, const ValueTable& table, std::size_t t, double tol) {
  return [&model, &table, t, tol](const Eigen::VectorXd& x) -> std::optional<Polytope> {
    try {
      return extract_policy(model, table, t, x, tol);
    } catch (const EmptyPolicySet&) {
      return std::nullopt;
    }
  };
}

std::vector<double> bellman_residual(const DPModel& model, const ValueTable& table,
                                     const std::vector<Eigen::VectorXd>& program) {
  if (program.empty()) throw std::invalid_argument("bellman_residual: empty program");
  const std::size_t steps = program.size() - 1;
  if (steps > table.horizon + 1) {
    throw InadmissibleProgram(table.horizon + 1, "program is longer than the solved horizon");
  }
  std::vector<double> residuals;
  for (std::size_t t = 0; t < steps; ++t) {
    const Stage stage = model.stage(t);
    const Eigen::VectorXd& x = program[t];
    const Eigen::VectorXd& y = program[t + 1];
    if (x.size() != stage.grid.dim() || y.size() != table.grids[t + 1].dim()) {
      throw InadmissibleProgram(t, "stage " + std::to_string(t) + ": state dimension mismatch");
    }
    if (!feasible(stage.feasibility, x, y, table.options.feasibility_tol)) {
      throw InadmissibleProgram(t, "stage " + std::to_string(t) + ": next state violates the feasibility set");
    }
    const auto continuation = table.interpolate(t + 1, y);
    if (!continuation) {
      throw InadmissibleProgram(t, "stage " + std::to_string(t) + ": next state has no finite value on the grid");
    }
    const Lookahead best = bellman_lookahead(model, table, t, x);
    if (!best.value.is_finite()) {
      throw InadmissibleProgram(t, "stage " + std::to_string(t) + ": state has no finite value");
    }
    residuals.push_back(best.value.value() - stage.cost.evaluate(join(x, y)) - *continuation);
  }
  return residuals;
}

Eigen::VectorXd join(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  Eigen::VectorXd xy(x.size() + y.size());
  xy.head(x.size()) = x;
  xy.tail(y.size()) = y;
  return xy;
}

Expr partial_in_x(const Expr& cost, Eigen::Index state_dim, const Eigen::VectorXd& y) {
  return Expr::bind(cost, state_dim, y);
}

Expr partial_in_y(const Expr& cost, Eigen::Index, const Eigen::VectorXd& x) {
  return Expr::bind(cost, 0, x);
}

}  // namespace nsdp
