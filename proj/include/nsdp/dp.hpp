#pragma once

// Staged deterministic DP: grid Bellman solving under summable cost bounds,
// policy extraction, and the value-subdifferential and Euler-inclusion
// checks.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "nsdp/clarke.hpp"
#include "nsdp/convex.hpp"
#include "nsdp/expr.hpp"
#include "nsdp/feasibility.hpp"
#include "nsdp/grid.hpp"

namespace nsdp {

struct Stage {
  Grid grid;                    // states of this stage
  FeasibilitySet feasibility;   // Gamma_t: state -> actions (= next states)
  Expr cost;                    // u_t over (x, y), x first
};

// b_t = sum_k prefix_k * ratio_k^t.
struct BoundTerm {
  double prefix = 0.0;
  double ratio = 0.0;
};

class BoundSequence {
 public:
  BoundSequence() = default;
  explicit BoundSequence(std::vector<BoundTerm> terms);
  static BoundSequence geometric(double prefix, double ratio) { return BoundSequence({{prefix, ratio}}); }

  const std::vector<BoundTerm>& terms() const { return terms_; }
  double at(std::size_t t) const;
  bool summable() const;
  // sum_{t > T} b_t; +inf when divergent.
  double tail_after(std::size_t T) const;
  // Termwise b_t scaled by `factor`.
  BoundSequence scaled(double factor) const;
  BoundSequence operator+(const BoundSequence& other) const;

 private:
  std::vector<BoundTerm> terms_;
};

enum class HorizonMode { finite, truncated };

struct Horizon {
  HorizonMode mode = HorizonMode::finite;
  double epsilon = 1e-6;  // truncated only
};

// Stages past the supplied list repeat the last stage with its cost scaled by
// discount^k, k = 1, 2, ... Requires a stationary last stage.
struct TailExtension {
  double discount = 1.0;
};

struct DPModel {
  std::vector<Stage> stages;
  // States after the last supplied stage. Defaults to the last stage's grid.
  std::optional<Grid> terminal_grid;
  Horizon horizon;
  std::optional<BoundSequence> bounds;
  std::optional<TailExtension> tail;

  // Stage t, synthesizing tail stages when needed.
  Stage stage(std::size_t t) const;
  const Grid& grid(std::size_t t) const;
  std::size_t supplied_stages() const { return stages.size(); }
  // Largest stage index that exists (infinite with a tail extension).
  std::optional<std::size_t> last_stage() const;
};

// Throws ModelError on inconsistent dimensions.
void validate_model(const DPModel& model);

struct SummabilityResult {
  bool ok = false;
  std::size_t horizon = 0;  // T_eff
  double tail = 0.0;
  std::string message;
};

// Least T with sum_{t > T} b_t <= epsilon.
SummabilityResult check_summability(const BoundSequence& bounds, double epsilon);
SummabilityResult check_summability(const DPModel& model);

enum class CandidateMode { grid_only, grid_and_projections };

struct SolveOptions {
  CandidateMode candidates = CandidateMode::grid_and_projections;
  double feasibility_tol = 1e-9;
  double policy_tol = 1e-9;
  // Replaces the horizon (index of the last solved stage).
  std::optional<std::size_t> horizon_override;
  unsigned threads = 1;
};

struct ValueTable {
  // grids[t], values[t] for t = 0 .. horizon + 1; the last entry is the zero
  // terminal value.
  std::vector<Grid> grids;
  std::vector<std::vector<StageValue>> values;
  // policies[t][node]: every candidate action within policy_tol of the
  // minimum, for t = 0 .. horizon.
  std::vector<std::vector<std::vector<Eigen::VectorXd>>> policies;
  // Per-stage audit tolerance 2 q dx^2 (q: largest local quadratic
  // coefficient of the stage's values, dx: largest spacing).
  std::vector<double> interpolation_tolerance;
  std::size_t horizon = 0;
  double tail_error = 0.0;
  SolveOptions options;

  std::optional<double> interpolate(std::size_t t, const Eigen::VectorXd& x) const;
};

ValueTable solve_value(const DPModel& model, const SolveOptions& options = {});

struct Lookahead {
  StageValue value = StageValue::infeasible();
  std::vector<Eigen::VectorXd> argmin;
};

// min over candidate actions y of u_t(x, y) + v~_{t+1}(y) at an arbitrary x.
Lookahead bellman_lookahead(const DPModel& model, const ValueTable& table, std::size_t t,
                            const Eigen::VectorXd& x);

// Candidate actions within tol of the lookahead minimum. Throws
// EmptyPolicySet when no feasible candidate has a finite continuation.
Polytope extract_policy(const DPModel& model, const ValueTable& table, std::size_t t,
                        const Eigen::VectorXd& x, double tol = 1e-9);

// y is feasible and u_t(x, y) + v~_{t+1}(y) <= lookahead(x) + tol.
bool is_policy_point(const DPModel& model, const ValueTable& table, std::size_t t,
                     const Eigen::VectorXd& x, const Eigen::VectorXd& y, double tol = 1e-9);

PolicyMap policy_map(const DPModel& model, const ValueTable& table, std::size_t t, double tol = 1e-9);

// residual_t = lookahead_t(x_t) - u_t(x_t, x_{t+1}) - v~_{t+1}(x_{t+1}).
// Throws InadmissibleProgram at the first infeasible or off-grid step.
std::vector<double> bellman_residual(const DPModel& model, const ValueTable& table,
                                     const std::vector<Eigen::VectorXd>& program);

struct CheckOptions {
  double active_tol = kDefaultActiveTol;
  double face_tol = kDefaultFaceTol;
  double policy_tol = 1e-9;
  ViabilityOptions viability;
  MembershipTolerances membership;
  double audit_tol = 1e-6;
  double fd_step = 1e-7;
};

struct DirectionalAudit {
  Eigen::VectorXd direction;
  double estimate = 0.0;  // finite-difference generalized directional derivative
  double support = 0.0;
  bool ok = false;
};

struct SubdiffBound {
  GradientPolytope bound;
  std::vector<DirectionalAudit> audit;
  ViabilityReport viability;
  bool audit_ok = false;
};

// Partial Clarke gradient of u_t in x at (x_bar, y_bar), a superset of the
// Clarke gradient of v_t at x_bar. Premises (PremiseViolation on failure):
// "policy_point", "regularity", "upper_viability".
SubdiffBound value_subdiff_bound(const DPModel& model, const ValueTable& table, std::size_t t,
                                 const Eigen::VectorXd& x_bar, const Eigen::VectorXd& y_bar,
                                 const CheckOptions& options = {});

struct StrictDiffResult {
  Eigen::VectorXd gradient;
  Eigen::VectorXd table_gradient;  // finite differences of the value table
  double tolerance = 0.0;
  bool audit_ok = false;
};

// Premises as value_subdiff_bound plus "singleton_partial_gradient".
StrictDiffResult strict_diff_value(const DPModel& model, const ValueTable& table, std::size_t t,
                                   const Eigen::VectorXd& x_bar, const Eigen::VectorXd& y_bar,
                                   const CheckOptions& options = {});

// |grad_y u_t(x_bar, y_bar) + grad v~_{t+1}(y_bar)| with the table gradient
// taken by finite differences. Premises: "interiority", "smooth_cost".
double interior_stationarity_check(const DPModel& model, const ValueTable& table, std::size_t t,
                                   const Eigen::VectorXd& x_bar, const Eigen::VectorXd& y_bar,
                                   const CheckOptions& options = {});

// Finite-difference gradient of the interpolated table at x using the
// neighbouring breakpoints on each axis.
Eigen::VectorXd table_gradient(const ValueTable& table, std::size_t t, const Eigen::VectorXd& x);

struct EulerCertificate {
  std::size_t stage = 0;
  Eigen::VectorXd x_bar, y_bar, z_bar;
  GradientPolytope cost_y;       // partial gradient of u_t in y at (x_bar, y_bar)
  GradientPolytope next_cost_x;  // partial gradient of u_{t+1} in x at (y_bar, z_bar)
  PolyhedralCone normal;         // normal cone of Gamma_t(x_bar) at y_bar
  MembershipCertificate membership;
  double residual_l1 = 0.0;
  bool y_on_policy = false;
  std::vector<ViabilityReport> viability;

  bool member() const { return membership.is_member(); }
};

// 0 in cost_y + next_cost_x + normal. Premises (PremiseViolation):
// "feasibility", "regularity", "next_policy_point", "upper_viability".
// Whether y_bar is itself a policy point is recorded, not required.
EulerCertificate euler_check(const DPModel& model, const ValueTable& table, std::size_t t,
                             const Eigen::VectorXd& x_bar, const Eigen::VectorXd& y_bar,
                             const Eigen::VectorXd& z_bar, const CheckOptions& options = {});

// Partial applications of a stage cost over (x, y).
Expr partial_in_x(const Expr& cost, Eigen::Index state_dim, const Eigen::VectorXd& y);
Expr partial_in_y(const Expr& cost, Eigen::Index state_dim, const Eigen::VectorXd& x);
Eigen::VectorXd join(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

}  // namespace nsdp
