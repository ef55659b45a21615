#include <algorithm>
#include <cmath>
#include <limits>

#include "nsdp/dp.hpp"
#include "nsdp/errors.hpp"

namespace nsdp {

namespace {

std::string join_trace(const RegularityReport& report) {
  std::string out;
  for (const auto& line : report.trace) {
    if (!out.empty()) out += "; ";
    out += line;
  }
  return out;
}

void require_regular(const Expr& cost, const Eigen::VectorXd& point, double active_tol, const std::string& what) {
  const RegularityReport report = is_regular(cost, point, active_tol);
  if (!report.regular()) throw PremiseViolation("regularity", what + " is not certified regular: " + join_trace(report));
}

void require_stage(const ValueTable& table, std::size_t t) {
  if (t > table.horizon) throw std::out_of_range("stage " + std::to_string(t) + " is beyond the solved horizon");
}

ViabilityReport require_upper_viability(const DPModel& model, const ValueTable& table, std::size_t t,
                                        const Eigen::VectorXd& x_bar, const CheckOptions& options) {
  const Stage stage = model.stage(t);
  ViabilityReport report;
  try {
    report = check_upper_viability(policy_map(model, table, t, options.policy_tol), stage.feasibility, x_bar,
                                   options.viability);
  } catch (const EmptyPolicySet& e) {
    throw PremiseViolation("upper_viability", "stage " + std::to_string(t) + ": " + e.what());
  }
  if (!report.holds()) {
    throw PremiseViolation("upper_viability", "policy set of stage " + std::to_string(t) +
                                                  " leaves the feasibility set near the base state");
  }
  return report;
}

// Shared premise gate of the value-function theorems.
ViabilityReport value_premises(const DPModel& model, const ValueTable& table, std::size_t t,
                               const Eigen::VectorXd& x_bar, const Eigen::VectorXd& y_bar,
                               const CheckOptions& options) {
  require_stage(table, t);
  if (!is_policy_point(model, table, t, x_bar, y_bar, options.policy_tol)) {
    throw PremiseViolation("policy_point", "the action is not a Bellman minimizer at the base state");
  }
  require_regular(model.stage(t).cost, join(x_bar, y_bar), options.active_tol, "stage cost");
  return require_upper_viability(model, table, t, x_bar, options);
}

}  // namespace

SubdiffBound value_subdiff_bound(const DPModel& model, const ValueTable& table, std::size_t t,
                                 const Eigen::VectorXd& x_bar, const Eigen::VectorXd& y_bar,
                                 const CheckOptions& options) {
  SubdiffBound result{Polytope::point(Eigen::VectorXd::Zero(x_bar.size())), {}, {}, true};
  result.viability = value_premises(model, table, t, x_bar, y_bar, options);
  const Stage stage = model.stage(t);
  result.bound = clarke_gradient(partial_in_x(stage.cost, x_bar.size(), y_bar), x_bar, options.active_tol);

  auto value_at = [&](const Eigen::VectorXd& x) -> std::optional<double> {
    const Lookahead l = bellman_lookahead(model, table, t, x);
    if (!l.value.is_finite()) return std::nullopt;
    return l.value.value();
  };
  const double theta = options.fd_step;
  for (Eigen::Index i = 0; i < x_bar.size(); ++i) {
    for (double sign : {1.0, -1.0}) {
      DirectionalAudit audit;
      audit.direction = Eigen::VectorXd::Zero(x_bar.size());
      audit.direction(i) = sign;
      audit.support = result.bound.support(audit.direction);
      audit.estimate = -std::numeric_limits<double>::infinity();
      bool any = false;
      for (const Eigen::VectorXd& base : {Eigen::VectorXd(x_bar), Eigen::VectorXd(x_bar - theta * audit.direction)}) {
        const auto a = value_at(base);
        const auto b = value_at(base + theta * audit.direction);
        if (!a || !b) continue;
        audit.estimate = std::max(audit.estimate, (*b - *a) / theta);
        any = true;
      }
      audit.ok = any && audit.estimate <= audit.support + options.audit_tol;
      result.audit_ok = result.audit_ok && audit.ok;
      result.audit.push_back(std::move(audit));
    }
  }
  return result;
}

Eigen::VectorXd table_gradient(const ValueTable& table, std::size_t t, const Eigen::VectorXd& x) {
  const Grid& grid = table.grids.at(t);
  if (x.size() != grid.dim()) throw DimensionMismatch("table_gradient: dimension mismatch");
  Eigen::VectorXd gradient(x.size());
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const auto& axis = grid.axes()[static_cast<std::size_t>(d)];
    const double v = x(d);
    auto above = std::upper_bound(axis.begin(), axis.end(), v);
    auto below = std::lower_bound(axis.begin(), axis.end(), v);
    const double hi = above == axis.end() ? std::min(v, axis.back()) : *above;
    const double lo = below == axis.begin() ? std::max(v, axis.front()) : *(below - 1);
    if (!(hi > lo)) {
      gradient(d) = 0.0;
      continue;
    }
    Eigen::VectorXd a = x, b = x;
    a(d) = lo;
    b(d) = hi;
    const auto fa = table.interpolate(t, a);
    const auto fb = table.interpolate(t, b);
    gradient(d) = fa && fb ? (*fb - *fa) / (hi - lo) : std::numeric_limits<double>::quiet_NaN();
  }
  return gradient;
}

StrictDiffResult strict_diff_value(const DPModel& model, const ValueTable& table, std::size_t t,
                                   const Eigen::VectorXd& x_bar, const Eigen::VectorXd& y_bar,
                                   const CheckOptions& options) {
  value_premises(model, table, t, x_bar, y_bar, options);
  const Stage stage = model.stage(t);
  const GradientPolytope partial =
      clarke_gradient(partial_in_x(stage.cost, x_bar.size(), y_bar), x_bar, options.active_tol);
  if (!partial.is_singleton()) {
    throw PremiseViolation("singleton_partial_gradient",
                           "partial Clarke gradient has " + std::to_string(partial.size()) + " generators");
  }
  StrictDiffResult result;
  result.gradient = partial.generators().front();
  result.table_gradient = table_gradient(table, t, x_bar);
  result.tolerance = 10.0 * table.interpolation_tolerance[t];
  result.audit_ok = result.table_gradient.allFinite() &&
                    (result.table_gradient - result.gradient).lpNorm<Eigen::Infinity>() <= result.tolerance;
  return result;
}

double interior_stationarity_check(const DPModel& model, const ValueTable& table, std::size_t t,
                                   const Eigen::VectorXd& x_bar, const Eigen::VectorXd& y_bar,
                                   const CheckOptions& options) {
  require_stage(table, t);
  const Stage stage = model.stage(t);
  const Eigen::VectorXd slack = stage.feasibility.slack(x_bar, y_bar);
  for (Eigen::Index i = 0; i < slack.size(); ++i) {
    if (slack(i) >= -options.face_tol * stage.feasibility.A().row(i).norm()) {
      throw PremiseViolation("interiority", "constraint row " + std::to_string(i) + " is active or violated");
    }
  }
  const Eigen::VectorXd xy = join(x_bar, y_bar);
  if (!locally_smooth(stage.cost, xy, options.active_tol)) {
    throw PremiseViolation("smooth_cost", "stage cost is not locally smooth at the point");
  }
  const GradientPolytope grad_y =
      clarke_gradient(partial_in_y(stage.cost, x_bar.size(), x_bar), y_bar, options.active_tol);
  const Eigen::VectorXd next = table_gradient(table, t + 1, y_bar);
  return (grad_y.generators().front() + next).norm();
}

EulerCertificate euler_check(const DPModel& model, const ValueTable& table, std::size_t t,
                             const Eigen::VectorXd& x_bar, const Eigen::VectorXd& y_bar,
                             const Eigen::VectorXd& z_bar, const CheckOptions& options) {
  require_stage(table, t);
  const Stage stage = model.stage(t);
  const Eigen::Index n = x_bar.size();
  const Eigen::Index m = y_bar.size();
  if (n != stage.grid.dim() || m != stage.feasibility.action_dim()) {
    throw DimensionMismatch("euler_check: point dimensions do not match stage " + std::to_string(t));
  }
  std::optional<PolyhedralCone> normal;
  try {
    normal = normal_cone(stage.feasibility, x_bar, y_bar, options.face_tol);
  } catch (const InfeasiblePoint& e) {
    throw PremiseViolation("feasibility", std::string("the action violates the feasibility set: ") + e.what());
  }
  require_regular(stage.cost, join(x_bar, y_bar), options.active_tol, "stage " + std::to_string(t) + " cost");
  const bool has_next = t + 1 <= table.horizon;
  std::optional<Stage> next;
  if (has_next) {
    next = model.stage(t + 1);
    require_regular(next->cost, join(y_bar, z_bar), options.active_tol,
                    "stage " + std::to_string(t + 1) + " cost");
    if (!is_policy_point(model, table, t + 1, y_bar, z_bar, options.policy_tol)) {
      throw PremiseViolation("next_policy_point", "the next action is not a Bellman minimizer at the action");
    }
  }

  EulerCertificate cert{t,
                        x_bar,
                        y_bar,
                        z_bar,
                        clarke_gradient(partial_in_y(stage.cost, n, x_bar), y_bar, options.active_tol),
                        Polytope::point(Eigen::VectorXd::Zero(m)),
                        *normal,
                        {},
                        0.0,
                        is_policy_point(model, table, t, x_bar, y_bar, options.policy_tol),
                        {}};
  cert.viability.push_back(require_upper_viability(model, table, t, x_bar, options));
  if (has_next) {
    cert.viability.push_back(require_upper_viability(model, table, t + 1, y_bar, options));
    cert.next_cost_x = clarke_gradient(partial_in_x(next->cost, m, z_bar), y_bar, options.active_tol);
  }
  const Polytope parts[] = {cert.cost_y, cert.next_cost_x};
  cert.membership = contains_zero(parts, cert.normal, options.membership);
  cert.residual_l1 = distance_to_origin(parts, cert.normal, 1e6);
  return cert;
}

}  // namespace nsdp
