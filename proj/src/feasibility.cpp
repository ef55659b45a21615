#include "nsdp/feasibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nsdp/errors.hpp"
#include "nsdp/lp.hpp"
#include "nsdp/sampling.hpp"

namespace nsdp {

namespace {

void require_sizes(const FeasibilitySet& S, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != S.state_dim() || y.size() != S.action_dim()) {
    throw DimensionMismatch("feasibility set: expected state dim " + std::to_string(S.state_dim()) +
                            " and action dim " + std::to_string(S.action_dim()) + ", got " +
                            std::to_string(x.size()) + " and " + std::to_string(y.size()));
  }
}

std::vector<Eigen::Index> active_rows(const FeasibilitySet& S, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& y, double active_tol) {
  require_sizes(S, x, y);
  const Eigen::VectorXd s = S.slack(x, y);
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    const double scaled = active_tol * S.A().row(i).norm();
    if (s(i) > scaled) {
      throw InfeasiblePoint("point violates constraint row " + std::to_string(i) + " by " +
                            std::to_string(s(i)));
    }
    if (s(i) >= -scaled) active.push_back(i);
  }
  return active;
}

// l1 projection LP: min sum(e+ + e-) s.t. A z <= rhs, z - e+ + e- = point.
std::optional<lp::Solution> projection_lp(const FeasibilitySet& S, const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& point) {
  const Eigen::Index n = S.action_dim();
  const Eigen::VectorXd rhs = S.rhs(x);
  lp::LinearProgram program;
  for (Eigen::Index j = 0; j < n; ++j) program.add_variable(0.0, -lp::LinearProgram::kInf);
  for (Eigen::Index j = 0; j < 2 * n; ++j) program.add_variable(1.0);
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    std::vector<std::pair<std::size_t, double>> terms;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (S.A()(i, j) != 0.0) terms.emplace_back(static_cast<std::size_t>(j), S.A()(i, j));
    }
    program.add_constraint(std::move(terms), lp::Relation::less_equal, rhs(i));
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    program.add_constraint({{static_cast<std::size_t>(j), 1.0},
                            {static_cast<std::size_t>(n + j), -1.0},
                            {static_cast<std::size_t>(2 * n + j), 1.0}},
                           lp::Relation::equal, point(j));
  }
  lp::Solution solution = program.solve();
  if (solution.status != lp::Status::optimal) return std::nullopt;
  return solution;
}

}  // namespace

FeasibilitySet FeasibilitySet::box(Eigen::VectorXd lower, Eigen::VectorXd upper, Eigen::Index state_dim) {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw DimensionMismatch("box: lower and upper must be nonempty and of equal size");
  }
  if (!lower.allFinite() || !upper.allFinite()) throw ModelError("box: bounds must be finite");
  if ((lower.array() > upper.array()).any()) throw ModelError("box: lower bound exceeds upper bound");
  if (state_dim < 0) throw DimensionMismatch("box: negative state dimension");
  const Eigen::Index n = lower.size();
  FeasibilitySet S;
  S.kind_ = SetKind::box;
  S.A_.resize(2 * n, n);
  S.A_ << Eigen::MatrixXd::Identity(n, n), -Eigen::MatrixXd::Identity(n, n);
  S.b_.resize(2 * n);
  S.b_ << upper, -lower;
  S.C_ = Eigen::MatrixXd::Zero(2 * n, state_dim);
  S.lower_ = std::move(lower);
  S.upper_ = std::move(upper);
  return S;
}

FeasibilitySet FeasibilitySet::polyhedral(Eigen::MatrixXd A, Eigen::VectorXd b, Eigen::MatrixXd C) {
  if (A.rows() != b.size() || C.rows() != A.rows()) {
    throw DimensionMismatch("polyhedral set: A, b and C must have the same number of rows");
  }
  if (A.cols() == 0) throw DimensionMismatch("polyhedral set: action dimension must be positive");
  if (!A.allFinite() || !b.allFinite() || !C.allFinite()) {
    throw ModelError("polyhedral set: entries must be finite");
  }
  FeasibilitySet S;
  S.kind_ = SetKind::polyhedral;
  S.A_ = std::move(A);
  S.b_ = std::move(b);
  S.C_ = std::move(C);
  return S;
}

Eigen::VectorXd FeasibilitySet::rhs(const Eigen::VectorXd& x) const {
  if (x.size() != state_dim()) throw DimensionMismatch("feasibility set: state dimension mismatch");
  if (C_.cols() == 0) return b_;
  return b_ + C_ * x;
}

Eigen::VectorXd FeasibilitySet::slack(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  require_sizes(*this, x, y);
  return A_ * y - rhs(x);
}

bool FeasibilitySet::operator==(const FeasibilitySet& other) const {
  return kind_ == other.kind_ && A_.rows() == other.A_.rows() && A_.cols() == other.A_.cols() &&
         C_.cols() == other.C_.cols() && A_ == other.A_ && b_ == other.b_ && C_ == other.C_;
}

bool feasible(const FeasibilitySet& S, const Eigen::VectorXd& x, const Eigen::VectorXd& y, double tol) {
  require_sizes(S, x, y);
  if (S.rows() == 0) return true;
  return S.slack(x, y).maxCoeff() <= tol;
}

PolyhedralCone normal_cone(const FeasibilitySet& S, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                           double active_tol) {
  std::vector<Eigen::VectorXd> rays;
  for (Eigen::Index i : active_rows(S, x, y, active_tol)) rays.push_back(S.A().row(i).transpose());
  return PolyhedralCone(S.action_dim(), std::move(rays));
}

FeasibilitySet tangent_cone(const FeasibilitySet& S, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                            double active_tol) {
  const auto active = active_rows(S, x, y, active_tol);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(active.size()), S.action_dim());
  for (std::size_t k = 0; k < active.size(); ++k) A.row(static_cast<Eigen::Index>(k)) = S.A().row(active[k]);
  return FeasibilitySet::polyhedral(std::move(A), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(active.size())),
                                    Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(active.size()), 0));
}

std::optional<double> distance_l1(const FeasibilitySet& S, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& point) {
  require_sizes(S, x, point);
  if (S.kind() == SetKind::box) {
    return (point - point.cwiseMax(S.lower()).cwiseMin(S.upper())).lpNorm<1>();
  }
  const auto solution = projection_lp(S, x, point);
  if (!solution) return std::nullopt;
  return std::max(0.0, solution->objective);
}

std::optional<Eigen::VectorXd> project_l1(const FeasibilitySet& S, const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& point) {
  require_sizes(S, x, point);
  if (S.kind() == SetKind::box) return Eigen::VectorXd(point.cwiseMax(S.lower()).cwiseMin(S.upper()));
  const auto solution = projection_lp(S, x, point);
  if (!solution) return std::nullopt;
  return Eigen::VectorXd(solution->values.head(S.action_dim()));
}

bool is_empty(const FeasibilitySet& S, const Eigen::VectorXd& x) {
  if (S.kind() == SetKind::box) return false;
  return !project_l1(S, x, Eigen::VectorXd::Zero(S.action_dim())).has_value();
}

bool contingent_probe(const FeasibilitySet& S, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& h, const std::vector<double>& theta_grid) {
  active_rows(S, x, y, kDefaultFaceTol);
  if (h.size() != S.action_dim()) throw DimensionMismatch("contingent_probe: direction dimension mismatch");
  double best = std::numeric_limits<double>::infinity();
  for (double theta : theta_grid) {
    if (!(theta > 0.0)) throw std::invalid_argument("contingent_probe: theta must be positive");
    const auto d = distance_l1(S, x, y + theta * h);
    if (d) best = std::min(best, *d / theta);
  }
  return best <= 1e-6;
}

FeasibilitySet assemble_blocks(Eigen::Index state_dim, Eigen::Index action_dim,
                               const std::vector<SetBlock>& blocks) {
  Eigen::Index rows = 0;
  bool all_boxes = true;
  std::vector<int> coverage(static_cast<std::size_t>(action_dim), 0);
  for (const auto& block : blocks) {
    const FeasibilitySet& s = block.set;
    if (block.action_offset < 0 || block.action_offset + s.action_dim() > action_dim ||
        block.state_offset < 0 || block.state_offset + s.state_dim() > state_dim) {
      throw DimensionMismatch("assemble_blocks: block lies outside the assembled dimensions");
    }
    rows += s.rows();
    all_boxes = all_boxes && s.kind() == SetKind::box;
    for (Eigen::Index j = 0; j < s.action_dim(); ++j) ++coverage[static_cast<std::size_t>(block.action_offset + j)];
  }
  const bool tiled = std::all_of(coverage.begin(), coverage.end(), [](int c) { return c == 1; });
  if (all_boxes && tiled && action_dim > 0) {
    Eigen::VectorXd lower(action_dim), upper(action_dim);
    for (const auto& block : blocks) {
      lower.segment(block.action_offset, block.set.action_dim()) = block.set.lower();
      upper.segment(block.action_offset, block.set.action_dim()) = block.set.upper();
    }
    return FeasibilitySet::box(std::move(lower), std::move(upper), state_dim);
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, action_dim);
  Eigen::VectorXd b(rows);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(rows, state_dim);
  Eigen::Index row = 0;
  for (const auto& block : blocks) {
    const FeasibilitySet& s = block.set;
    A.block(row, block.action_offset, s.rows(), s.action_dim()) = s.A();
    b.segment(row, s.rows()) = s.b();
    C.block(row, block.state_offset, s.rows(), s.state_dim()) = s.C();
    row += s.rows();
  }
  return FeasibilitySet::polyhedral(std::move(A), std::move(b), std::move(C));
}

namespace {

std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> sample_pairs(const Eigen::VectorXd& x_bar,
                                                                      const ViabilityOptions& options) {
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;
  if (options.radius == 0.0 || options.samples <= 1) {
    pairs.emplace_back(x_bar, x_bar);
    return pairs;
  }
  if (!(options.radius > 0.0)) throw std::invalid_argument("viability: radius must be nonnegative");
  const auto first = sample_ball(x_bar, options.radius, options.samples, options.seed);
  const auto second = sample_ball(x_bar, options.radius, options.samples, options.seed * 2 + 1);
  for (std::size_t i = 0; i < first.size(); ++i) pairs.emplace_back(first[i], second[i]);
  return pairs;
}

Polytope policy_at(const PolicyMap& policy, const Eigen::VectorXd& x) {
  std::optional<Polytope> G = policy(x);
  if (!G) throw EmptyPolicySet("policy set is empty at a sampled state");
  return std::move(*G);
}

// Does hull(G) meet S(x')?
bool hull_meets(const Polytope& G, const FeasibilitySet& S, const Eigen::VectorXd& x_prime, double tol) {
  const Eigen::VectorXd rhs = S.rhs(x_prime);
  lp::LinearProgram program;
  std::vector<std::pair<std::size_t, double>> simplex;
  for (std::size_t i = 0; i < G.size(); ++i) simplex.emplace_back(program.add_variable(0.0), 1.0);
  program.add_constraint(simplex, lp::Relation::equal, 1.0);
  for (Eigen::Index r = 0; r < S.rows(); ++r) {
    std::vector<std::pair<std::size_t, double>> terms;
    for (std::size_t i = 0; i < G.size(); ++i) terms.emplace_back(i, S.A().row(r).dot(G.generators()[i]));
    program.add_constraint(std::move(terms), lp::Relation::less_equal, rhs(r) + tol);
  }
  return program.solve().status == lp::Status::optimal;
}

}  // namespace

ViabilityReport check_lower_viability(const PolicyMap& policy, const FeasibilitySet& S,
                                      const Eigen::VectorXd& x_bar, const ViabilityOptions& options) {
  ViabilityReport report;
  report.kind = ViabilityKind::lower;
  report.radius = options.radius;
  for (const auto& [x, x_prime] : sample_pairs(x_bar, options)) {
    ++report.samples;
    const Polytope G = policy_at(policy, x);
    if (G.dimension() != S.action_dim()) throw DimensionMismatch("viability: policy dimension mismatch");
    bool meets = std::any_of(G.generators().begin(), G.generators().end(),
                             [&](const Eigen::VectorXd& g) { return feasible(S, x_prime, g, options.tol); });
    if (!meets) meets = hull_meets(G, S, x_prime, options.tol);
    if (!meets) {
      report.verdict = ViabilityVerdict::violated;
      report.violating_pair.emplace(x, x_prime);
      return report;
    }
  }
  return report;
}

ViabilityReport check_upper_viability(const PolicyMap& policy, const FeasibilitySet& S,
                                      const Eigen::VectorXd& x_bar, const ViabilityOptions& options) {
  ViabilityReport report;
  report.kind = ViabilityKind::upper;
  report.radius = options.radius;
  for (const auto& [x, x_prime] : sample_pairs(x_bar, options)) {
    ++report.samples;
    const Polytope G = policy_at(policy, x);
    if (G.dimension() != S.action_dim()) throw DimensionMismatch("viability: policy dimension mismatch");
    for (const auto& g : G.generators()) {
      if (!feasible(S, x_prime, g, options.tol)) {
        report.verdict = ViabilityVerdict::violated;
        report.violating_pair.emplace(x, x_prime);
        return report;
      }
    }
  }
  return report;
}

const char* to_string(ViabilityKind kind) { return kind == ViabilityKind::lower ? "lower" : "upper"; }

const char* to_string(ViabilityVerdict verdict) {
  return verdict == ViabilityVerdict::holds_on_samples ? "holds_on_samples" : "violated";
}

}  // namespace nsdp
