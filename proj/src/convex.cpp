#include "nsdp/convex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nsdp/errors.hpp"
#include "nsdp/lp.hpp"

namespace nsdp {

namespace {

constexpr double kMaxGeneratorNorm = 1e12;

void check_conditioning(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite() || v.lpNorm<Eigen::Infinity>() > kMaxGeneratorNorm) {
    throw IllConditioned(std::string(what) + " has non-finite entries or norm above 1e12");
  }
}

Eigen::Index common_dimension(std::span<const Polytope> parts, const PolyhedralCone& cone) {
  const Eigen::Index dim = cone.dimension();
  for (const auto& p : parts) {
    if (p.dimension() != dim) throw DimensionMismatch("contains_zero: part dimension mismatch");
  }
  return dim;
}

// Largest margin separator over the unit sup-norm ball:
//   max -sum_k s_k  s.t. <h, g_ki> <= s_k, <h, r_j> <= 0, -1 <= h <= 1.
Eigen::VectorXd max_margin_separator(std::span<const Polytope> parts, const PolyhedralCone& cone) {
  const Eigen::Index dim = cone.dimension();
  lp::LinearProgram program;
  std::vector<std::size_t> h(static_cast<std::size_t>(dim));
  for (auto& var : h) var = program.add_variable(0.0, -1.0, 1.0);
  std::vector<std::size_t> s;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    s.push_back(program.add_variable(1.0, -lp::LinearProgram::kInf));
  }
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (const auto& g : parts[k].generators()) {
      std::vector<std::pair<std::size_t, double>> terms;
      for (Eigen::Index i = 0; i < dim; ++i) terms.emplace_back(h[static_cast<std::size_t>(i)], g(i));
      terms.emplace_back(s[k], -1.0);
      program.add_constraint(std::move(terms), lp::Relation::less_equal, 0.0);
    }
  }
  for (const auto& r : cone.rays()) {
    std::vector<std::pair<std::size_t, double>> terms;
    for (Eigen::Index i = 0; i < dim; ++i) terms.emplace_back(h[static_cast<std::size_t>(i)], r(i));
    program.add_constraint(std::move(terms), lp::Relation::less_equal, 0.0);
  }
  const lp::Solution solution = program.solve();
  Eigen::VectorXd direction = Eigen::VectorXd::Zero(dim);
  if (solution.status == lp::Status::optimal) {
    for (Eigen::Index i = 0; i < dim; ++i) direction(i) = solution.values(static_cast<Eigen::Index>(h[static_cast<std::size_t>(i)]));
  }
  return direction;
}

// Rounding can leave <h, r> a few ulps above zero on rays the separator is
// supposed to be orthogonal to. Shift h along the near-active rays until every
// <h, r_j> is nonpositive in floating point.
Eigen::VectorXd polish_separator(Eigen::VectorXd h, const PolyhedralCone& cone) {
  const double scale = h.lpNorm<Eigen::Infinity>();
  if (scale == 0.0 || cone.rays().empty()) return h;
  double push = 1e-12 * scale;
  for (int iteration = 0; iteration < 12; ++iteration) {
    std::vector<Eigen::Index> active;
    bool violated = false;
    for (std::size_t j = 0; j < cone.rays().size(); ++j) {
      const Eigen::VectorXd& r = cone.rays()[j];
      const double dot = h.dot(r);
      violated = violated || dot > 0.0;
      if (dot > -push * r.norm()) active.push_back(static_cast<Eigen::Index>(j));
    }
    if (!violated) return h;
    Eigen::MatrixXd R(h.size(), static_cast<Eigen::Index>(active.size()));
    Eigen::VectorXd target(static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) {
      const Eigen::VectorXd& r = cone.rays()[static_cast<std::size_t>(active[k])];
      R.col(static_cast<Eigen::Index>(k)) = r;
      target(static_cast<Eigen::Index>(k)) = h.dot(r) + push * r.norm();
    }
    // Least-norm correction c = R lambda with R' c = target.
    const Eigen::VectorXd lambda = (R.transpose() * R).completeOrthogonalDecomposition().solve(target);
    h -= R * lambda;
    push *= 10.0;
  }
  return h;
}

}  // namespace

Polytope::Polytope(std::vector<Eigen::VectorXd> generators) {
  if (generators.empty()) throw std::invalid_argument("Polytope: empty generator list");
  dimension_ = generators.front().size();
  if (dimension_ <= 0) throw DimensionMismatch("Polytope: generators must have positive dimension");
  generators_.reserve(generators.size());
  for (auto& g : generators) {
    if (g.size() != dimension_) throw DimensionMismatch("Polytope: generator dimension mismatch");
    const bool duplicate = std::any_of(generators_.begin(), generators_.end(), [&](const auto& kept) {
      return (kept - g).template lpNorm<Eigen::Infinity>() <= kMergeDistance;
    });
    if (!duplicate) generators_.push_back(std::move(g));
  }
}

Polytope Polytope::point(Eigen::VectorXd p) { return Polytope(std::vector<Eigen::VectorXd>{std::move(p)}); }

double Polytope::support(const Eigen::VectorXd& h) const {
  if (h.size() != dimension_) throw DimensionMismatch("support: direction dimension mismatch");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& g : generators_) best = std::max(best, g.dot(h));
  return best;
}

Polytope Polytope::scaled(double factor) const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(generators_.size());
  for (const auto& g : generators_) out.push_back(factor * g);
  return Polytope(std::move(out));
}

double support(const Polytope& p, const Eigen::VectorXd& h) { return p.support(h); }

Polytope minkowski_sum(const Polytope& p, const Polytope& q) {
  if (p.dimension() != q.dimension()) throw DimensionMismatch("minkowski_sum: dimension mismatch");
  std::vector<Eigen::VectorXd> out;
  out.reserve(p.size() * q.size());
  for (const auto& a : p.generators()) {
    for (const auto& b : q.generators()) out.push_back(a + b);
  }
  return Polytope(std::move(out));
}

Polytope hull_of_union(std::span<const Polytope> parts) {
  if (parts.empty()) throw std::invalid_argument("hull_of_union: no parts");
  std::vector<Eigen::VectorXd> out;
  for (const auto& p : parts) {
    if (p.dimension() != parts.front().dimension()) {
      throw DimensionMismatch("hull_of_union: dimension mismatch");
    }
    out.insert(out.end(), p.generators().begin(), p.generators().end());
  }
  return Polytope(std::move(out));
}

PolyhedralCone::PolyhedralCone(Eigen::Index dimension, std::vector<Eigen::VectorXd> rays)
    : dimension_(dimension) {
  if (dimension <= 0) throw DimensionMismatch("PolyhedralCone: dimension must be positive");
  for (auto& r : rays) {
    if (r.size() != dimension) throw DimensionMismatch("PolyhedralCone: ray dimension mismatch");
    if (r.lpNorm<Eigen::Infinity>() == 0.0) continue;
    rays_.push_back(std::move(r));
  }
}

double sum_support(std::span<const Polytope> parts, const PolyhedralCone& cone,
                   const Eigen::VectorXd& h) {
  double total = 0.0;
  for (const auto& p : parts) total += p.support(h);
  for (const auto& r : cone.rays()) {
    if (r.dot(h) > 0.0) return std::numeric_limits<double>::infinity();
  }
  return total;
}

double reconstruction_residual(std::span<const Polytope> parts, const PolyhedralCone& cone,
                               const std::vector<Eigen::VectorXd>& weights,
                               const Eigen::VectorXd& cone_weights) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(cone.dimension());
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& gens = parts[k].generators();
    for (std::size_t i = 0; i < gens.size(); ++i) sum += weights[k](static_cast<Eigen::Index>(i)) * gens[i];
  }
  for (std::size_t j = 0; j < cone.rays().size(); ++j) {
    sum += cone_weights(static_cast<Eigen::Index>(j)) * cone.rays()[j];
  }
  return sum.lpNorm<Eigen::Infinity>();
}

MembershipCertificate contains_zero(std::span<const Polytope> parts, const PolyhedralCone& cone,
                                    const MembershipTolerances& tolerances) {
  const Eigen::Index dim = common_dimension(parts, cone);
  auto denoised = [&](const Eigen::VectorXd& g) {
    return Eigen::VectorXd((g.array().abs() <= tolerances.absolute).select(0.0, g));
  };
  double scale = 0.0;
  for (const auto& p : parts) {
    for (const auto& g : p.generators()) {
      check_conditioning(g, "generator");
      scale = std::max(scale, denoised(g).lpNorm<Eigen::Infinity>());
    }
  }
  for (const auto& r : cone.rays()) check_conditioning(r, "ray");
  if (scale == 0.0) scale = 1.0;

  std::size_t columns = cone.rays().size();
  for (const auto& p : parts) columns += p.size();
  const Eigen::Index rows = dim + static_cast<Eigen::Index>(parts.size());

  // Normalized system: generators divided by the common scale, rays by their
  // own sup norm. Verdicts are invariant under both.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(columns));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
  Eigen::Index col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (const auto& g : parts[k].generators()) {
      A.col(col).head(dim) = denoised(g) / scale;
      A(dim + static_cast<Eigen::Index>(k), col) = 1.0;
      ++col;
    }
    b(dim + static_cast<Eigen::Index>(k)) = 1.0;
  }
  std::vector<double> ray_norms;
  for (const auto& r : cone.rays()) {
    ray_norms.push_back(r.lpNorm<Eigen::Infinity>());
    A.col(col).head(dim) = r / ray_norms.back();
    ++col;
  }

  lp::Options options;
  options.feasibility_tol = tolerances.residual;
  const lp::StandardFormResult result =
      lp::solve_standard_form(A, b, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(columns)), options);

  MembershipCertificate certificate;
  if (result.status != lp::Status::infeasible) {
    certificate.verdict = Verdict::member;
    col = 0;
    for (const auto& p : parts) {
      Eigen::VectorXd w(static_cast<Eigen::Index>(p.size()));
      for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = result.x(col++);
      certificate.weights.push_back(std::move(w));
    }
    certificate.cone_weights.resize(static_cast<Eigen::Index>(cone.rays().size()));
    for (std::size_t j = 0; j < cone.rays().size(); ++j) {
      certificate.cone_weights(static_cast<Eigen::Index>(j)) = result.x(col++) * scale / ray_norms[j];
    }
    certificate.residual =
        reconstruction_residual(parts, cone, certificate.weights, certificate.cone_weights);
    return certificate;
  }

  certificate.verdict = Verdict::non_member;
  certificate.residual = result.phase_one_objective * scale;
  Eigen::VectorXd h = polish_separator(result.farkas.head(dim), cone);
  auto margin_of = [&](const Eigen::VectorXd& direction) {
    const double norm = direction.lpNorm<Eigen::Infinity>();
    if (norm == 0.0) return -std::numeric_limits<double>::infinity();
    return -sum_support(parts, cone, direction / norm);
  };
  double margin = margin_of(h);
  if (!(margin >= tolerances.margin)) {
    Eigen::VectorXd alternative = polish_separator(max_margin_separator(parts, cone), cone);
    const double alternative_margin = margin_of(alternative);
    if (alternative_margin > margin) {
      h = alternative;
      margin = alternative_margin;
    }
  }
  const double norm = h.lpNorm<Eigen::Infinity>();
  certificate.separator = norm > 0.0 ? Eigen::VectorXd(h / norm) : h;
  certificate.margin = margin;
  return certificate;
}

double distance_to_origin(std::span<const Polytope> parts, const PolyhedralCone& cone,
                          double bound) {
  const Eigen::Index dim = common_dimension(parts, cone);
  if (!(bound > 0.0)) throw std::invalid_argument("distance_to_origin: bound must be positive");
  for (const auto& p : parts) {
    for (const auto& g : p.generators()) check_conditioning(g, "generator");
  }
  for (const auto& r : cone.rays()) check_conditioning(r, "ray");

  lp::LinearProgram program;
  std::vector<std::vector<std::pair<std::size_t, double>>> coordinate_rows(static_cast<std::size_t>(dim));
  for (const auto& p : parts) {
    std::vector<std::pair<std::size_t, double>> simplex_row;
    for (const auto& g : p.generators()) {
      const std::size_t var = program.add_variable(0.0);
      simplex_row.emplace_back(var, 1.0);
      for (Eigen::Index i = 0; i < dim; ++i) {
        if (g(i) != 0.0) coordinate_rows[static_cast<std::size_t>(i)].emplace_back(var, g(i));
      }
    }
    program.add_constraint(std::move(simplex_row), lp::Relation::equal, 1.0);
  }
  for (const auto& r : cone.rays()) {
    const std::size_t var = program.add_variable(0.0, 0.0, bound);
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (r(i) != 0.0) coordinate_rows[static_cast<std::size_t>(i)].emplace_back(var, r(i));
    }
  }
  for (Eigen::Index i = 0; i < dim; ++i) {
    auto& row = coordinate_rows[static_cast<std::size_t>(i)];
    row.emplace_back(program.add_variable(1.0), -1.0);
    row.emplace_back(program.add_variable(1.0), 1.0);
    program.add_constraint(std::move(row), lp::Relation::equal, 0.0);
  }
  const lp::Solution solution = program.solve();
  if (solution.status != lp::Status::optimal) {
    throw std::runtime_error("distance_to_origin: LP did not reach an optimum");
  }
  return std::max(0.0, solution.objective);
}

bool hull_contains(const Polytope& hull, const Eigen::VectorXd& p, double tol) {
  if (p.size() != hull.dimension()) throw DimensionMismatch("hull_contains: dimension mismatch");
  const Polytope parts[] = {hull, Polytope::point(-p)};
  return distance_to_origin(parts, PolyhedralCone::zero(hull.dimension()), 1.0) <= tol;
}

bool hull_equal(const Polytope& a, const Polytope& b, double tol) {
  if (a.dimension() != b.dimension()) return false;
  for (const auto& g : a.generators()) {
    if (!hull_contains(b, g, tol)) return false;
  }
  for (const auto& g : b.generators()) {
    if (!hull_contains(a, g, tol)) return false;
  }
  return true;
}

bool cone_contains(const PolyhedralCone& cone, const Eigen::VectorXd& r, double tol) {
  if (r.size() != cone.dimension()) throw DimensionMismatch("cone_contains: dimension mismatch");
  const double norm = r.lpNorm<Eigen::Infinity>();
  if (norm == 0.0) return true;
  const Polytope parts[] = {Polytope::point(-r / norm)};
  double bound = 1.0;
  for (const auto& ray : cone.rays()) bound = std::max(bound, 1e6 / std::max(ray.lpNorm<Eigen::Infinity>(), 1e-300));
  return distance_to_origin(parts, cone, bound) <= tol;
}

}  // namespace nsdp
