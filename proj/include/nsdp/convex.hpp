#pragma once

// Vertex/ray represented convex sets. All queries go through support
// functions or LPs; no facet enumeration is ever done.

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <vector>

namespace nsdp {

// Convex hull of a nonempty finite generator list. Generators closer than
// kMergeDistance (sup norm) are merged on construction.
class Polytope {
 public:
  static constexpr double kMergeDistance = 1e-12;

  explicit Polytope(std::vector<Eigen::VectorXd> generators);
  static Polytope point(Eigen::VectorXd p);

  Eigen::Index dimension() const { return dimension_; }
  std::size_t size() const { return generators_.size(); }
  bool is_singleton() const { return generators_.size() == 1; }
  const std::vector<Eigen::VectorXd>& generators() const { return generators_; }

  // max over generators of <g, h>.
  double support(const Eigen::VectorXd& h) const;
  Polytope scaled(double factor) const;
  Polytope negated() const { return scaled(-1.0); }

 private:
  std::vector<Eigen::VectorXd> generators_;
  Eigen::Index dimension_;
};

// Kept for the name the nonsmooth layer uses: a Clarke generalized gradient is
// carried as a Polytope.
using GradientPolytope = Polytope;

double support(const Polytope& p, const Eigen::VectorXd& h);
Polytope minkowski_sum(const Polytope& p, const Polytope& q);
// Convex hull of the union.
Polytope hull_of_union(std::span<const Polytope> parts);

// Nonnegative combinations of the rays; an empty ray list is {0}.
class PolyhedralCone {
 public:
  PolyhedralCone(Eigen::Index dimension, std::vector<Eigen::VectorXd> rays = {});
  static PolyhedralCone zero(Eigen::Index dimension) { return PolyhedralCone(dimension); }

  Eigen::Index dimension() const { return dimension_; }
  const std::vector<Eigen::VectorXd>& rays() const { return rays_; }
  bool is_zero() const { return rays_.empty(); }

 private:
  std::vector<Eigen::VectorXd> rays_;
  Eigen::Index dimension_;
};

enum class Verdict { member, non_member };

struct MembershipTolerances {
  double residual = 1e-9;
  double margin = 1e-9;
  // Generator coordinates at or below this magnitude are treated as zero.
  double absolute = 1e-14;
};

// Certificate for the query 0 in parts[0] + ... + parts[k-1] + cone.
//
// member: `weights[k]` are the convex coefficients of part k and
// `cone_weights` the conic multipliers; `residual` is the sup norm of the
// reconstructed combination.
// non_member: `separator` is a unit (sup norm) direction h with
// <h, z> <= -margin for every z in the sum set; `residual` is the l1 residual
// left by phase one.
struct MembershipCertificate {
  Verdict verdict = Verdict::non_member;
  std::vector<Eigen::VectorXd> weights;
  Eigen::VectorXd cone_weights;
  std::optional<Eigen::VectorXd> separator;
  double residual = 0.0;
  double margin = 0.0;

  bool is_member() const { return verdict == Verdict::member; }
};

MembershipCertificate contains_zero(std::span<const Polytope> parts, const PolyhedralCone& cone,
                                    const MembershipTolerances& tolerances = {});

// min || sum_k lambda_k g_k + sum_j nu_j r_j ||_1 with lambda_k on the simplex
// and 0 <= nu_j <= bound.
double distance_to_origin(std::span<const Polytope> parts, const PolyhedralCone& cone,
                          double bound);

// Support function of the sum set; +inf when some ray has <h, r> > 0.
double sum_support(std::span<const Polytope> parts, const PolyhedralCone& cone,
                   const Eigen::VectorXd& h);

// Sup-norm residual of sum_k sum_i w_ki g_ki + sum_j nu_j r_j.
double reconstruction_residual(std::span<const Polytope> parts, const PolyhedralCone& cone,
                               const std::vector<Eigen::VectorXd>& weights,
                               const Eigen::VectorXd& cone_weights);

// LP test of p in hull(generators) within an l1 tolerance.
bool hull_contains(const Polytope& hull, const Eigen::VectorXd& p, double tol = 1e-9);
// Mutual generator containment.
bool hull_equal(const Polytope& a, const Polytope& b, double tol = 1e-9);
// r in cone(rays), by LP.
bool cone_contains(const PolyhedralCone& cone, const Eigen::VectorXd& r, double tol = 1e-9);

}  // namespace nsdp
