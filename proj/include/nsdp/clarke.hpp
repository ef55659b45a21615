#pragma once

// Clarke generalized gradients of piecewise-smooth expressions, computed by
// structural recursion, and the structural regularity certificate that says
// when the recursion is exact.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nsdp/convex.hpp"
#include "nsdp/expr.hpp"

namespace nsdp {

constexpr double kDefaultActiveTol = 1e-9;

// atom -> {grad}; sum -> Minkowski sum; scale -> scaled; neg -> negated;
// max/min -> hull of the children within active_tol of the extremum;
// abs(c) -> max(c, -c); bind/select -> linear image of the child's set.
GradientPolytope clarke_gradient(const Expr& expr, const Eigen::VectorXd& point,
                                 double active_tol = kDefaultActiveTol);

// Support function of clarke_gradient at `direction`.
double gen_dir_derivative(const Expr& expr, const Eigen::VectorXd& point,
                          const Eigen::VectorXd& direction, double active_tol = kDefaultActiveTol);

enum class Regularity { regular, not_certified };

struct RegularityReport {
  Regularity status = Regularity::regular;
  // One line per node that blocked the certificate, with its path from the root
  // (e.g. "root/max[1]/neg").
  std::vector<std::string> trace;

  bool regular() const { return status == Regularity::regular; }
};

RegularityReport is_regular(const Expr& expr, const Eigen::VectorXd& point,
                            double active_tol = kDefaultActiveTol);

// True when the expression is strictly differentiable at `point` by
// structure: every max/min has a single active branch, abs is away from its
// kink, and so on.
bool locally_smooth(const Expr& expr, const Eigen::VectorXd& point,
                    double active_tol = kDefaultActiveTol);

// Returns g when clarke_gradient is the singleton {g} and every sampled
// strict difference quotient (f(x+h) - f(x)) / |h| over pairs x, x+h in the
// sup-norm ball of `radius` stays within 1e-4 of <g, h> / |h|.
std::optional<Eigen::VectorXd> strict_derivative_probe(const Expr& expr, const Eigen::VectorXd& point,
                                                       double radius, std::size_t samples,
                                                       std::uint64_t seed = 0x5eedULL,
                                                       double active_tol = kDefaultActiveTol);

}  // namespace nsdp
