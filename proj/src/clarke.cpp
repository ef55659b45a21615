#include "nsdp/clarke.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nsdp/errors.hpp"
#include "nsdp/sampling.hpp"

namespace nsdp {

namespace {

struct ValueAndGradient {
  double value;
  Polytope gradient;
};

Eigen::VectorXd bind_full_point(const ExprNode& n, const Eigen::VectorXd& point) {
  const Expr& child = n.children[0];
  const Eigen::Index k = n.values.size();
  Eigen::VectorXd full(child.input_dim());
  full.head(n.offset) = point.head(n.offset);
  full.segment(n.offset, k) = n.values;
  full.tail(child.input_dim() - n.offset - k) = point.tail(point.size() - n.offset);
  return full;
}

Eigen::VectorXd select_inner_point(const ExprNode& n, const Eigen::VectorXd& point) {
  Eigen::VectorXd inner(static_cast<Eigen::Index>(n.indices.size()));
  for (std::size_t i = 0; i < n.indices.size(); ++i) inner(static_cast<Eigen::Index>(i)) = point(n.indices[i]);
  return inner;
}

// Indices of children whose values are within tol of the extremum.
template <class Better>
std::vector<std::size_t> active_children(const std::vector<double>& values, double tol, Better better) {
  double best = values.front();
  for (double v : values) {
    if (better(v, best)) best = v;
  }
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::abs(values[i] - best) <= tol) active.push_back(i);
  }
  return active;
}

std::vector<std::size_t> active_max(const std::vector<double>& values, double tol) {
  return active_children(values, tol, [](double a, double b) { return a > b; });
}

std::vector<std::size_t> active_min(const std::vector<double>& values, double tol) {
  return active_children(values, tol, [](double a, double b) { return a < b; });
}

std::vector<double> child_values(const ExprNode& n, const Eigen::VectorXd& point) {
  std::vector<double> values;
  values.reserve(n.children.size());
  for (const auto& c : n.children) values.push_back(c.evaluate(point));
  return values;
}

ValueAndGradient recurse(const Expr& expr, const Eigen::VectorXd& point, double tol) {
  const ExprNode& n = expr.node();
  switch (n.kind) {
    case NodeKind::atom:
      return {n.atom->eval(point), Polytope::point(n.atom->grad(point))};
    case NodeKind::sum: {
      ValueAndGradient acc = recurse(n.children[0], point, tol);
      // Summation starts from 0.0 to match Expr::evaluate bit for bit.
      double total = 0.0 + acc.value;
      for (std::size_t i = 1; i < n.children.size(); ++i) {
        ValueAndGradient next = recurse(n.children[i], point, tol);
        total += next.value;
        acc.gradient = minkowski_sum(acc.gradient, next.gradient);
      }
      acc.value = total;
      return acc;
    }
    case NodeKind::scale: {
      ValueAndGradient child = recurse(n.children[0], point, tol);
      return {n.factor * child.value, child.gradient.scaled(n.factor)};
    }
    case NodeKind::neg: {
      ValueAndGradient child = recurse(n.children[0], point, tol);
      return {-child.value, child.gradient.negated()};
    }
    case NodeKind::max:
    case NodeKind::min: {
      std::vector<ValueAndGradient> children;
      std::vector<double> values;
      for (const auto& c : n.children) {
        children.push_back(recurse(c, point, tol));
        values.push_back(children.back().value);
      }
      const bool is_max = n.kind == NodeKind::max;
      const auto active = is_max ? active_max(values, tol) : active_min(values, tol);
      std::vector<Polytope> hulls;
      for (std::size_t i : active) hulls.push_back(children[i].gradient);
      const double extremum = is_max ? *std::max_element(values.begin(), values.end())
                                     : *std::min_element(values.begin(), values.end());
      return {extremum, hull_of_union(hulls)};
    }
    case NodeKind::abs: {
      ValueAndGradient child = recurse(n.children[0], point, tol);
      const double v = child.value;
      if (std::abs(v) <= tol) {
        const Polytope parts[] = {child.gradient, child.gradient.negated()};
        return {std::abs(v), hull_of_union(parts)};
      }
      if (v > 0.0) return {v, child.gradient};
      return {-v, child.gradient.negated()};
    }
    case NodeKind::bind: {
      ValueAndGradient child = recurse(n.children[0], bind_full_point(n, point), tol);
      const Eigen::Index k = n.values.size();
      const Eigen::Index rest = expr.input_dim() - n.offset;
      std::vector<Eigen::VectorXd> projected;
      for (const auto& g : child.gradient.generators()) {
        Eigen::VectorXd p(expr.input_dim());
        p.head(n.offset) = g.head(n.offset);
        p.tail(rest) = g.segment(n.offset + k, rest);
        projected.push_back(std::move(p));
      }
      return {child.value, Polytope(std::move(projected))};
    }
    case NodeKind::select: {
      ValueAndGradient child = recurse(n.children[0], select_inner_point(n, point), tol);
      std::vector<Eigen::VectorXd> lifted;
      for (const auto& g : child.gradient.generators()) {
        Eigen::VectorXd p = Eigen::VectorXd::Zero(expr.input_dim());
        for (std::size_t i = 0; i < n.indices.size(); ++i) p(n.indices[i]) = g(static_cast<Eigen::Index>(i));
        lifted.push_back(std::move(p));
      }
      return {child.value, Polytope(std::move(lifted))};
    }
  }
  throw std::logic_error("clarke_gradient: unknown node kind");
}

bool smooth_at(const Expr& expr, const Eigen::VectorXd& point, double tol) {
  const ExprNode& n = expr.node();
  switch (n.kind) {
    case NodeKind::atom:
      return true;
    case NodeKind::sum:
      for (const auto& c : n.children) {
        if (!smooth_at(c, point, tol)) return false;
      }
      return true;
    case NodeKind::scale:
    case NodeKind::neg:
      return smooth_at(n.children[0], point, tol);
    case NodeKind::max:
    case NodeKind::min: {
      const auto values = child_values(n, point);
      const auto active = n.kind == NodeKind::max ? active_max(values, tol) : active_min(values, tol);
      return active.size() == 1 && smooth_at(n.children[active.front()], point, tol);
    }
    case NodeKind::abs:
      return std::abs(n.children[0].evaluate(point)) > tol && smooth_at(n.children[0], point, tol);
    case NodeKind::bind:
      return smooth_at(n.children[0], bind_full_point(n, point), tol);
    case NodeKind::select:
      return smooth_at(n.children[0], select_inner_point(n, point), tol);
  }
  return false;
}

bool regular_at(const Expr& expr, const Eigen::VectorXd& point, double tol, const std::string& path,
                std::vector<std::string>& trace) {
  const ExprNode& n = expr.node();
  auto child_path = [&](std::size_t i) {
    return path + "/" + to_string(n.children[i].kind()) + "[" + std::to_string(i) + "]";
  };
  switch (n.kind) {
    case NodeKind::atom:
      return true;
    case NodeKind::sum: {
      bool ok = true;
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        ok = regular_at(n.children[i], point, tol, child_path(i), trace) && ok;
      }
      return ok;
    }
    case NodeKind::scale:
      return regular_at(n.children[0], point, tol, child_path(0), trace);
    case NodeKind::neg:
      if (smooth_at(n.children[0], point, tol)) return true;
      trace.push_back(path + ": negation of a branch that is not locally smooth");
      return false;
    case NodeKind::max: {
      const auto values = child_values(n, point);
      bool ok = true;
      for (std::size_t i : active_max(values, tol)) {
        ok = regular_at(n.children[i], point, tol, child_path(i), trace) && ok;
      }
      return ok;
    }
    case NodeKind::min: {
      const auto values = child_values(n, point);
      const auto active = active_min(values, tol);
      if (active.size() > 1) {
        trace.push_back(path + ": min with " + std::to_string(active.size()) + " active branches");
        return false;
      }
      return regular_at(n.children[active.front()], point, tol, child_path(active.front()), trace);
    }
    case NodeKind::abs: {
      const double v = n.children[0].evaluate(point);
      if (v > tol) return regular_at(n.children[0], point, tol, child_path(0), trace);
      if (smooth_at(n.children[0], point, tol)) return true;
      trace.push_back(path + (v < -tol ? ": abs of a negative branch that is not locally smooth"
                                       : ": abs at a kink of an argument that is not locally smooth"));
      return false;
    }
    case NodeKind::bind:
      return regular_at(n.children[0], bind_full_point(n, point), tol, child_path(0), trace);
    case NodeKind::select:
      return regular_at(n.children[0], select_inner_point(n, point), tol, child_path(0), trace);
  }
  return false;
}

void require_point(const Expr& expr, const Eigen::VectorXd& point) {
  if (point.size() != expr.input_dim()) {
    throw DimensionMismatch("point dimension " + std::to_string(point.size()) +
                            " does not match expression input dimension " +
                            std::to_string(expr.input_dim()));
  }
}

}  // namespace

GradientPolytope clarke_gradient(const Expr& expr, const Eigen::VectorXd& point, double active_tol) {
  require_point(expr, point);
  return recurse(expr, point, active_tol).gradient;
}

double gen_dir_derivative(const Expr& expr, const Eigen::VectorXd& point,
                          const Eigen::VectorXd& direction, double active_tol) {
  if (direction.size() != expr.input_dim()) throw DimensionMismatch("direction dimension mismatch");
  return clarke_gradient(expr, point, active_tol).support(direction);
}

RegularityReport is_regular(const Expr& expr, const Eigen::VectorXd& point, double active_tol) {
  require_point(expr, point);
  RegularityReport report;
  const std::string root = std::string("root:") + to_string(expr.kind());
  report.status = regular_at(expr, point, active_tol, root, report.trace) ? Regularity::regular
                                                                          : Regularity::not_certified;
  return report;
}

bool locally_smooth(const Expr& expr, const Eigen::VectorXd& point, double active_tol) {
  require_point(expr, point);
  return smooth_at(expr, point, active_tol);
}

std::optional<Eigen::VectorXd> strict_derivative_probe(const Expr& expr, const Eigen::VectorXd& point,
                                                       double radius, std::size_t samples,
                                                       std::uint64_t seed, double active_tol) {
  if (!(radius > 0.0)) throw std::invalid_argument("strict_derivative_probe: radius must be positive");
  const GradientPolytope gradient = clarke_gradient(expr, point, active_tol);
  if (!gradient.is_singleton()) return std::nullopt;
  const Eigen::VectorXd& g = gradient.generators().front();
  Rng rng(seed);
  const Eigen::Index d = point.size();
  for (std::size_t s = 0; s < samples; ++s) {
    const Eigen::VectorXd x = point + rng.uniform_vector(d, -radius, radius);
    const Eigen::VectorXd y = point + rng.uniform_vector(d, -radius, radius);
    const Eigen::VectorXd h = y - x;
    const double length = h.norm();
    if (length == 0.0) continue;
    const double quotient = (expr.evaluate(y) - expr.evaluate(x)) / length;
    if (std::abs(quotient - g.dot(h) / length) >= 1e-4) return std::nullopt;
  }
  return g;
}

}  // namespace nsdp
