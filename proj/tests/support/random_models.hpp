#pragma once

// Seeded generators of test instances shared by the unit and acceptance
// tests.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "nsdp/dp.hpp"
#include "nsdp/expr.hpp"
#include "nsdp/sampling.hpp"
#include "nsdp/stochastic.hpp"

namespace testing_support {

using nsdp::Expr;
using nsdp::Rng;

inline Eigen::VectorXd integer_vector(Rng& rng, Eigen::Index dim, int lo, int hi) {
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
  return v;
}

// Smooth atoms with moderate curvature on [-2, 2]^d. Half of the affine atoms
// have integer data so that kinks of max/min/abs pass through lattice points.
inline Expr random_smooth(Rng& rng, Eigen::Index d) {
  switch (rng.below(5)) {
    case 0:
      return nsdp::affine(integer_vector(rng, d, -1, 1), 0.5 * static_cast<double>(rng.below(3)));
    case 1:
      return nsdp::affine(rng.uniform_vector(d, -1.0, 1.0), rng.uniform(-1.0, 1.0));
    case 2: {
      const Eigen::MatrixXd B = Eigen::MatrixXd::NullaryExpr(d, d, [&] { return rng.uniform(-0.5, 0.5); });
      return nsdp::quadratic(B + B.transpose(), rng.uniform_vector(d, -1.0, 1.0), rng.uniform(-1.0, 1.0));
    }
    case 3:
      return nsdp::norm_squared(0.5 * integer_vector(rng, d, -2, 2));
    default:
      return nsdp::exp_affine(rng.uniform_vector(d, -0.5, 0.5), rng.uniform(-1.0, 0.0));
  }
}

// Regular core: sums, nonnegative scalings and maxima of regular children,
// and abs of smooth atoms.
inline Expr random_regular(Rng& rng, Eigen::Index d, int depth) {
  if (depth <= 1) return random_smooth(rng, d);
  switch (rng.below(5)) {
    case 0:
      return Expr::sum({random_regular(rng, d, depth - 1), random_regular(rng, d, depth - 1)});
    case 1:
      return Expr::scale(rng.uniform(0.1, 2.0), random_regular(rng, d, depth - 1));
    case 2:
      return Expr::max({random_regular(rng, d, depth - 1), random_regular(rng, d, depth - 1)});
    case 3:
      return Expr::abs(random_smooth(rng, d));
    default:
      return random_smooth(rng, d);
  }
}

// The class on which the Clarke recursion is exact: a regular expression, its
// negation, or a minimum of smooth atoms. Depth at most 3.
inline Expr random_exact_class(Rng& rng, Eigen::Index d) {
  switch (rng.below(4)) {
    case 0:
      return Expr::neg(random_regular(rng, d, 2));
    case 1: {
      std::vector<Expr> atoms;
      const auto k = 2 + rng.below(2);
      for (std::uint64_t i = 0; i < k; ++i) atoms.push_back(random_smooth(rng, d));
      return Expr::min(std::move(atoms));
    }
    default:
      return random_regular(rng, d, 3);
  }
}

// A point in [-2, 2]^d; half of the time on the half-integer lattice.
inline Eigen::VectorXd random_point(Rng& rng, Eigen::Index d) {
  if (rng.below(2) == 0) return 0.5 * integer_vector(rng, d, -4, 4);
  return rng.uniform_vector(d, -2.0, 2.0);
}

inline Eigen::VectorXd random_direction(Rng& rng, Eigen::Index d) {
  Eigen::VectorXd h = rng.uniform_vector(d, -1.0, 1.0);
  if (h.norm() < 1e-3) h(0) = 1.0;
  return h / h.norm();
}

inline nsdp::Grid unit_grid(Eigen::Index dim, std::size_t points) {
  std::vector<double> axis;
  for (std::size_t i = 0; i < points; ++i) {
    axis.push_back(std::round((-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(points - 1)) * 1e10) / 1e10);
  }
  return nsdp::Grid(std::vector<std::vector<double>>(static_cast<std::size_t>(dim), axis));
}

inline nsdp::FeasibilitySet unit_box(Eigen::Index action_dim, Eigen::Index state_dim) {
  return nsdp::FeasibilitySet::box(Eigen::VectorXd::Constant(action_dim, -1.0),
                                   Eigen::VectorXd::Constant(action_dim, 1.0), state_dim);
}

// c * |y - A x - s|^2 over (x, y) as a quadratic atom.
inline Expr tracking_cost(const Eigen::MatrixXd& A, const Eigen::VectorXd& s, double c) {
  const Eigen::Index n = A.cols(), m = A.rows();
  Eigen::MatrixXd M(m, n + m);
  M << -A, Eigen::MatrixXd::Identity(m, m);
  const Eigen::MatrixXd Q = 2.0 * c * M.transpose() * M;
  const Eigen::VectorXd a = -2.0 * c * M.transpose() * s;
  return nsdp::quadratic(Q, a, c * s.squaredNorm());
}

inline Expr tracking_cost(Eigen::Index dim, const Eigen::VectorXd& s, double c) {
  return tracking_cost(Eigen::MatrixXd::Identity(dim, dim), s, c);
}

// Random refinement of a partition.
inline nsdp::Partition refine(Rng& rng, const nsdp::Partition& coarse) {
  nsdp::Partition fine;
  for (const auto& cell : coarse) {
    if (cell.size() < 2 || rng.below(2) == 0) {
      fine.push_back(cell);
      continue;
    }
    const auto split = 1 + rng.below(cell.size() - 1);
    fine.emplace_back(cell.begin(), cell.begin() + static_cast<long>(split));
    fine.emplace_back(cell.begin() + static_cast<long>(split), cell.end());
  }
  return fine;
}

// Random finite-horizon stochastic model: cell-constant convex quadratic
// costs, unit boxes, grids of `points` nodes per axis.
inline nsdp::StochasticDPModel random_stochastic_model(Rng& rng, std::size_t atoms, std::size_t stages,
                                                      Eigen::Index dim, std::size_t points) {
  nsdp::StochasticDPModel m;
  std::vector<double> w;
  double total = 0.0;
  for (std::size_t a = 0; a < atoms; ++a) {
    w.push_back(rng.uniform(0.5, 1.5));
    total += w.back();
  }
  for (auto& x : w) x /= total;
  // Renormalize the last atom so the probabilities sum to 1 up to rounding.
  double head = 0.0;
  for (std::size_t a = 0; a + 1 < atoms; ++a) head += w[a];
  w.back() = 1.0 - head;
  m.tree.probabilities = w;
  nsdp::Cell all;
  for (std::size_t a = 0; a < atoms; ++a) all.push_back(a);
  nsdp::Partition p{all};
  for (std::size_t t = 0; t < stages; ++t) {
    m.tree.partitions.push_back(p);
    p = refine(rng, p);
  }
  for (std::size_t t = 0; t < stages; ++t) {
    nsdp::StochasticStage s{unit_grid(dim, points), {}, {}};
    s.costs.resize(atoms, nsdp::constant(2 * dim, 0.0));
    s.feasibility.resize(atoms, unit_box(dim, dim));
    for (const auto& cell : m.tree.partitions[t]) {
      const Expr cost = tracking_cost(dim, rng.uniform_vector(dim, -0.5, 0.5), rng.uniform(0.5, 2.0));
      for (std::size_t a : cell) s.costs[a] = cost;
    }
    m.stages.push_back(std::move(s));
  }
  return m;
}

// An adapted process on grid nodes for the model's tree.
inline nsdp::AdaptedProcess random_adapted_process(Rng& rng, const nsdp::StochasticDPModel& m) {
  nsdp::AdaptedProcess process;
  for (std::size_t t = 0; t <= m.stages.size(); ++t) {
    const nsdp::Grid& g = m.grid(t);
    std::vector<Eigen::VectorXd> stage(m.tree.atoms());
    for (const auto& cell : m.tree.partition(static_cast<long>(t) - 1)) {
      const Eigen::VectorXd v = g.node(rng.below(g.size()));
      for (std::size_t a : cell) stage[a] = v;
    }
    process.push_back(std::move(stage));
  }
  return process;
}

}  // namespace testing_support
