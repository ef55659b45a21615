#include <gtest/gtest.h>

#include <cmath>

#include "nsdp/dp.hpp"
#include "nsdp/errors.hpp"
#include "oracles/oracles.hpp"
#include "support/random_models.hpp"

using namespace nsdp;
using testing_support::tracking_cost;
using testing_support::unit_box;
using testing_support::unit_grid;

namespace {

Eigen::VectorXd v1(double a) { return Eigen::VectorXd::Constant(1, a); }

// (y - 0.5)^2 over (x, y)
Expr y_to_half() { return quadratic(Eigen::Vector2d(0, 2).asDiagonal().toDenseMatrix(), Eigen::Vector2d(0, -1), 0.25); }

FeasibilitySet interval(double lo, double hi) { return FeasibilitySet::box(v1(lo), v1(hi), 1); }

DPModel single_stage(Expr cost, FeasibilitySet set) {
  DPModel m;
  m.stages.push_back(Stage{unit_grid(1, 21), std::move(set), std::move(cost)});
  return m;
}

DPModel two_stage_quadratic() {
  DPModel m;
  for (int t = 0; t < 2; ++t) m.stages.push_back(Stage{unit_grid(1, 21), unit_box(1, 1), tracking_cost(1, v1(0), 1.0)});
  return m;
}

}  // namespace

TEST(Grid, IndexingRoundTrips) {
  const Grid g({{0.0, 1.0, 2.0}, {-1.0, 1.0}});
  EXPECT_EQ(g.size(), 6u);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.flat_index(g.multi_index(i)), i);
  EXPECT_EQ(g.node(1), Eigen::Vector2d(0.0, 1.0));
  EXPECT_EQ(g.max_spacing(), 2.0);
  EXPECT_TRUE(g.contains(Eigen::Vector2d(2.0, 0.0)));
  EXPECT_FALSE(g.contains(Eigen::Vector2d(2.1, 0.0)));
  EXPECT_THROW(Grid({{0.0, 0.0}}), std::invalid_argument);
}

TEST(Grid, InterpolationIsExactOnAffineData) {
  const Grid g({{0.0, 0.5, 1.0}, {0.0, 1.0}});
  std::vector<StageValue> values;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Eigen::VectorXd x = g.node(i);
    values.push_back(StageValue::finite(1.0 + 2.0 * x(0) - 3.0 * x(1) + x(0) * x(1)));
  }
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Vector2d x(rng.uniform(), rng.uniform());
    // Multilinear interpolation reproduces bilinear functions.
    EXPECT_NEAR(*interpolate(g, values, x), 1.0 + 2.0 * x(0) - 3.0 * x(1) + x(0) * x(1), 1e-14);
  }
  EXPECT_FALSE(interpolate(g, values, Eigen::Vector2d(1.5, 0.0)).has_value());
  values[0] = StageValue::infeasible();
  EXPECT_FALSE(interpolate(g, values, Eigen::Vector2d(0.1, 0.1)).has_value());
  EXPECT_TRUE(interpolate(g, values, Eigen::Vector2d(0.5, 0.0)).has_value());
}

TEST(StageValue, InfeasibleValueThrows) {
  EXPECT_THROW(StageValue::infeasible().value(), std::logic_error);
  EXPECT_EQ(StageValue::finite(2.0).value(), 2.0);
}

TEST(Summability, Examples) {
  const SummabilityResult geometric = check_summability(BoundSequence::geometric(1.0, 0.5), 1e-6);
  ASSERT_TRUE(geometric.ok);
  EXPECT_EQ(geometric.horizon, 20u);
  EXPECT_DOUBLE_EQ(geometric.tail, std::pow(0.5, 20));
  const SummabilityResult zero = check_summability(BoundSequence::geometric(0.0, 0.5), 1e-6);
  ASSERT_TRUE(zero.ok);
  EXPECT_EQ(zero.horizon, 0u);
  const SummabilityResult constant = check_summability(BoundSequence::geometric(1.0, 1.0), 1e-6);
  EXPECT_FALSE(constant.ok);
  EXPECT_FALSE(constant.message.empty());
}

TEST(Summability, TailMatchesDirectSum) {
  const BoundSequence b({{2.0, 0.3}, {1.0, 0.7}});
  for (std::size_t T : {0u, 3u, 10u}) {
    double direct = 0.0;
    for (std::size_t t = T + 1; t < 400; ++t) direct += b.at(t);
    EXPECT_NEAR(b.tail_after(T), direct, 1e-12);
  }
  EXPECT_EQ(BoundSequence::geometric(1.0, 1.0).tail_after(3), std::numeric_limits<double>::infinity());
}

TEST(Model, ValidationRejectsDimensionMismatch) {
  DPModel m = two_stage_quadratic();
  m.stages[1].grid = unit_grid(2, 3);
  EXPECT_THROW(validate_model(m), ModelError);
}

TEST(Model, TailStagesAreDiscounted) {
  DPModel m = single_stage(y_to_half(), interval(0, 1));
  m.tail = TailExtension{0.5};
  const Eigen::Vector2d p(0.3, 0.9);
  EXPECT_DOUBLE_EQ(m.stage(2).cost.evaluate(p), 0.25 * m.stage(0).cost.evaluate(p));
  EXPECT_FALSE(m.last_stage().has_value());
}

TEST(Solve, SingleStageQuadratic) {
  const DPModel m = single_stage(y_to_half(), interval(0, 1));
  const ValueTable table = solve_value(m);
  EXPECT_EQ(table.horizon, 0u);
  for (std::size_t i = 0; i < m.grid(0).size(); ++i) {
    EXPECT_EQ(table.values[0][i].value(), 0.0);
    ASSERT_EQ(table.policies[0][i].size(), 1u);
    EXPECT_EQ(table.policies[0][i].front()(0), 0.5);
  }
}

TEST(Solve, TwoStageQuadratic) {
  const DPModel m = two_stage_quadratic();
  const ValueTable table = solve_value(m);
  EXPECT_EQ(table.horizon, 1u);
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t i = 0; i < m.grid(t).size(); ++i) {
      EXPECT_EQ(table.values[t][i].value(), 0.0);
      EXPECT_EQ(table.policies[t][i].front(), m.grid(t).node(i));
    }
  }
}

TEST(Solve, GridOnlyMatchesPathEnumeration) {
  Rng rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    DPModel m;
    for (int t = 0; t < 3; ++t) {
      const Expr cost = Expr::max({affine(rng.uniform_vector(2, -1, 1)), Expr::abs(affine(rng.uniform_vector(2, -1, 1), 0.2))});
      m.stages.push_back(Stage{unit_grid(1, 5), unit_box(1, 1), cost});
    }
    SolveOptions options;
    options.candidates = CandidateMode::grid_only;
    const ValueTable table = solve_value(m, options);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_EQ(table.values[0][i].value(), oracle::brute_force_value(m, table.horizon, m.grid(0).node(i)));
    }
  }
}

TEST(Solve, ProjectionCandidatesReachOffGridBoundary) {
  // Box [0, 0.55] on a 0.1 grid: the minimizer of (y - 0.7)^2 is the
  // projected boundary point 0.55.
  const Expr cost = quadratic(Eigen::Vector2d(0, 2).asDiagonal().toDenseMatrix(), Eigen::Vector2d(0, -1.4), 0.49);
  const DPModel m = single_stage(cost, interval(0, 0.55));
  const ValueTable table = solve_value(m);
  EXPECT_NEAR(table.values[0][0].value(), 0.0225, 1e-12);
  EXPECT_EQ(table.policies[0][0].front()(0), 0.55);
}

TEST(Solve, InfeasibleNodesGetSentinel) {
  // y <= x with y in [0, 1] (grid [-1, 1]): nodes with x < 0 are infeasible.
  Eigen::MatrixXd A(3, 1), C(3, 1);
  A << 1, 1, -1;
  C << 1, 0, 0;
  const DPModel m = single_stage(y_to_half(), FeasibilitySet::polyhedral(A, Eigen::Vector3d(0, 1, 0), C));
  const ValueTable table = solve_value(m);
  for (std::size_t i = 0; i < m.grid(0).size(); ++i) {
    EXPECT_EQ(table.values[0][i].is_finite(), m.grid(0).node(i)(0) >= 0.0);
  }
}

TEST(Solve, AllInfeasibleStageThrows) {
  const DPModel m = single_stage(y_to_half(), FeasibilitySet::polyhedral(Eigen::MatrixXd::Ones(1, 1), v1(-5),
                                                                         Eigen::MatrixXd::Zero(1, 1)));
  EXPECT_THROW(solve_value(m), AllInfeasibleStage);
}

TEST(Solve, TruncatedModeUsesSummabilityHorizon) {
  DPModel m = single_stage(Expr::scale(0.25, tracking_cost(1, v1(0), 1.0)), unit_box(1, 1));
  m.tail = TailExtension{0.5};
  m.bounds = BoundSequence::geometric(1.0, 0.5);
  m.horizon = Horizon{HorizonMode::truncated, 1e-6};
  const ValueTable table = solve_value(m);
  EXPECT_EQ(table.horizon, 20u);
  EXPECT_DOUBLE_EQ(table.tail_error, std::pow(0.5, 20));
}

TEST(Solve, ThreadCountDoesNotChangeResults) {
  Rng rng(32);
  DPModel m;
  for (int t = 0; t < 3; ++t) {
    m.stages.push_back(Stage{unit_grid(2, 7), unit_box(2, 2), tracking_cost(2, rng.uniform_vector(2, -0.3, 0.3), 1.0)});
  }
  SolveOptions serial, parallel;
  parallel.threads = 4;
  const ValueTable a = solve_value(m, serial), b = solve_value(m, parallel);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.policies, b.policies);
}

TEST(Solve, TruncationChangesValuesByAtMostTail) {
  DPModel m = single_stage(tracking_cost(1, v1(0.3), 0.5), unit_box(1, 1));
  m.tail = TailExtension{0.6};
  m.bounds = BoundSequence::geometric(0.5 * 2.3 * 2.3, 0.6);
  m.horizon = Horizon{HorizonMode::truncated, 1e-3};
  const SummabilityResult s = check_summability(m);
  SolveOptions options;
  options.horizon_override = s.horizon;
  const ValueTable a = solve_value(m, options);
  options.horizon_override = s.horizon + 5;
  const ValueTable b = solve_value(m, options);
  for (std::size_t i = 0; i < a.values[0].size(); ++i) {
    EXPECT_LE(std::abs(a.values[0][i].value() - b.values[0][i].value()), m.bounds->tail_after(s.horizon) + 1e-12);
  }
}

TEST(Policy, Examples) {
  const DPModel quad = single_stage(y_to_half(), interval(0, 1));
  const ValueTable qt = solve_value(quad);
  for (double x : {-1.0, 0.0, 0.37}) {
    const Polytope p = extract_policy(quad, qt, 0, v1(x));
    ASSERT_TRUE(p.is_singleton());
    EXPECT_EQ(p.generators().front()(0), 0.5);
  }
  const DPModel abs_model = single_stage(Expr::abs(coordinate(2, 1)), interval(-1, 1));
  const Polytope z = extract_policy(abs_model, solve_value(abs_model), 0, v1(0.3));
  ASSERT_TRUE(z.is_singleton());
  EXPECT_EQ(z.generators().front()(0), 0.0);
  const DPModel flat = single_stage(constant(2, 0.0), interval(0, 1));
  const Polytope all = extract_policy(flat, solve_value(flat), 0, v1(0.0));
  EXPECT_EQ(all.size(), 11u);  // grid nodes in [0, 1]
}

TEST(Policy, EmptyFeasibleSetThrows) {
  Eigen::MatrixXd A(3, 1), C(3, 1);
  A << 1, 1, -1;
  C << 1, 0, 0;
  const DPModel m = single_stage(y_to_half(), FeasibilitySet::polyhedral(A, Eigen::Vector3d(0, 1, 0), C));
  const ValueTable table = solve_value(m);
  EXPECT_THROW(extract_policy(m, table, 0, v1(-0.5)), EmptyPolicySet);
}

TEST(Bellman, ResidualExamples) {
  const DPModel m = two_stage_quadratic();
  const ValueTable table = solve_value(m);
  for (double r : bellman_residual(m, table, {v1(0.5), v1(0.5), v1(0.5)})) EXPECT_LE(std::abs(r), 1e-9);
  const std::vector<double> perturbed = bellman_residual(m, table, {v1(0.5), v1(0.8), v1(0.8)});
  EXPECT_NEAR(perturbed[0], -0.09, 1e-12);
  EXPECT_LE(perturbed[0], -0.08);
  const DPModel flat = single_stage(constant(2, 0.0), interval(-1, 1));
  for (double r : bellman_residual(flat, solve_value(flat), {v1(0.2), v1(-0.7)})) EXPECT_EQ(r, 0.0);
}

TEST(Bellman, InadmissibleProgramLocated) {
  const DPModel m = two_stage_quadratic();
  const ValueTable table = solve_value(m);
  try {
    bellman_residual(m, table, {v1(0.5), v1(0.5), v1(1.5)});
    FAIL() << "expected InadmissibleProgram";
  } catch (const InadmissibleProgram& e) {
    EXPECT_EQ(e.stage(), 1u);
  }
}

TEST(Bellman, ConsistentAlongExtractedPolicies) {
  Rng rng(33);
  DPModel m;
  for (int t = 0; t < 3; ++t) {
    m.stages.push_back(Stage{unit_grid(1, 11), unit_box(1, 1),
                             Expr::sum({tracking_cost(1, v1(rng.uniform(-0.3, 0.3)), 1.0),
                                        Expr::abs(affine(Eigen::Vector2d(0, 1), rng.uniform(-0.5, 0.5)))})});
  }
  const ValueTable table = solve_value(m);
  for (std::size_t t = 0; t <= table.horizon; ++t) {
    for (std::size_t i = 0; i < m.grid(t).size(); ++i) {
      const Eigen::VectorXd x = m.grid(t).node(i);
      for (const auto& y : table.policies[t][i]) {
        const double next = *table.interpolate(t + 1, y);
        EXPECT_NEAR(table.values[t][i].value() - m.stage(t).cost.evaluate(join(x, y)) - next, 0.0,
                    table.options.policy_tol + 1e-12);
      }
    }
  }
}

TEST(Lipschitz, TableSlopesBoundedByCostLipschitzConstant) {
  // u = 0.7 |x - 0.2| + (y - 0.5)^2: v0 = 0.7 |x - 0.2|, slope bounded by 0.7.
  const Expr cost = Expr::sum({Expr::scale(0.7, Expr::abs(affine(Eigen::Vector2d(1, 0), -0.2))), y_to_half()});
  const DPModel m = single_stage(cost, interval(0, 1));
  const ValueTable table = solve_value(m);
  const auto& axis = m.grid(0).axes()[0];
  for (std::size_t i = 0; i + 1 < axis.size(); ++i) {
    const double slope = (table.values[0][i + 1].value() - table.values[0][i].value()) / (axis[i + 1] - axis[i]);
    EXPECT_LE(std::abs(slope), 0.7 + table.interpolation_tolerance[0] + 1e-12);
  }
}
