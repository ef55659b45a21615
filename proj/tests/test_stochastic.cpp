#include <gtest/gtest.h>

#include <cmath>

#include "nsdp/errors.hpp"
#include "nsdp/stochastic.hpp"
#include "oracles/oracles.hpp"
#include "support/random_models.hpp"

using namespace nsdp;
using testing_support::tracking_cost;
using testing_support::unit_box;
using testing_support::unit_grid;

namespace {

Eigen::VectorXd v1(double a) { return Eigen::VectorXd::Constant(1, a); }
std::vector<Eigen::VectorXd> pair(double a, double b) { return {v1(a), v1(b)}; }

ScenarioTree two_atom_tree() { return ScenarioTree{{0.5, 0.5}, {{{0, 1}}, {{0}, {1}}}}; }

// phi0 = (y - x)^2, phi1(omega) = (z - a(omega) y)^2 with a = (1, 2).
StochasticDPModel euler_model() {
  StochasticDPModel m;
  m.tree = two_atom_tree();
  const Expr phi0 = tracking_cost(1, v1(0), 1.0);
  m.stages.push_back(StochasticStage{unit_grid(1, 21), {phi0, phi0}, {unit_box(1, 1), unit_box(1, 1)}});
  std::vector<Expr> phi1;
  for (double a : {1.0, 2.0}) phi1.push_back(tracking_cost(Eigen::MatrixXd::Constant(1, 1, a), v1(0), 1.0));
  m.stages.push_back(StochasticStage{unit_grid(1, 21), phi1, {unit_box(1, 1), unit_box(1, 1)}});
  return m;
}

std::string premise_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const PremiseViolation& e) {
    return e.premise();
  }
  return "";
}

}  // namespace

TEST(Tree, ValidationExamples) {
  EXPECT_TRUE(validate_tree(two_atom_tree()).ok());
  const Diagnostics swapped = validate_tree(ScenarioTree{{0.5, 0.5}, {{{0}, {1}}, {{0, 1}}}});
  ASSERT_FALSE(swapped.ok());
  EXPECT_NE(swapped.messages.front().find("refinement violated"), std::string::npos);
  const Diagnostics mass = validate_tree(ScenarioTree{{0.5, 0.6}, {{{0, 1}}}});
  ASSERT_FALSE(mass.ok());
  EXPECT_NE(mass.messages.front().find("1.1"), std::string::npos);
  EXPECT_FALSE(validate_tree(ScenarioTree{{1.0, 0.0}, {{{0, 1}}}}).ok());
  EXPECT_FALSE(validate_tree(ScenarioTree{{0.5, 0.5}, {{{0}}}}).ok());
}

TEST(Tree, PartitionConventions) {
  const ScenarioTree tree = two_atom_tree();
  EXPECT_EQ(tree.partition(-1), tree.partition(0));
  EXPECT_EQ(tree.partition(7), tree.partition(1));
  EXPECT_EQ(tree.cell_of(1, 1), 1u);
  EXPECT_EQ(tree.cell_of(0, 1), 0u);
}

TEST(Adapted, Examples) {
  const ScenarioTree tree = two_atom_tree();
  EXPECT_TRUE(validate_adapted({pair(0, 0), pair(1, 1)}, tree).ok);
  const AdaptednessResult bad = validate_adapted({pair(0, 0), pair(1, 2)}, tree);
  ASSERT_FALSE(bad.ok);
  EXPECT_EQ(bad.stage, 1u);
  EXPECT_EQ(bad.cell, (Cell{0, 1}));
  EXPECT_EQ(bad.first_value(0), 1.0);
  EXPECT_EQ(bad.second_value(0), 2.0);
  EXPECT_TRUE(validate_adapted({pair(0, 0)}, tree).ok);
  // Stage 2 reads partition(1), which is fine.
  EXPECT_TRUE(validate_adapted({pair(0, 0), pair(1, 1), pair(3, 4)}, tree).ok);
}

TEST(Adapted, EqualityIsExact) {
  const ScenarioTree tree = two_atom_tree();
  EXPECT_FALSE(validate_adapted({pair(0, 0), pair(0.1, std::nextafter(0.1, 1.0))}, tree).ok);
}

TEST(Model, CellConstancyEnforced) {
  StochasticDPModel m = euler_model();
  EXPECT_TRUE(validate_stochastic_model(m).ok());
  m.stages[0].costs[1] = tracking_cost(1, v1(0.5), 1.0);
  EXPECT_FALSE(validate_stochastic_model(m).ok());
  EXPECT_THROW(reduce_to_deterministic(m), ModelError);
}

TEST(Reduction, BlockCounts) {
  const StochasticDPModel m = euler_model();
  const DPModel r = reduce_to_deterministic(m);
  EXPECT_EQ(r.grid(0).dim(), 1);
  EXPECT_EQ(r.grid(1).dim(), 1);
  EXPECT_EQ(r.grid(2).dim(), 2);
}

TEST(Reduction, SingleAtomIsIdentity) {
  StochasticDPModel m;
  m.tree = ScenarioTree{{1.0}, {{{0}}}};
  m.stages.push_back(StochasticStage{unit_grid(1, 11), {tracking_cost(1, v1(0.2), 1.0)}, {unit_box(1, 1)}});
  const DPModel r = reduce_to_deterministic(m);
  const Eigen::Vector2d p(0.3, -0.4);
  EXPECT_EQ(r.stage(0).cost.evaluate(p), m.stages[0].costs[0].evaluate(p));
  EXPECT_EQ(r.stage(0).feasibility, m.stages[0].feasibility[0]);
  EXPECT_EQ(r.grid(0), m.stages[0].grid);
}

TEST(Reduction, ObjectiveRoundTripsExactly) {
  Rng rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    const StochasticDPModel m = testing_support::random_stochastic_model(rng, 3, 3, 1, 5);
    const DPModel r = reduce_to_deterministic(m);
    const AdaptedProcess process = testing_support::random_adapted_process(rng, m);
    double direct = 0.0;
    for (std::size_t t = 0; t + 1 < process.size(); ++t) {
      direct += r.stage(t).cost.evaluate(join(flatten(m, t, process[t]), flatten(m, t + 1, process[t + 1])));
    }
    EXPECT_EQ(stochastic_objective(m, process), direct);
    for (std::size_t t = 0; t + 1 < process.size(); ++t) {
      const bool atomwise = [&] {
        for (std::size_t a = 0; a < m.tree.atoms(); ++a) {
          if (!feasible(m.stages[t].feasibility[a], process[t][a], process[t + 1][a])) return false;
        }
        return true;
      }();
      EXPECT_EQ(atomwise, feasible(r.stage(t).feasibility, flatten(m, t, process[t]), flatten(m, t + 1, process[t + 1])));
    }
  }
}

TEST(IntegralCost, Examples) {
  StochasticDPModel m = euler_model();
  m.stages[1].costs = {constant(2, 1.0), constant(2, 1.0)};
  EXPECT_EQ(integral_cost(m, 1, pair(0, 0), pair(0, 0)), 1.0);
  m.stages[1].costs = {constant(2, 0.0), constant(2, 2.0)};
  EXPECT_EQ(integral_cost(m, 1, pair(0, 0), pair(0, 0)), 1.0);
}

TEST(IntegralCost, LinearInCost) {
  Rng rng(52);
  StochasticDPModel a = euler_model(), b = euler_model(), both = euler_model();
  for (std::size_t k = 0; k < 2; ++k) {
    a.stages[1].costs[k] = affine(rng.uniform_vector(2, -1, 1), rng.uniform(-1, 1));
    b.stages[1].costs[k] = tracking_cost(1, v1(rng.uniform(-1, 1)), 1.0);
    both.stages[1].costs[k] = Expr::sum({a.stages[1].costs[k], b.stages[1].costs[k]});
  }
  for (int trial = 0; trial < 10; ++trial) {
    const double y = rng.uniform(-1, 1);
    const auto z = pair(rng.uniform(-1, 1), rng.uniform(-1, 1));
    EXPECT_NEAR(integral_cost(both, 1, pair(y, y), z), integral_cost(a, 1, pair(y, y), z) + integral_cost(b, 1, pair(y, y), z),
                1e-14);
  }
}

TEST(IntegralSubdiff, Examples) {
  StochasticDPModel m = euler_model();
  m.stages[1].costs = {Expr::abs(coordinate(2, 0)), Expr::abs(coordinate(2, 0))};
  const IntegralSubdiff s = integral_subdiff(m, 1, pair(0, 0), pair(0.2, 0.3), Block::x);
  for (const auto& p : s.per_atom) EXPECT_TRUE(hull_equal(p, Polytope({v1(-1), v1(1)})));
  EXPECT_TRUE(s.audit.ok);
  const StochasticDPModel smooth = euler_model();
  const IntegralSubdiff g = integral_subdiff(smooth, 1, pair(0.5, 0.5), pair(0.2, 0.3), Block::y);
  ASSERT_TRUE(g.per_atom[1].is_singleton());
  EXPECT_NEAR(g.per_atom[1].generators().front()(0), 2.0 * (0.3 - 1.0), 1e-12);
  EXPECT_TRUE(g.audit.ok);
}

TEST(IntegralSubdiff, NonRegularAtomRefused) {
  StochasticDPModel m = euler_model();
  m.stages[1].costs = {Expr::neg(Expr::abs(coordinate(2, 0))), Expr::neg(Expr::abs(coordinate(2, 0)))};
  EXPECT_EQ(premise_of([&] { integral_subdiff(m, 1, pair(0, 0), pair(0, 0), Block::x); }), "regularity");
}

TEST(IntegralSubdiff, AuditMatchesReducedCostOnRandomRegularCosts) {
  Rng rng(53);
  for (int trial = 0; trial < 10; ++trial) {
    StochasticDPModel m = euler_model();
    for (std::size_t k = 0; k < 2; ++k) m.stages[1].costs[k] = testing_support::random_regular(rng, 2, 3);
    const double y = rng.uniform(-1, 1);
    const IntegralSubdiff s = integral_subdiff(m, 1, pair(y, y), pair(rng.uniform(-1, 1), rng.uniform(-1, 1)), Block::y);
    EXPECT_TRUE(s.audit.ok) << "max error " << s.audit.max_error;
  }
}

TEST(SelectionNormals, Examples) {
  StochasticDPModel m = euler_model();
  m.stages[1].feasibility = {FeasibilitySet::box(v1(0), v1(1), 1), FeasibilitySet::box(v1(0), v1(1), 1)};
  const SelectionNormals n = selection_normal_cone(m, 1, pair(0, 0), pair(1, 0.5));
  ASSERT_EQ(n.per_atom[0].rays().size(), 1u);
  EXPECT_EQ(n.per_atom[0].rays().front()(0), 1.0);
  EXPECT_TRUE(n.per_atom[1].is_zero());
  EXPECT_TRUE(n.audit_ok);
  const SelectionNormals interior = selection_normal_cone(m, 1, pair(0, 0), pair(0.5, 0.5));
  for (const auto& c : interior.per_atom) EXPECT_TRUE(c.is_zero());
}

TEST(SelectionNormals, AgreesWithReducedSetOnPolyhedralInstances) {
  Rng rng(54);
  for (int trial = 0; trial < 10; ++trial) {
    StochasticDPModel m = euler_model();
    for (std::size_t k = 0; k < 2; ++k) {
      // z <= c_k + d_k y and z >= -1
      Eigen::MatrixXd A(2, 1), C(2, 1);
      A << 1, -1;
      C << rng.uniform(-1, 1), 0;
      m.stages[1].feasibility[k] = FeasibilitySet::polyhedral(A, Eigen::Vector2d(rng.uniform(0, 1), 1), C);
    }
    const double y = rng.uniform(-1, 1);
    std::vector<Eigen::VectorXd> g;
    for (std::size_t k = 0; k < 2; ++k) {
      const FeasibilitySet& S = m.stages[1].feasibility[k];
      const double top = S.rhs(v1(y))(0);
      g.push_back(v1(rng.below(2) ? top : std::max(-1.0, top - 0.5)));
    }
    EXPECT_TRUE(selection_normal_cone(m, 1, pair(y, y), g).audit_ok);
  }
}

TEST(StochasticSubdiff, Examples) {
  StochasticDPModel m = euler_model();
  const Expr abs_x = Expr::abs(coordinate(2, 0));
  m.stages[1].costs = {Expr::sum({abs_x, m.stages[1].costs[0]}), Expr::sum({abs_x, m.stages[1].costs[1]})};
  const DPModel r = reduce_to_deterministic(m);
  const ValueTable table = solve_value(r);
  const StochasticSubdiff s = stochastic_value_subdiff(m, r, table, 1, pair(0, 0), pair(0, 0));
  for (const auto& p : s.per_atom) EXPECT_TRUE(hull_equal(p, Polytope({v1(-1), v1(1)})));
  EXPECT_FALSE(s.strict.has_value());
}

TEST(StochasticSubdiff, SmoothCostsGiveStrictFamily) {
  const StochasticDPModel m = euler_model();
  const DPModel r = reduce_to_deterministic(m);
  const ValueTable table = solve_value(r);
  const StochasticSubdiff s = stochastic_value_subdiff(m, r, table, 1, pair(0.2, 0.2), pair(0.2, 0.4));
  ASSERT_TRUE(s.strict.has_value());
  EXPECT_NEAR((*s.strict)[0](0), 0.0, 1e-12);
  EXPECT_NEAR((*s.strict)[1](0), 0.0, 1e-12);
  EXPECT_TRUE(s.audit_ok);
}

TEST(StochasticSubdiff, StateIndependentCostsGiveZeroFamily) {
  StochasticDPModel m = euler_model();
  const Expr z_only = quadratic(Eigen::Vector2d(0, 2).asDiagonal().toDenseMatrix(), Eigen::Vector2d(0, -0.6), 0.09);
  m.stages[1].costs = {z_only, z_only};
  const DPModel r = reduce_to_deterministic(m);
  const ValueTable table = solve_value(r);
  const StochasticSubdiff s = stochastic_value_subdiff(m, r, table, 1, pair(0.1, 0.1), pair(0.3, 0.3));
  ASSERT_TRUE(s.strict.has_value());
  for (const auto& g : *s.strict) EXPECT_EQ(g(0), 0.0);
}

TEST(StochasticEuler, MemberAtZeroProgram) {
  const StochasticDPModel m = euler_model();
  const DPModel r = reduce_to_deterministic(m);
  const ValueTable table = solve_value(r);
  const StochasticEuler e = stochastic_euler_check(m, r, table, 0, pair(0, 0), pair(0, 0), pair(0, 0));
  EXPECT_TRUE(e.member());
  ASSERT_EQ(e.atoms.size(), 2u);
  for (const auto& atom : e.atoms) {
    EXPECT_EQ(atom.cost_y.generators().front()(0), 0.0);
    EXPECT_EQ(atom.next_cost_x.generators().front()(0), 0.0);
    EXPECT_TRUE(atom.normal.is_zero());
  }
}

TEST(StochasticEuler, PerturbedProgramRejected) {
  const StochasticDPModel m = euler_model();
  const DPModel r = reduce_to_deterministic(m);
  const ValueTable table = solve_value(r);
  const StochasticEuler e = stochastic_euler_check(m, r, table, 0, pair(0, 0), pair(0.4, 0.4), pair(0.4, 0.8));
  EXPECT_FALSE(e.member());
  const AtomEuler& second = e.atoms[1];
  EXPECT_NEAR(second.cost_y.generators().front()(0), 0.8, 1e-12);
  EXPECT_NEAR(second.next_cost_x.generators().front()(0), 0.0, 1e-12);
  ASSERT_TRUE(second.membership.separator.has_value());
  EXPECT_EQ((*second.membership.separator)(0), -1.0);
}

TEST(StochasticEuler, RefusesNonAdaptedInput) {
  const StochasticDPModel m = euler_model();
  const DPModel r = reduce_to_deterministic(m);
  const ValueTable table = solve_value(r);
  EXPECT_THROW(stochastic_euler_check(m, r, table, 0, pair(0, 0), pair(0.1, 0.2), pair(0.1, 0.2)), AdaptednessViolation);
  EXPECT_THROW(stochastic_euler_check(m, r, table, 0, pair(0, 0.5), pair(0, 0), pair(0, 0)), AdaptednessViolation);
}

TEST(StochasticEuler, SingleAtomMatchesDeterministic) {
  StochasticDPModel m;
  m.tree = ScenarioTree{{1.0}, {{{0}}}};
  DPModel d;
  for (double s : {0.2, -0.1}) {
    m.stages.push_back(StochasticStage{unit_grid(1, 21), {tracking_cost(1, v1(s), 1.0)}, {unit_box(1, 1)}});
    d.stages.push_back(Stage{unit_grid(1, 21), unit_box(1, 1), tracking_cost(1, v1(s), 1.0)});
  }
  const DPModel r = reduce_to_deterministic(m);
  const ValueTable rt = solve_value(r), dt = solve_value(d);
  for (double y : {0.2, 0.6}) {
    const StochasticEuler se = stochastic_euler_check(m, r, rt, 0, {v1(0)}, {v1(y)}, {v1(y - 0.1)});
    const EulerCertificate de = euler_check(d, dt, 0, v1(0), v1(y), v1(y - 0.1));
    EXPECT_EQ(se.member(), de.member());
    EXPECT_EQ(se.atoms[0].residual_l1, de.residual_l1);
    EXPECT_EQ(se.atoms[0].cost_y.generators(), de.cost_y.generators());
    if (!de.member()) {
      EXPECT_EQ(*se.atoms[0].membership.separator, *de.membership.separator);
    }
  }
}

TEST(Assumptions, EnvelopeExamples) {
  StochasticDPModel m = euler_model();
  m.atom_bounds = {BoundSequence::geometric(1.0, 0.5), BoundSequence::geometric(1.0, 0.5)};
  m.alpha = {2.0, 2.0};
  const AssumptionReport ok = check_assumptions(m);
  EXPECT_TRUE(ok.ok);
  EXPECT_DOUBLE_EQ(ok.bound_sums[0], 2.0);
  m.atom_bounds = {BoundSequence::geometric(1.0, 1.0), BoundSequence::geometric(1.0, 0.5)};
  const AssumptionReport bad = check_assumptions(m);
  EXPECT_FALSE(bad.ok);
  EXPECT_FALSE(bad.envelope_ok[0]);
  EXPECT_FALSE(bad.messages.empty());
}

TEST(Assumptions, MissingDataBecomesNotes) {
  const AssumptionReport r = check_assumptions(euler_model());
  EXPECT_TRUE(r.ok);
  EXPECT_FALSE(r.notes.empty());
}

TEST(Assumptions, LipschitzEstimateOfAffineCost) {
  StochasticDPModel m = euler_model();
  const Expr slope3 = affine(Eigen::Vector2d(3, 0));
  m.stages[0].costs = {slope3, slope3};
  m.lipschitz = {{5.0, 5.0}, {10.0, 10.0}};
  const AssumptionReport r = check_assumptions(m);
  const auto it = std::find_if(r.lipschitz.begin(), r.lipschitz.end(),
                               [](const LipschitzEstimate& e) { return e.stage == 0 && e.atom == 0; });
  ASSERT_NE(it, r.lipschitz.end());
  EXPECT_NEAR(it->estimated_at_least, 3.0, 1e-6);
  EXPECT_FALSE(it->falsified);
  m.lipschitz = {{2.0, 2.0}, {10.0, 10.0}};
  EXPECT_FALSE(check_assumptions(m).ok);
}
