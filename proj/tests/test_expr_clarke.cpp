#include <gtest/gtest.h>

#include "nsdp/clarke.hpp"
#include "nsdp/errors.hpp"
#include "oracles/oracles.hpp"
#include "support/random_models.hpp"

using namespace nsdp;
using testing_support::random_direction;
using testing_support::random_exact_class;
using testing_support::random_point;
using testing_support::random_regular;

namespace {

Eigen::VectorXd v1(double a) { return Eigen::VectorXd::Constant(1, a); }
const Expr x1 = coordinate(1, 0);

}  // namespace

TEST(Evaluate, Examples) {
  EXPECT_EQ(Expr::abs(x1).evaluate(v1(-2)), 2.0);
  EXPECT_EQ(Expr::max({coordinate(2, 0), coordinate(2, 1)}).evaluate(Eigen::Vector2d(1, 3)), 3.0);
  const Expr e = Expr::sum({Expr::abs(x1), Expr::scale(2.0, Expr::max({x1, constant(1, 0.0)}))});
  EXPECT_EQ(e.evaluate(v1(-1)), 1.0);
}

TEST(Evaluate, DimensionMismatchThrows) {
  EXPECT_THROW(Expr::abs(x1).evaluate(Eigen::Vector2d(1, 1)), DimensionMismatch);
  EXPECT_THROW(Expr::sum({x1, coordinate(2, 0)}), DimensionMismatch);
}

TEST(Expr, ScaleRejectsNegativeFactor) { EXPECT_THROW(Expr::scale(-1.0, x1), std::invalid_argument); }

TEST(Expr, BindAndSelect) {
  // f(x, y) = x - 2y; bind y = 3 gives x - 6.
  const Expr f = affine(Eigen::Vector2d(1, -2));
  EXPECT_EQ(Expr::bind(f, 1, v1(3)).evaluate(v1(1)), -5.0);
  // select reads coordinates (2, 0) of a 3-vector.
  const Expr s = Expr::select(f, {2, 0}, 3);
  EXPECT_EQ(s.evaluate(Eigen::Vector3d(1, 5, 4)), 4.0 - 2.0);
  EXPECT_TRUE(hull_equal(clarke_gradient(s, Eigen::Vector3d(1, 5, 4)), Polytope::point(Eigen::Vector3d(-2, 0, 1))));
}

TEST(Expr, StructuralEquality) {
  const Expr a = Expr::max({x1, Expr::neg(x1)});
  const Expr b = Expr::max({coordinate(1, 0), Expr::neg(coordinate(1, 0))});
  EXPECT_TRUE(structurally_equal(a, b));
  EXPECT_FALSE(structurally_equal(a, Expr::min({x1, Expr::neg(x1)})));
}

TEST(Clarke, Examples) {
  EXPECT_TRUE(hull_equal(clarke_gradient(Expr::abs(x1), v1(0)), Polytope({v1(-1), v1(1)})));
  EXPECT_TRUE(hull_equal(clarke_gradient(Expr::max({coordinate(2, 0), coordinate(2, 1)}), Eigen::Vector2d(1, 1)),
                         Polytope({Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)})));
  const Polytope g = clarke_gradient(norm_squared(Eigen::Vector2d::Zero()), Eigen::Vector2d(2, 3));
  ASSERT_TRUE(g.is_singleton());
  EXPECT_EQ(g.generators().front(), Eigen::Vector2d(2, 3));
}

TEST(Clarke, ActiveToleranceSelectsBranches) {
  const Expr e = Expr::max({x1, constant(1, 0.0)});
  EXPECT_EQ(clarke_gradient(e, v1(1e-10)).size(), 2u);
  EXPECT_EQ(clarke_gradient(e, v1(1e-10), 0.0).size(), 1u);
}

TEST(Clarke, UndefinedGradientThrows) {
  auto atom = std::make_shared<CustomAtom>();
  atom->name = "sqrt_abs";
  atom->arity = 1;
  atom->eval = [](const Eigen::VectorXd& x) { return std::sqrt(std::abs(x(0))); };
  atom->grad = [](const Eigen::VectorXd& x) { return v1(0.5 / std::sqrt(std::abs(x(0)))); };
  const Expr e = Expr::atom(SmoothAtom(std::shared_ptr<const CustomAtom>(atom)));
  EXPECT_THROW(clarke_gradient(e, v1(0)), UndefinedGradient);
  EXPECT_NO_THROW(clarke_gradient(e, v1(4)));
}

TEST(GenDirDerivative, Examples) {
  EXPECT_EQ(gen_dir_derivative(Expr::abs(x1), v1(0), v1(1)), 1.0);
  EXPECT_EQ(gen_dir_derivative(Expr::abs(x1), v1(0), v1(-1)), 1.0);
  EXPECT_EQ(gen_dir_derivative(norm_squared(Eigen::Vector2d::Zero()), Eigen::Vector2d(2, 3), Eigen::Vector2d(1, 0)),
            2.0);
}

TEST(GenDirDerivative, MatchesFiniteDifferenceOracle) {
  Rng rng(11);
  for (int i = 0; i < 40; ++i) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.below(3));
    const Expr e = random_exact_class(rng, d);
    for (int k = 0; k < 20; ++k) {
      const Eigen::VectorXd x = random_point(rng, d), h = random_direction(rng, d);
      const double fd =
          oracle::fd_generalized_derivative([&](const Eigen::VectorXd& p) { return e.evaluate(p); }, x, h).value;
      EXPECT_NEAR(gen_dir_derivative(e, x, h), fd, 1e-3);
    }
  }
}

TEST(GenDirDerivative, PositivelyHomogeneousAndSubadditive) {
  Rng rng(12);
  for (int i = 0; i < 50; ++i) {
    const Expr e = random_exact_class(rng, 2);
    const Eigen::VectorXd x = random_point(rng, 2);
    const Eigen::VectorXd h1 = random_direction(rng, 2), h2 = random_direction(rng, 2);
    const double lambda = rng.uniform(0.0, 3.0);
    EXPECT_NEAR(gen_dir_derivative(e, x, lambda * h1), lambda * gen_dir_derivative(e, x, h1),
                1e-12 * (1.0 + std::abs(lambda * gen_dir_derivative(e, x, h1))));
    EXPECT_LE(gen_dir_derivative(e, x, h1 + h2), gen_dir_derivative(e, x, h1) + gen_dir_derivative(e, x, h2) + 1e-9);
  }
}

TEST(Clarke, NegationIsAntisymmetric) {
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    const Expr e = random_regular(rng, 2, 3);
    const Eigen::VectorXd x = random_point(rng, 2);
    EXPECT_TRUE(hull_equal(clarke_gradient(Expr::neg(e), x), clarke_gradient(e, x).negated()));
  }
}

TEST(Regularity, Examples) {
  EXPECT_TRUE(is_regular(Expr::max({x1, Expr::neg(x1)}), v1(0)).regular());
  const RegularityReport r = is_regular(Expr::neg(Expr::abs(x1)), v1(0));
  EXPECT_FALSE(r.regular());
  ASSERT_FALSE(r.trace.empty());
  EXPECT_NE(r.trace.front().find("neg"), std::string::npos);
  EXPECT_TRUE(is_regular(Expr::abs(x1), v1(1)).regular());
  EXPECT_TRUE(is_regular(Expr::neg(Expr::abs(x1)), v1(1)).regular());
  EXPECT_FALSE(is_regular(Expr::min({x1, Expr::neg(x1)}), v1(0)).regular());
}

TEST(Regularity, RegularExpressionsHaveDirectionalDerivativeEqualToSupport) {
  // For regular functions the one-sided derivative at x equals the support.
  Rng rng(14);
  for (int i = 0; i < 60; ++i) {
    const Expr e = random_regular(rng, 2, 3);
    const Eigen::VectorXd x = random_point(rng, 2), h = random_direction(rng, 2);
    ASSERT_TRUE(is_regular(e, x).regular());
    const double theta = 1e-6;
    const double one_sided = (e.evaluate(x + theta * h) - e.evaluate(x)) / theta;
    EXPECT_NEAR(one_sided, gen_dir_derivative(e, x, h), 1e-3);
  }
}

TEST(StrictProbe, Examples) {
  const auto g = strict_derivative_probe(norm_squared(Eigen::Vector2d::Zero()), Eigen::Vector2d(2, 3), 1e-4, 32);
  ASSERT_TRUE(g.has_value());
  EXPECT_EQ(*g, Eigen::Vector2d(2, 3));
  EXPECT_FALSE(strict_derivative_probe(Expr::abs(x1), v1(0), 1e-4, 32).has_value());
  const auto h = strict_derivative_probe(Expr::abs(x1), v1(0.5), 1e-4, 32);
  ASSERT_TRUE(h.has_value());
  EXPECT_EQ((*h)(0), 1.0);
}

TEST(StrictProbe, SingletonGradientImpliesProbeAgrees) {
  Rng rng(15);
  for (int i = 0; i < 50; ++i) {
    const Expr e = random_exact_class(rng, 2);
    const Eigen::VectorXd x = rng.uniform_vector(2, -2.0, 2.0);
    const Polytope g = clarke_gradient(e, x);
    if (!g.is_singleton()) continue;
    const auto probe = strict_derivative_probe(e, x, 1e-7, 16);
    ASSERT_TRUE(probe.has_value());
    EXPECT_EQ(*probe, g.generators().front());
  }
}

TEST(LocallySmooth, DetectsKinks) {
  EXPECT_FALSE(locally_smooth(Expr::abs(x1), v1(0)));
  EXPECT_TRUE(locally_smooth(Expr::abs(x1), v1(0.1)));
  EXPECT_TRUE(locally_smooth(norm_squared(v1(0)), v1(0)));
}

TEST(Lipschitz, ComposedBoundsDominateGradients) {
  Rng rng(16);
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(2, -2.0), hi = Eigen::VectorXd::Constant(2, 2.0);
  for (int i = 0; i < 40; ++i) {
    const Expr e = random_exact_class(rng, 2);
    const double bound = lipschitz_bound(e, lo, hi);
    for (int k = 0; k < 10; ++k) {
      const Polytope g = clarke_gradient(e, rng.uniform_vector(2, -2.0, 2.0));
      for (const auto& v : g.generators()) EXPECT_LE(v.norm(), bound * (1 + 1e-12) + 1e-12);
    }
  }
}
