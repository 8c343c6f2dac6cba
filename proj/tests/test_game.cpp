#include <gtest/gtest.h>

#include "ogdlb/game.hpp"
#include "ogdlb/toy_game.hpp"
#include "oracles.hpp"

using namespace ogdlb;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// A non-affine concave game with a hand-written oracle: u_i = -(a_i - t_i)^4 - a_i a_j.
GameSpec quartic_game() {
  std::vector<PlayerSpec> players;
  for (int i = 0; i < 2; ++i)
    players.push_back(PlayerSpec{ConvexSet::box(1, -1, 1), SafetyBall{Vec::Zero(1), 1.0}, 1.0});
  return GameSpec(players, [](const Vec& a) {
    Vec u(2);
    u[0] = -std::pow(a[0] - 0.3, 4) - 0.1 * a[0] * a[1];
    u[1] = -std::pow(a[1] + 0.2, 4) - 0.1 * a[0] * a[1];
    return u;
  });
}

}  // namespace

TEST(ToyGame, UtilityMatchesHandFormula) {
  const auto game = quadratic_toy_game();
  const Vec u = eval_utility(game, v2(0.5, -0.25));
  EXPECT_NEAR(u[0], 0.125, 1e-15);
  EXPECT_NEAR(u[1], 0.125, 1e-15);
  RandomSource rng(1);
  for (int t = 0; t < 500; ++t) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
    const auto ref = oracle::toy_utility(a, b);
    const Vec got = eval_utility(game, v2(a, b));
    EXPECT_NEAR(got[0], ref[0], 1e-13);
    EXPECT_NEAR(got[1], ref[1], 1e-13);
  }
}

TEST(ToyGame, ScaledUtilityMatchesHandFormula) {
  QuadraticToyParams p;
  p.scale = 0.1;
  p.kappa = 0.5;
  const auto game = quadratic_toy_game(p);
  const auto ref = oracle::toy_utility(0.2, -0.7, 0.5, -0.25, 0.5, 0.1);
  const Vec got = eval_utility(game, v2(0.2, -0.7));
  EXPECT_NEAR(got[0], ref[0], 1e-15);
  EXPECT_NEAR(got[1], ref[1], 1e-15);
}

TEST(Game, EvalUtilityRejectsInfeasibleProfile) {
  EXPECT_THROW(eval_utility(quadratic_toy_game(), v2(1.5, 0)), InvalidArgument);
  EXPECT_THROW(eval_utility(quadratic_toy_game(), Vec::Zero(3)), InvalidArgument);
}

TEST(Game, RejectsBadPlayerSpecs) {
  std::vector<PlayerSpec> bad_p{{ConvexSet::box(1, -1, 1), SafetyBall{Vec::Zero(1), 1.0}, 0.0}};
  EXPECT_THROW(GameSpec(bad_p, [](const Vec&) { return Vec::Zero(1); }), InvalidArgument);
  std::vector<PlayerSpec> bad_ball{{ConvexSet::box(1, -1, 1), SafetyBall{Vec::Zero(1), 1.5}, 1.0}};
  EXPECT_THROW(GameSpec(bad_ball, [](const Vec&) { return Vec::Zero(1); }), InvalidArgument);
}

TEST(Game, AnalyticGradientMatchesFiniteDifferences) {
  const auto game = quadratic_toy_game();
  RandomSource rng(2);
  for (int t = 0; t < 200; ++t) {
    const Vec a = game.sample_profile(rng);
    EXPECT_LT((pseudo_gradient(game, a) - finite_difference_pseudo_gradient(game, a)).cwiseAbs().maxCoeff(),
              1e-5);
  }
}

TEST(Game, FiniteDifferenceGradientOfNonAffineGame) {
  const auto game = quartic_game();
  RandomSource rng(3);
  for (int t = 0; t < 100; ++t) {
    const Vec a = game.sample_profile(rng);
    const double g0 = -4 * std::pow(a[0] - 0.3, 3) - 0.1 * a[1];
    const double g1 = -4 * std::pow(a[1] + 0.2, 3) - 0.1 * a[0];
    const Vec g = pseudo_gradient(game, a);
    EXPECT_NEAR(g[0], g0, 1e-5);
    EXPECT_NEAR(g[1], g1, 1e-5);
  }
}

TEST(Monotonicity, ToyGameIsStronglyMonotoneWithBetaOne) {
  RandomSource rng(4);
  const auto cert = check_monotonicity(quadratic_toy_game(), 500, rng);
  EXPECT_TRUE(cert.strongly_monotone());
  EXPECT_EQ(cert.path, CertificatePath::exact_affine);
  EXPECT_NEAR(cert.beta, 1.0, 1e-12);
  EXPECT_LE(cert.worst_ratio, -1.0 + 1e-9);
}

TEST(Monotonicity, StrongCouplingIsIndeterminate) {
  QuadraticToyParams p;
  p.kappa = 2.5;
  RandomSource rng(5);
  const auto cert = check_monotonicity(quadratic_toy_game(p), 500, rng);
  EXPECT_EQ(cert.klass, MonotonicityClass::indeterminate);
}

TEST(Monotonicity, ZeroGradientIsIndeterminate) {
  std::vector<PlayerSpec> players{{ConvexSet::box(1, -1, 1), SafetyBall{Vec::Zero(1), 1.0}, 1.0}};
  const GameSpec flat(players, [](const Vec&) { return Vec::Zero(1); });
  RandomSource rng(6);
  const auto cert = check_monotonicity(flat, 100, rng);
  EXPECT_EQ(cert.klass, MonotonicityClass::indeterminate);
  EXPECT_EQ(cert.path, CertificatePath::sampled);
}

TEST(Monotonicity, WeakBetaPresetScalesModulus) {
  QuadraticToyParams p;
  p.scale = 0.1;
  RandomSource rng(7);
  const auto cert = check_monotonicity(quadratic_toy_game(p), 100, rng);
  EXPECT_NEAR(cert.beta, 0.1, 1e-12);
  EXPECT_LT(cert.beta, 1.0 / 6.0);
}

TEST(Constants, LipschitzEstimateIsMonotoneInSampleCount) {
  const auto game = quadratic_toy_game();
  double prev = 0.0;
  for (int n : {2, 10, 100, 1000}) {
    RandomSource rng(8);
    const auto c = estimate_constants(game, n, rng);
    EXPECT_GE(c.lipschitz.minCoeff(), prev - 1e-15);
    prev = c.lipschitz.minCoeff();
  }
  RandomSource rng(8);
  const auto c = estimate_constants(game, 1000, rng);
  // |g_i(a) - g_i(b)| <= sqrt(2^2 + 1^2) |a - b|
  EXPECT_LE(c.lipschitz.maxCoeff(), std::sqrt(5.0) + 1e-12);
  EXPECT_DOUBLE_EQ(c.diameter[0], 2.0);
  // max |u_1| on the box is at (-1, 1): -(1.5)^2 - (-1) ... checked by vertices
  EXPECT_NEAR(c.utility_bound[0], 3.25, 1e-12);
}

TEST(Nash, ToyEquilibriumMatchesLinearSolve) {
  const auto sol = solve_nash(quadratic_toy_game(), 1e-12, 1000000);
  const auto ref = oracle::toy_equilibrium();
  EXPECT_NEAR(sol.point[0], 5.0 / 6.0, 1e-8);
  EXPECT_NEAR(sol.point[1], -2.0 / 3.0, 1e-8);
  EXPECT_NEAR(sol.point[0], ref[0], 1e-8);
  EXPECT_NEAR(sol.point[1], ref[1], 1e-8);
  EXPECT_LE(sol.vi_residual, 1e-12);
}

TEST(Nash, UniqueAcrossStarts) {
  const auto game = quadratic_toy_game();
  RandomSource rng(9);
  for (int t = 0; t < 20; ++t) {
    const auto sol = solve_nash(game, 1e-12, 1000000, game.sample_profile(rng));
    EXPECT_NEAR(sol.point[0], 5.0 / 6.0, 1e-8);
    EXPECT_NEAR(sol.point[1], -2.0 / 3.0, 1e-8);
  }
}

TEST(Nash, BoundaryEquilibrium) {
  QuadraticToyParams p;
  p.theta = {2.0, 0.0};
  const auto sol = solve_nash(quadratic_toy_game(p), 1e-12, 1000000);
  // a1 clipped at 1; a2 = clip(0 - 1/2) = -0.5; a1 best response to -0.5 is 2.25 -> 1.
  EXPECT_NEAR(sol.point[0], 1.0, 1e-9);
  EXPECT_NEAR(sol.point[1], -0.5, 1e-9);
}

TEST(Nash, ConvergenceFailureCarriesBestIterate) {
  try {
    solve_nash(quadratic_toy_game(), 1e-14, 2);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.best_iterate().size(), 2);
    EXPECT_GT(e.residual(), 1e-14);
  }
}

TEST(SmoothedOracle, MatchesGradientAtPivotForQuadraticGame) {
  // For an affine gradient the smoothed gradient equals g at the pivot profile.
  const auto game = quadratic_toy_game();
  RandomSource rng(10);
  const Vec a = v2(0.4, -0.3);
  const auto sg = smoothed_gradient_oracle(game, a, 0.2, 400000, rng);
  const Vec g = pseudo_gradient(game, sg.pivot);
  for (int j = 0; j < 2; ++j) EXPECT_LE(std::abs(sg.mean[j] - g[j]), 4 * sg.standard_error[j]);
  EXPECT_LT((sg.pivot - 0.8 * a).norm(), 1e-15);
}

TEST(SmoothedOracle, RejectsOversizedDelta) {
  RandomSource rng(11);
  EXPECT_THROW(smoothed_gradient_oracle(quadratic_toy_game(), v2(0, 0), 1.0, 10, rng), InvalidArgument);
}
