#include <gtest/gtest.h>

#include "ogdlb/fog.hpp"
#include "ogdlb/sim/config.hpp"

using namespace ogdlb;

namespace {

FogGameParams single_market(int n_fsp, double pbar, double d, double q, double b, double cap) {
  FogGameParams p;
  p.n_fsp = n_fsp;
  p.n_aum = 1;
  p.markets.assign(n_fsp, {0});
  p.price_intercept = {pbar};
  p.price_slope = {d};
  p.cost_quadratic.assign(n_fsp, q);
  p.cost_linear.assign(n_fsp, {b});
  p.capacity.assign(n_fsp, cap);
  p.loss_probability.assign(n_fsp, 1.0);
  return p;
}

// Supply to each market and the utility written directly from the model.
double fog_utility(const FogGameParams& p, const Vec& a, int i) {
  std::vector<double> supply(p.n_aum, 0.0);
  int e = 0;
  std::vector<int> start;
  for (int f = 0; f < p.n_fsp; ++f) {
    start.push_back(e);
    for (int j : p.markets[f]) supply[j] += a[e++];
  }
  double u = 0.0;
  for (std::size_t t = 0; t < p.markets[i].size(); ++t) {
    const int j = p.markets[i][t];
    const double x = a[start[i] + t];
    u += x * (p.price_intercept[j] - p.price_slope[j] * supply[j]) - p.cost_quadratic[i] * x * x -
         p.cost_linear[i][t] * x;
  }
  return p.scale * u;
}

}  // namespace

TEST(Fog, SingleProviderSingleMarket) {
  const auto game = build_fog_game(single_market(1, 10, 1, 1, 0, 10));
  const auto ne = solve_nash(game, 1e-12, 100000);
  EXPECT_NEAR(ne.point[0], 2.5, 1e-9);
}

TEST(Fog, SymmetricProvidersShareEqually) {
  const auto game = build_fog_game(single_market(2, 10, 1, 0.7, 0.3, 5));
  const auto ne = solve_nash(game, 1e-12, 100000);
  EXPECT_NEAR(ne.point[0], ne.point[1], 1e-9);
  // FOC: pbar - b - d (2 a + a) - 2 q a = 0
  EXPECT_NEAR(ne.point[0], 9.7 / (3 + 1.4), 1e-9);
}

TEST(Fog, UtilityMatchesModel) {
  const auto p = default_fog_params(3);
  const auto game = build_fog_game(p);
  RandomSource rng(1);
  for (int t = 0; t < 20; ++t) {
    const Vec a = game.sample_profile(rng);
    const Vec u = eval_utility(game, a);
    for (int i = 0; i < p.n_fsp; ++i) EXPECT_NEAR(u[i], fog_utility(p, a, i), 1e-10);
  }
}

TEST(Fog, ZeroSupplyGivesZeroUtility) {
  const auto game = build_fog_game(default_fog_params(4));
  EXPECT_EQ(eval_utility(game, Vec::Zero(game.total_dim())).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Fog, GradientIsAffine) {
  const auto game = build_fog_game(default_fog_params(5));
  RandomSource rng(2);
  const Vec z = Vec::Zero(game.total_dim());
  const Vec g0 = pseudo_gradient(game, z);
  for (int t = 0; t < 10; ++t) {
    const Vec a = game.sample_profile(rng), b = game.sample_profile(rng);
    const Vec lhs = pseudo_gradient(game, 0.5 * (a + b)) - g0;
    const Vec rhs = 0.5 * (pseudo_gradient(game, a) - g0) + 0.5 * (pseudo_gradient(game, b) - g0);
    EXPECT_LT((lhs - rhs).norm(), 1e-10);
    EXPECT_LT((pseudo_gradient(game, a) - finite_difference_pseudo_gradient(game, a)).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(Fog, DefaultInstanceShape) {
  const auto p = default_fog_params(1);
  EXPECT_EQ(p.n_fsp, 20);
  EXPECT_EQ(p.n_aum, 7);
  EXPECT_GE(p.total_dim(), 40);
  EXPECT_LE(p.total_dim(), 80);
  std::vector<int> served(7, 0);
  for (const auto& m : p.markets) {
    EXPECT_GE(m.size(), 2u);
    EXPECT_LE(m.size(), 4u);
    for (int j : m) ++served[j];
  }
  for (int s : served) EXPECT_GT(s, 0);
  for (double x : p.price_intercept) {
    EXPECT_GE(x, 8);
    EXPECT_LE(x, 12);
  }
  for (double q : p.cost_quadratic) {
    EXPECT_GE(q, 0.5);
    EXPECT_LE(q, 1.0);
  }
}

TEST(Fog, DefaultInstanceIsDeterministic) {
  const auto a = default_fog_params(17), b = default_fog_params(17), c = default_fog_params(18);
  EXPECT_EQ(a.markets, b.markets);
  EXPECT_EQ(a.price_intercept, b.price_intercept);
  EXPECT_EQ(a.cost_linear, b.cost_linear);
  EXPECT_NE(a.price_intercept, c.price_intercept);
}

TEST(Fog, DefaultInstanceCertifiedAndSolvable) {
  const auto game = build_fog_game(default_fog_params(1));
  RandomSource rng(3);
  const auto cert = check_monotonicity(game, 50, rng);
  EXPECT_TRUE(cert.strongly_monotone());
  EXPECT_GT(cert.beta, 0.0);
  const auto ne = solve_nash(game, 1e-9, 2000000);
  EXPECT_LE(ne.vi_residual, 1e-8);
  EXPECT_GE(ne.point.minCoeff(), -1e-12);
  EXPECT_LE(ne.point.maxCoeff(), 5.0 + 1e-12);
}

TEST(Fog, WeakBetaPresetHitsTarget) {
  const auto p = weak_beta_fog_params(1, 0.1);
  EXPECT_NEAR(fog_beta(p), 0.1, 1e-10);
}

TEST(Fog, SafetyBallsFitCapacity) {
  const auto game = build_fog_game(default_fog_params(1));
  for (const auto& pl : game.players()) {
    EXPECT_NEAR(pl.safety_ball.radius, 1.0, 1e-15);
    EXPECT_FALSE(validate_safety_ball(pl.action_set, pl.safety_ball));
  }
}

TEST(Fog, RejectsDisconnectedOrNonMonotone) {
  auto p = single_market(2, 10, 1, 1, 0, 5);
  p.n_aum = 2;
  p.price_intercept.push_back(10);
  p.price_slope.push_back(1);
  EXPECT_THROW(build_fog_game(p), InvalidArgument);  // market 1 unserved
  auto q = single_market(1, 10, 1, 1, 0, 5);
  q.cost_quadratic = {-5};
  EXPECT_THROW(build_fog_game(q), InvalidArgument);
}

TEST(Fog, ParamsRoundTripThroughJson) {
  const auto p = default_fog_params(9);
  const auto back = sim::fog_params_from_json(sim::fog_params_to_json(p), "params");
  EXPECT_EQ(back.markets, p.markets);
  EXPECT_EQ(back.price_slope, p.price_slope);
  EXPECT_EQ(back.cost_linear, p.cost_linear);
  EXPECT_EQ(back.capacity, p.capacity);
  EXPECT_EQ(back.scale, p.scale);
}
