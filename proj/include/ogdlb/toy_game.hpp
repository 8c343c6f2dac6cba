#pragma once

// Two-player quadratic game with scalar actions on [-1, 1]:
//   u_i(a) = s * ( -(a_i - theta_i)^2 - kappa * a_i * a_{-i} ).
// The pseudo-gradient is affine with M = s * [[2, kappa], [kappa, 2]], so the
// game is strongly monotone iff |kappa| < 2, with beta = s * (2 - |kappa|).

#include <array>

#include "ogdlb/game.hpp"

namespace ogdlb {

struct QuadraticToyParams {
  std::array<double, 2> theta{0.5, -0.25};
  double kappa = 1.0;
  /// Multiplies both utilities. Values below 1 weaken the monotonicity modulus.
  double scale = 1.0;
  std::array<double, 2> loss_probability{1.0, 1.0};
  double safety_center = 0.0;
  double safety_radius = 1.0;
};

inline AffineForm quadratic_toy_form(const QuadraticToyParams& p) {
  AffineForm f;
  f.M.resize(2, 2);
  f.M << 2.0, p.kappa, p.kappa, 2.0;
  f.M *= p.scale;
  f.m = Vec(2);
  f.m << 2.0 * p.theta[0], 2.0 * p.theta[1];
  f.m *= p.scale;
  f.constant = Vec(2);
  f.constant << -p.theta[0] * p.theta[0], -p.theta[1] * p.theta[1];
  f.constant *= p.scale;
  return f;
}

inline GameSpec quadratic_toy_game(const QuadraticToyParams& p = {}) {
  require(p.scale > 0.0, "toy game: scale must be positive");
  std::vector<PlayerSpec> players;
  for (int i = 0; i < 2; ++i) {
    players.push_back(PlayerSpec{ConvexSet::box(1, -1.0, 1.0),
                                 SafetyBall{Vec::Constant(1, p.safety_center), p.safety_radius},
                                 p.loss_probability[i]});
  }
  return GameSpec::affine(std::move(players), quadratic_toy_form(p));
}

}  // namespace ogdlb
