#pragma once

// Single-query gradient estimation around a safety ball.

#include <cmath>

#include "ogdlb/common.hpp"
#include "ogdlb/convex_set.hpp"

namespace ogdlb {

struct Perturbation {
  Vec theta;    // perturbation direction
  Vec pivot;    // intended action pulled toward the safety-ball center
  Vec applied;  // pivot + delta * lambda, the action actually played
};

/// Writes theta, pivot and applied action into caller-owned storage.
template <class A, class L, class Out>
void perturb_into(const A& action, const SafetyBall& ball, const L& lambda, double delta,
                  Out&& theta, Out&& pivot, Out&& applied) {
  const double inv_r = 1.0 / ball.radius;
  theta = lambda - inv_r * (action - ball.center);
  pivot = action - (delta * inv_r) * (action - ball.center);
  applied = pivot + delta * lambda;
}

/// Pulls `action` toward the safety-ball center by delta/r and then steps
/// delta along `lambda`. The result is a convex combination of `action` and a
/// point of the safety ball, so it stays feasible.
inline Perturbation perturb(const Vec& action, const SafetyBall& ball, const Vec& lambda,
                            double delta) {
  require(delta > 0.0, "perturb: delta must be positive");
  require(delta < ball.radius, "perturb: delta >= safety radius");
  require(action.size() == ball.center.size() && lambda.size() == action.size(),
          "perturb: dimension mismatch");
  Perturbation out{Vec(action.size()), Vec(action.size()), Vec(action.size())};
  perturb_into(action, ball, lambda, delta, out.theta, out.pivot, out.applied);
  return out;
}

/// (dim / delta) * utility * lambda
inline Vec estimate_gradient(int dim, double delta, double utility, const Vec& lambda) {
  require(delta > 0.0, "estimate_gradient: delta must be positive");
  return (static_cast<double>(dim) / delta * utility) * lambda;
}

}  // namespace ogdlb
