#pragma once

// Reference computations written independently of the library code paths.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::VectorXd;

// Dykstra's alternating projections onto {x >= 0} and {sum x <= s}.
inline VectorXd capped_simplex_projection(const VectorXd& y, double s, int iters = 20000) {
  VectorXd x = y, p = VectorXd::Zero(y.size()), q = VectorXd::Zero(y.size());
  for (int it = 0; it < iters; ++it) {
    VectorXd z = (x + p).cwiseMax(0.0);
    p = x + p - z;
    VectorXd w = z + q;
    const double excess = w.sum() - s;
    VectorXd h = excess > 0 ? VectorXd(w.array() - excess / w.size()) : w;
    q = z + q - h;
    x = h;
  }
  return x;
}

inline VectorXd ball_projection(const VectorXd& y, const VectorXd& c, double r) {
  const double d = (y - c).norm();
  if (d <= r) return y;
  return c + (y - c) * (r / d);
}

// Toy game utilities written out by hand.
inline std::array<double, 2> toy_utility(double a1, double a2, double t1 = 0.5, double t2 = -0.25,
                                         double kappa = 1.0, double s = 1.0) {
  return {s * (-(a1 - t1) * (a1 - t1) - kappa * a1 * a2),
          s * (-(a2 - t2) * (a2 - t2) - kappa * a1 * a2)};
}

// Interior equilibrium of the toy game by Cramer's rule on
// 2 a1 + kappa a2 = 2 t1, kappa a1 + 2 a2 = 2 t2.
inline std::array<double, 2> toy_equilibrium(double t1 = 0.5, double t2 = -0.25, double kappa = 1.0) {
  const double det = 4.0 - kappa * kappa;
  return {(2.0 * t1 * 2.0 - kappa * 2.0 * t2) / det, (2.0 * 2.0 * t2 - kappa * 2.0 * t1) / det};
}

inline double toy_best_response(double y, double theta, double kappa = 1.0) {
  return std::clamp(theta - kappa * y / 2.0, -1.0, 1.0);
}

// Least squares slope on log-log axes, two-pass.
inline double loglog_slope(const std::vector<double>& k, const std::vector<double>& v) {
  double mx = 0, my = 0;
  for (std::size_t t = 0; t < k.size(); ++t) {
    mx += std::log(k[t]);
    my += std::log(v[t]);
  }
  mx /= k.size();
  my /= v.size();
  double num = 0, den = 0;
  for (std::size_t t = 0; t < k.size(); ++t) {
    num += (std::log(k[t]) - mx) * (std::log(v[t]) - my);
    den += (std::log(k[t]) - mx) * (std::log(k[t]) - mx);
  }
  return num / den;
}

}  // namespace oracle
