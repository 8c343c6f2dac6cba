#pragma once

// Convex action sets with closed-form Euclidean projection.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ogdlb/common.hpp"
#include "ogdlb/random.hpp"

namespace ogdlb {

inline constexpr double kContainsTol = 1e-9;

struct Box {
  Vec lower;
  Vec upper;
};

struct Ball {
  Vec center;
  double radius;
};

/// Capped simplex {x >= 0, sum(x) <= scale}. Full-dimensional, so it admits a
/// safety ball.
struct Simplex {
  int dim;
  double scale;
};

class ConvexSet {
 public:
  using Variant = std::variant<Box, Ball, Simplex>;

  static ConvexSet box(Vec lower, Vec upper) {
    require(lower.size() > 0 && lower.size() == upper.size(), "box: bound dimensions differ");
    for (Eigen::Index j = 0; j < lower.size(); ++j)
      require(lower[j] < upper[j], "box: lower[" + std::to_string(j) + "] >= upper");
    return ConvexSet(Box{std::move(lower), std::move(upper)});
  }

  static ConvexSet box(int dim, double lo, double hi) {
    return box(Vec::Constant(dim, lo), Vec::Constant(dim, hi));
  }

  static ConvexSet ball(Vec center, double radius) {
    require(center.size() > 0, "ball: empty center");
    require(radius > 0.0, "ball: radius must be positive");
    return ConvexSet(Ball{std::move(center), radius});
  }

  static ConvexSet simplex(int dim, double scale) {
    require(dim > 0, "simplex: dim must be positive");
    require(scale > 0.0, "simplex: scale must be positive");
    return ConvexSet(Simplex{dim, scale});
  }

  int dim() const {
    return std::visit(
        [](const auto& s) -> int {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Box>) return static_cast<int>(s.lower.size());
          else if constexpr (std::is_same_v<T, Ball>) return static_cast<int>(s.center.size());
          else return s.dim;
        },
        v_);
  }

  const Variant& variant() const noexcept { return v_; }
  const Box* as_box() const noexcept { return std::get_if<Box>(&v_); }
  const Ball* as_ball() const noexcept { return std::get_if<Ball>(&v_); }
  const Simplex* as_simplex() const noexcept { return std::get_if<Simplex>(&v_); }

 private:
  explicit ConvexSet(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

struct SafetyBall {
  Vec center;
  double radius;
};

inline Vec project(const ConvexSet& set, const Vec& y);

namespace detail {

inline void check_dim(const ConvexSet& set, Eigen::Index n) {
  if (n != set.dim())
    throw InvalidArgument("dimension mismatch: set has dim " + std::to_string(set.dim()) +
                          ", vector has " + std::to_string(n));
}

// Projection onto {x >= 0, sum(x) = scale} by sort-and-threshold.
inline Vec project_simplex_face(const Vec& y, double scale) {
  std::vector<double> u(y.data(), y.data() + y.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double t = (cumsum - scale) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) tau = t;
  }
  return (y.array() - tau).cwiseMax(0.0).matrix();
}

}  // namespace detail

/// In-place projection. Boxes and balls avoid temporaries.
template <class V>
void project_in_place(const ConvexSet& set, V&& y) {
  if (const auto* b = set.as_box()) {
    y = y.cwiseMax(b->lower).cwiseMin(b->upper);
    return;
  }
  if (const auto* b = set.as_ball()) {
    const double n = (y - b->center).norm();
    if (n > b->radius) y = b->center + (y - b->center) * (b->radius / n);
    return;
  }
  y = project(set, Vec(y));
}

inline Vec project(const ConvexSet& set, const Vec& y) {
  detail::check_dim(set, y.size());
  if (const auto* b = set.as_box()) return y.cwiseMax(b->lower).cwiseMin(b->upper);
  if (const auto* b = set.as_ball()) {
    const Vec diff = y - b->center;
    const double n = diff.norm();
    if (n <= b->radius) return y;
    return b->center + diff * (b->radius / n);
  }
  const auto& s = *set.as_simplex();
  Vec clipped = y.cwiseMax(0.0);
  if (clipped.sum() <= s.scale) return clipped;
  return detail::project_simplex_face(y, s.scale);
}

inline bool contains(const ConvexSet& set, const Vec& y, double tol = kContainsTol) {
  detail::check_dim(set, y.size());
  if (const auto* b = set.as_box()) {
    // Distance to a box is the norm of the per-coordinate excess.
    const Vec excess = (b->lower - y).cwiseMax(0.0) + (y - b->upper).cwiseMax(0.0);
    return excess.norm() <= tol;
  }
  if (const auto* b = set.as_ball()) return (y - b->center).norm() <= b->radius + tol;
  return (y - project(set, y)).norm() <= tol;
}

inline double diameter(const ConvexSet& set) {
  if (const auto* b = set.as_box()) return (b->upper - b->lower).norm();
  if (const auto* b = set.as_ball()) return 2.0 * b->radius;
  const auto& s = *set.as_simplex();
  // Farthest pair: two distinct scaled vertices when dim >= 2, else {0, scale}.
  return s.dim >= 2 ? s.scale * std::sqrt(2.0) : s.scale;
}

/// Empty on success, else a description of the first violated constraint.
inline std::optional<std::string> validate_safety_ball(const ConvexSet& set,
                                                       const SafetyBall& ball,
                                                       double tol = kContainsTol) {
  detail::check_dim(set, ball.center.size());
  if (!(ball.radius > 0.0)) return "safety ball radius must be positive";
  if (const auto* b = set.as_box()) {
    for (Eigen::Index j = 0; j < ball.center.size(); ++j) {
      if (ball.center[j] - ball.radius < b->lower[j] - tol)
        return "lower face " + std::to_string(j) + ": c - r = " +
               std::to_string(ball.center[j] - ball.radius) + " < " +
               std::to_string(b->lower[j]);
      if (ball.center[j] + ball.radius > b->upper[j] + tol)
        return "upper face " + std::to_string(j) + ": c + r = " +
               std::to_string(ball.center[j] + ball.radius) + " > " +
               std::to_string(b->upper[j]);
    }
    return std::nullopt;
  }
  if (const auto* b = set.as_ball()) {
    const double reach = (ball.center - b->center).norm() + ball.radius;
    if (reach > b->radius + tol)
      return "ball boundary: |c - center| + r = " + std::to_string(reach) + " > " +
             std::to_string(b->radius);
    return std::nullopt;
  }
  const auto& s = *set.as_simplex();
  for (Eigen::Index j = 0; j < ball.center.size(); ++j)
    if (ball.center[j] - ball.radius < -tol)
      return "nonnegativity face " + std::to_string(j);
  const double slack = (s.scale - ball.center.sum()) / std::sqrt(static_cast<double>(s.dim));
  if (slack < ball.radius - tol) return "sum face: distance " + std::to_string(slack) + " < r";
  return std::nullopt;
}

/// Fills `out` with a uniform draw from the unit sphere of its dimension:
/// a fair +-1 coin in one dimension, a normalized Gaussian vector otherwise.
template <class Out>
void sample_unit_sphere_into(Out&& out, RandomSource& rng) {
  const auto dim = out.size();
  require(dim >= 1, "sample_unit_sphere: dim must be >= 1");
  if (dim == 1) {
    out[0] = rng.bernoulli(0.5) ? 1.0 : -1.0;
    return;
  }
  double n2 = 0.0;
  do {
    for (Eigen::Index j = 0; j < dim; ++j) out[j] = rng.normal();
    n2 = out.squaredNorm();
  } while (n2 == 0.0);
  out /= std::sqrt(n2);
}

inline Vec sample_unit_sphere(int dim, RandomSource& rng) {
  require(dim >= 1, "sample_unit_sphere: dim must be >= 1");
  Vec v(dim);
  sample_unit_sphere_into(v, rng);
  return v;
}

/// Uniform draw from the set. Used for sampling test points and certificates.
inline Vec sample_point(const ConvexSet& set, RandomSource& rng) {
  const int d = set.dim();
  Vec x(d);
  if (const auto* b = set.as_box()) {
    for (int j = 0; j < d; ++j) x[j] = rng.uniform(b->lower[j], b->upper[j]);
    return x;
  }
  if (const auto* b = set.as_ball()) {
    const Vec dir = sample_unit_sphere(d, rng);
    const double rad = b->radius * std::pow(rng.uniform(), 1.0 / d);
    return b->center + rad * dir;
  }
  // Flat Dirichlet over d + 1 cells, dropping the slack cell.
  const auto& s = *set.as_simplex();
  double total = 0.0;
  for (int j = 0; j < d; ++j) {
    x[j] = -std::log1p(-rng.uniform());
    total += x[j];
  }
  total += -std::log1p(-rng.uniform());
  return x * (s.scale / total);
}

}  // namespace ogdlb
