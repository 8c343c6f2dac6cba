#pragma once

// Regret with a hindsight best-response solver, distance to equilibrium,
// multi-path averaging, and log-log rate fits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ogdlb/common.hpp"
#include "ogdlb/game.hpp"
#include "ogdlb/learner.hpp"

namespace ogdlb {

// ---------------------------------------------------------------------------
// Concave maximization over one player's set

/// Time-averaged hindsight objective and its gradient in the player's own block.
struct AveragedObjective {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
};

struct BestResponse {
  Vec action;
  double value = 0.0;  // sum over the horizon, not the average
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> objective_trace;  // averaged objective per accepted iterate
  std::optional<double> closed_form_gap;
};

/// Projected gradient ascent with backtracking. Stops when the gradient-mapping
/// residual |x - P(x + grad)| drops to `tol`.
inline BestResponse maximize_concave(const ConvexSet& set, const AveragedObjective& f, Vec x,
                                     double tol, int max_iter = 100000) {
  x = project(set, x);
  double fx = f.value(x);
  double step = 1.0;
  BestResponse out;
  out.objective_trace.push_back(fx);
  for (int it = 0; it < max_iter; ++it) {
    const Vec g = f.gradient(x);
    const double res = (x - project(set, x + g)).norm();
    if (res <= tol) {
      out.action = x;
      out.value = fx;
      out.residual = res;
      out.iterations = it;
      return out;
    }
    for (;;) {
      const Vec cand = project(set, x + step * g);
      const Vec dx = cand - x;
      const double fc = f.value(cand);
      if (fc >= fx && fc >= fx + g.dot(dx) - dx.squaredNorm() / (2.0 * step) - 1e-15 * std::abs(fx)) {
        x = cand;
        fx = fc;
        out.objective_trace.push_back(fx);
        step *= 2.0;
        break;
      }
      step *= 0.5;
      if (step < 1e-20) {
        throw ConvergenceError("hindsight solver: step size underflow", x, res);
      }
    }
  }
  throw ConvergenceError("hindsight solver: no convergence", x,
                         (x - project(set, x + f.gradient(x))).norm());
}

namespace detail {

inline Vec own_gradient(const GameSpec& game, int i, const Vec& profile) {
  if (game.gradient_oracle()) return game.block((*game.gradient_oracle())(profile), i);
  return game.block(finite_difference_gradient(game, profile), i);
}

// u_i(x, y_-i) averaged via the affine form: linear term depends on the mean only.
struct AffineAverage {
  double constant;
  Vec linear;
  Mat quad;  // M_ii
};

inline AffineAverage affine_average(const GameSpec& game, int i, const Vec& mean_profile) {
  const auto& f = *game.affine_form();
  const int o = game.offset(i);
  const int d = game.dim(i);
  Vec others = mean_profile;
  game.block(others, i).setZero();
  AffineAverage avg;
  avg.constant = f.constant[i];
  avg.quad = f.M.block(o, o, d, d);
  avg.linear = f.m.segment(o, d) - f.M.middleRows(o, d) * others;
  return avg;
}

inline AveragedObjective affine_objective(const AffineAverage& avg) {
  return AveragedObjective{
      [avg](const Vec& x) { return avg.constant + x.dot(avg.linear) - 0.5 * x.dot(avg.quad * x); },
      [avg](const Vec& x) -> Vec { return avg.linear - avg.quad * x; }};
}

}  // namespace detail

/// Closed-form maximizer of the averaged affine-quadratic objective, available
/// when the player's own curvature block is diagonal and its set is a box.
inline std::optional<Vec> closed_form_best_response(const GameSpec& game, int i,
                                                    const Vec& mean_profile) {
  if (!game.affine_form()) return std::nullopt;
  const auto* box = game.player(i).action_set.as_box();
  if (!box) return std::nullopt;
  const auto avg = detail::affine_average(game, i, mean_profile);
  const Mat off = avg.quad - Mat(avg.quad.diagonal().asDiagonal());
  if (off.cwiseAbs().maxCoeff() > 0.0 || (avg.quad.diagonal().array() <= 0.0).any())
    return std::nullopt;
  const Vec x = avg.linear.cwiseQuotient(avg.quad.diagonal());
  return x.cwiseMax(box->lower).cwiseMin(box->upper);
}

/// argmax over the player's set of sum_k u_i(x, y_{-i,k}), where the y_k are
/// joint profiles (their block i is ignored).
inline BestResponse hindsight_best_response(const GameSpec& game, int i,
                                            std::span<const Vec> opponents, double tol = 1e-8) {
  require(!opponents.empty(), "hindsight_best_response: empty trajectory");
  require(i >= 0 && i < game.n_players(), "hindsight_best_response: bad player index");
  const double K = static_cast<double>(opponents.size());
  AveragedObjective f{
      [&](const Vec& x) {
        double s = 0.0;
        Vec prof;
        for (const auto& y : opponents) {
          prof = y;
          game.block(prof, i) = x;
          s += game.utility_oracle()(prof)[i];
        }
        return s / K;
      },
      [&](const Vec& x) -> Vec {
        Vec s = Vec::Zero(game.dim(i));
        Vec prof;
        for (const auto& y : opponents) {
          prof = y;
          game.block(prof, i) = x;
          s += detail::own_gradient(game, i, prof);
        }
        return s / K;
      }};
  BestResponse br =
      maximize_concave(game.player(i).action_set, f, game.player(i).safety_ball.center, tol);
  br.value *= K;
  if (game.affine_form()) {
    Vec mean = Vec::Zero(game.total_dim());
    for (const auto& y : opponents) mean += y;
    mean /= K;
    if (auto cf = closed_form_best_response(game, i, mean)) br.closed_form_gap = (*cf - br.action).norm();
  }
  return br;
}

// ---------------------------------------------------------------------------
// Regret

struct RegretLedger {
  int player = 0;
  std::int64_t horizon = 0;
  double cumulative_utility = 0.0;
  Vec best_fixed_action;
  double best_fixed_utility = 0.0;
  double regret = 0.0;
};

/// What the environment evaluated: applied profiles and the utilities realized there.
struct PlayedTrajectory {
  std::vector<Vec> applied;
  std::vector<Vec> utility;
};

inline RegretLedger regret(const GameSpec& game, const PlayedTrajectory& traj, int i,
                           double tol = 1e-8) {
  require(!traj.applied.empty() && traj.applied.size() == traj.utility.size(),
          "regret: trajectory must be nonempty with one utility vector per round");
  RegretLedger led;
  led.player = i;
  led.horizon = static_cast<std::int64_t>(traj.applied.size());
  for (const auto& u : traj.utility) led.cumulative_utility += u[i];
  const BestResponse br = hindsight_best_response(game, i, traj.applied, tol);
  led.best_fixed_action = br.action;
  led.best_fixed_utility = br.value;
  led.regret = led.best_fixed_utility - led.cumulative_utility;
  return led;
}

/// Horizons 10^(j / per_decade) between k_min and k_max, rounded and deduplicated.
inline std::vector<std::int64_t> log_horizon_grid(std::int64_t k_min, std::int64_t k_max,
                                                  int per_decade = 2) {
  require(k_min >= 1 && k_max >= k_min && per_decade >= 1, "log_horizon_grid: bad range");
  std::vector<std::int64_t> out;
  const double lo = std::log10(static_cast<double>(k_min));
  const double hi = std::log10(static_cast<double>(k_max));
  const int j0 = static_cast<int>(std::ceil(lo * per_decade - 1e-9));
  const int j1 = static_cast<int>(std::floor(hi * per_decade + 1e-9));
  for (int j = j0; j <= j1; ++j) {
    const auto k = static_cast<std::int64_t>(std::llround(std::pow(10.0, double(j) / per_decade)));
    if (out.empty() || k > out.back()) out.push_back(k);
  }
  return out;
}

/// Streams rounds and produces regret ledgers at a set of horizons. Affine games
/// keep only running sums; other games retain the applied profiles.
class RegretTracker {
 public:
  RegretTracker(const GameSpec& game, std::vector<std::int64_t> horizons, double tol = 1e-8)
      : game_(game), horizons_(std::move(horizons)), tol_(tol),
        sum_utility_(Vec::Zero(game.n_players())), sum_applied_(Vec::Zero(game.total_dim())) {
    std::sort(horizons_.begin(), horizons_.end());
  }

  void observe(const StepRecord& rec) {
    ++rounds_;
    sum_utility_ += rec.utility;
    if (game_.affine_form()) sum_applied_ += rec.applied;
    else {
      played_.applied.push_back(rec.applied);
      played_.utility.push_back(rec.utility);
    }
    if (next_ < horizons_.size() && horizons_[next_] == rounds_) {
      for (int i = 0; i < game_.n_players(); ++i) ledgers_.push_back(snapshot(i));
      ++next_;
    }
  }

  /// Ledgers in (horizon, player) order.
  const std::vector<RegretLedger>& ledgers() const { return ledgers_; }
  const std::vector<std::int64_t>& horizons() const { return horizons_; }

 private:
  RegretLedger snapshot(int i) const {
    if (!game_.affine_form()) return regret(game_, played_, i, tol_);
    RegretLedger led;
    led.player = i;
    led.horizon = rounds_;
    led.cumulative_utility = sum_utility_[i];
    const double K = static_cast<double>(rounds_);
    const Vec mean = sum_applied_ / K;
    const auto avg = detail::affine_average(game_, i, mean);
    const auto obj = detail::affine_objective(avg);
    Vec x;
    if (auto cf = closed_form_best_response(game_, i, mean)) x = *cf;
    else x = maximize_concave(game_.player(i).action_set, obj, game_.player(i).safety_ball.center, tol_).action;
    led.best_fixed_action = x;
    led.best_fixed_utility = K * obj.value(x);
    led.regret = led.best_fixed_utility - led.cumulative_utility;
    return led;
  }

  const GameSpec& game_;
  std::vector<std::int64_t> horizons_;
  double tol_;
  std::int64_t rounds_ = 0;
  std::size_t next_ = 0;
  Vec sum_utility_;
  Vec sum_applied_;
  PlayedTrajectory played_;
  std::vector<RegretLedger> ledgers_;
};

// ---------------------------------------------------------------------------
// Distance to equilibrium

struct DistancePoint {
  std::int64_t k;
  double applied_sq;
  double intended_sq;
};

inline std::vector<DistancePoint> distance_to_ne(std::span<const StepRecord> records,
                                                 const Vec& a_star) {
  std::vector<DistancePoint> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    require(r.applied.size() == a_star.size(), "distance_to_ne: dimension mismatch");
    out.push_back({r.round, (r.applied - a_star).squaredNorm(), (r.intended - a_star).squaredNorm()});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Path averaging

struct Series {
  std::vector<std::int64_t> k;
  std::vector<double> value;
};

struct MeanSeries {
  std::vector<std::int64_t> k;
  std::vector<double> mean;
  std::optional<std::vector<double>> standard_error;  // absent for a single path
};

inline MeanSeries average_paths(std::span<const Series> paths) {
  require(!paths.empty(), "average_paths: no paths");
  const auto& grid = paths.front().k;
  for (const auto& p : paths) {
    require(p.k == grid, "average_paths: mismatched round grids");
    require(p.value.size() == grid.size(), "average_paths: series length differs from grid");
  }
  const std::size_t n = paths.size();
  MeanSeries out;
  out.k = grid;
  out.mean.assign(grid.size(), 0.0);
  for (std::size_t t = 0; t < grid.size(); ++t) {
    // Summing in sorted order makes the result independent of path order.
    std::vector<double> v(n);
    for (std::size_t p = 0; p < n; ++p) v[p] = paths[p].value[t];
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    out.mean[t] = s / static_cast<double>(n);
    if (n > 1) {
      if (!out.standard_error) out.standard_error.emplace(grid.size(), 0.0);
      double ss = 0.0;
      for (double x : v) ss += (x - out.mean[t]) * (x - out.mean[t]);
      (*out.standard_error)[t] = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rate fits

struct RateFit {
  std::int64_t k_min = 0;
  std::int64_t k_max = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int points = 0;
};

/// Least-squares line through (log k, log v) for k in [k_min, k_max].
inline RateFit loglog_slope_fit(std::span<const std::int64_t> k, std::span<const double> v,
                                std::int64_t k_min, std::int64_t k_max, int min_points = 10) {
  require(k.size() == v.size(), "loglog_slope_fit: length mismatch");
  require(k_min < k_max, "loglog_slope_fit: k_min must be < k_max");
  std::vector<double> xs, ys;
  for (std::size_t t = 0; t < k.size(); ++t) {
    if (k[t] < k_min || k[t] > k_max) continue;
    require(v[t] > 0.0, "loglog_slope_fit: nonpositive value at k = " + std::to_string(k[t]));
    xs.push_back(std::log(static_cast<double>(k[t])));
    ys.push_back(std::log(v[t]));
  }
  require(static_cast<int>(xs.size()) >= min_points,
          "loglog_slope_fit: " + std::to_string(xs.size()) + " points in window, need " +
              std::to_string(min_points));
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    mx += xs[t];
    my += ys[t];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    sxx += (xs[t] - mx) * (xs[t] - mx);
    sxy += (xs[t] - mx) * (ys[t] - my);
    syy += (ys[t] - my) * (ys[t] - my);
  }
  RateFit fit;
  fit.k_min = k_min;
  fit.k_max = k_max;
  fit.points = static_cast<int>(xs.size());
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ss_res = syy - fit.slope * sxy;
  fit.r_squared = syy > 0.0 ? 1.0 - std::max(0.0, ss_res) / syy : 1.0;
  return fit;
}

}  // namespace ogdlb
