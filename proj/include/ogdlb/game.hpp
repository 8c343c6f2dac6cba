#pragma once

// Repeated concave games: players, utility and pseudo-gradient oracles,
// monotonicity certificates, and the ground-truth Nash solver.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include "ogdlb/common.hpp"
#include "ogdlb/convex_set.hpp"
#include "ogdlb/estimator.hpp"
#include "ogdlb/random.hpp"

namespace ogdlb {

struct PlayerSpec {
  ConvexSet action_set;
  SafetyBall safety_ball;
  double loss_probability = 1.0;

  int dim() const { return action_set.dim(); }
};

/// Joint action (stacked player blocks) -> one utility per player.
using UtilityOracle = std::function<Vec(const Vec&)>;
/// Joint action -> stacked pseudo-gradient (g_1, ..., g_N).
using GradientOracle = std::function<Vec(const Vec&)>;

/// Affine-quadratic game: g(a) = m - M a and
///   u_i(a) = c_i + m_i'a_i - 1/2 a_i'M_ii a_i - a_i' sum_{j != i} M_ij a_j.
struct AffineForm {
  Mat M;
  Vec m;
  Vec constant;
};

class GameSpec {
 public:
  GameSpec(std::vector<PlayerSpec> players, UtilityOracle utility,
           std::optional<GradientOracle> gradient = std::nullopt)
      : players_(std::move(players)), utility_(std::move(utility)),
        gradient_(std::move(gradient)) {
    require(!players_.empty(), "game: needs at least one player");
    require(static_cast<bool>(utility_), "game: missing utility oracle");
    int off = 0;
    for (std::size_t i = 0; i < players_.size(); ++i) {
      const auto& p = players_[i];
      const std::string who = "player " + std::to_string(i) + ": ";
      require(p.loss_probability > 0.0 && p.loss_probability <= 1.0,
              who + "loss probability must lie in (0, 1]");
      if (auto bad = validate_safety_ball(p.action_set, p.safety_ball))
        throw InvalidArgument(who + "safety ball not contained: " + *bad);
      offsets_.push_back(off);
      off += p.dim();
    }
    total_dim_ = off;
  }

  static GameSpec affine(std::vector<PlayerSpec> players, AffineForm form) {
    int n = 0;
    for (const auto& p : players) n += p.dim();
    require(form.M.rows() == n && form.M.cols() == n, "affine game: M must be n x n");
    require(form.m.size() == n, "affine game: m must have length n");
    if (form.constant.size() == 0) form.constant = Vec::Zero(static_cast<Eigen::Index>(players.size()));
    require(form.constant.size() == static_cast<Eigen::Index>(players.size()),
            "affine game: one constant per player");
    int off = 0;
    for (const auto& p : players) {
      const int d = p.dim();
      const Mat blk = form.M.block(off, off, d, d);
      require((blk - blk.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
              "affine game: diagonal blocks of M must be symmetric");
      off += d;
    }
    auto shared = std::make_shared<const AffineForm>(std::move(form));
    std::vector<int> offsets;
    off = 0;
    for (const auto& p : players) {
      offsets.push_back(off);
      off += p.dim();
    }
    const auto nplayers = static_cast<Eigen::Index>(players.size());
    // Interaction matrices in fog-style games are mostly zeros.
    auto sparse = std::make_shared<const Eigen::SparseMatrix<double, Eigen::RowMajor>>(
        shared->M.sparseView());
    UtilityOracle u = [shared, sparse, offsets, dims = dims_of(players), nplayers](const Vec& a) {
      const Vec Ma = *sparse * a;
      Vec out(nplayers);
      for (Eigen::Index i = 0; i < nplayers; ++i) {
        const int o = offsets[i];
        const int d = dims[i];
        double own = 0.0;
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c) own += a[o + r] * shared->M(o + r, o + c) * a[o + c];
        double lin = 0.0;
        for (int r = 0; r < d; ++r) lin += a[o + r] * (shared->m[o + r] - Ma[o + r]);
        out[i] = shared->constant[i] + lin + 0.5 * own;
      }
      return out;
    };
    GradientOracle g = [shared](const Vec& a) -> Vec { return shared->m - shared->M * a; };
    GameSpec game(std::move(players), std::move(u), std::move(g));
    game.affine_ = shared;
    return game;
  }

  int n_players() const { return static_cast<int>(players_.size()); }
  int total_dim() const { return total_dim_; }
  int dim(int i) const { return players_[i].dim(); }
  int offset(int i) const { return offsets_[i]; }
  const PlayerSpec& player(int i) const { return players_[i]; }
  const std::vector<PlayerSpec>& players() const { return players_; }

  const UtilityOracle& utility_oracle() const { return utility_; }
  const std::optional<GradientOracle>& gradient_oracle() const { return gradient_; }
  const AffineForm* affine_form() const { return affine_.get(); }

  auto block(const Vec& a, int i) const { return a.segment(offsets_[i], dim(i)); }
  auto block(Vec& a, int i) const { return a.segment(offsets_[i], dim(i)); }

  Vec project(const Vec& a) const {
    check_joint(a);
    Vec out(total_dim_);
    for (int i = 0; i < n_players(); ++i)
      block(out, i) = ogdlb::project(players_[i].action_set, Vec(block(a, i)));
    return out;
  }

  bool feasible(const Vec& a, double tol = kContainsTol) const {
    if (a.size() != total_dim_) return false;
    for (int i = 0; i < n_players(); ++i)
      if (!contains(players_[i].action_set, Vec(block(a, i)), tol)) return false;
    return true;
  }

  Vec sample_profile(RandomSource& rng) const {
    Vec a(total_dim_);
    for (int i = 0; i < n_players(); ++i) block(a, i) = sample_point(players_[i].action_set, rng);
    return a;
  }

  Vec safety_centers() const {
    Vec c(total_dim_);
    for (int i = 0; i < n_players(); ++i) block(c, i) = players_[i].safety_ball.center;
    return c;
  }

  double min_safety_radius() const {
    double r = players_[0].safety_ball.radius;
    for (const auto& p : players_) r = std::min(r, p.safety_ball.radius);
    return r;
  }

  Vec loss_probabilities() const {
    Vec p(n_players());
    for (int i = 0; i < n_players(); ++i) p[i] = players_[i].loss_probability;
    return p;
  }

  GameSpec with_loss_probabilities(const Vec& p) const {
    require(p.size() == n_players(), "with_loss_probabilities: one value per player");
    GameSpec copy = *this;
    for (int i = 0; i < n_players(); ++i) {
      require(p[i] > 0.0 && p[i] <= 1.0, "loss probability must lie in (0, 1]");
      copy.players_[i].loss_probability = p[i];
    }
    return copy;
  }

  GameSpec with_loss_probability(double p) const {
    return with_loss_probabilities(Vec::Constant(n_players(), p));
  }

  void check_joint(const Vec& a) const {
    if (a.size() != total_dim_)
      throw InvalidArgument("joint action has dim " + std::to_string(a.size()) + ", game has " +
                            std::to_string(total_dim_));
  }

 private:
  static std::vector<int> dims_of(const std::vector<PlayerSpec>& ps) {
    std::vector<int> d;
    for (const auto& p : ps) d.push_back(p.dim());
    return d;
  }

  std::vector<PlayerSpec> players_;
  std::vector<int> offsets_;
  int total_dim_ = 0;
  UtilityOracle utility_;
  std::optional<GradientOracle> gradient_;
  std::shared_ptr<const AffineForm> affine_;
};

namespace detail {

inline void require_feasible(const GameSpec& game, const Vec& a) {
  game.check_joint(a);
  if (!game.feasible(a)) throw InvalidArgument("joint action is infeasible");
}

inline double fd_step(const Vec& a) {
  return 1e-5 * (1.0 + a.cwiseAbs().maxCoeff());
}

// Central differences of each player's own utility along its own coordinates.
inline Vec finite_difference_gradient(const GameSpec& game, const Vec& a) {
  const double h = fd_step(a);
  Vec g(game.total_dim());
  Vec x = a;
  for (int i = 0; i < game.n_players(); ++i) {
    for (int j = 0; j < game.dim(i); ++j) {
      const int idx = game.offset(i) + j;
      x[idx] = a[idx] + h;
      const double up = game.utility_oracle()(x)[i];
      x[idx] = a[idx] - h;
      const double down = game.utility_oracle()(x)[i];
      x[idx] = a[idx];
      g[idx] = (up - down) / (2.0 * h);
    }
  }
  return g;
}

}  // namespace detail

inline Vec eval_utility(const GameSpec& game, const Vec& a) {
  detail::require_feasible(game, a);
  return game.utility_oracle()(a);
}

/// Stacked pseudo-gradient. Uses the analytic oracle when the game has one.
inline Vec pseudo_gradient(const GameSpec& game, const Vec& a) {
  detail::require_feasible(game, a);
  if (game.gradient_oracle()) return (*game.gradient_oracle())(a);
  return detail::finite_difference_gradient(game, a);
}

inline Vec finite_difference_pseudo_gradient(const GameSpec& game, const Vec& a) {
  detail::require_feasible(game, a);
  return detail::finite_difference_gradient(game, a);
}

// ---------------------------------------------------------------------------
// Monotonicity

enum class MonotonicityClass { strictly_monotone, strongly_monotone, indeterminate };
enum class CertificatePath { sampled, exact_affine };

struct MonotonicityCertificate {
  MonotonicityClass klass = MonotonicityClass::indeterminate;
  double beta = 0.0;
  int samples_tested = 0;
  /// Largest sampled <g(a) - g(a'), a - a'> / |a - a'|^2.
  double worst_ratio = 0.0;
  CertificatePath path = CertificatePath::sampled;

  bool strongly_monotone() const { return klass == MonotonicityClass::strongly_monotone; }
};

/// Smallest eigenvalue of the symmetric part of M.
inline double symmetric_part_min_eigenvalue(const Mat& M) {
  const Mat sym = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline MonotonicityCertificate check_monotonicity(const GameSpec& game, int n_samples,
                                                  RandomSource& rng) {
  require(n_samples >= 1, "check_monotonicity: n_samples must be >= 1");
  MonotonicityCertificate cert;
  cert.worst_ratio = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_samples; ++s) {
    const Vec a = game.sample_profile(rng);
    const Vec b = game.sample_profile(rng);
    const double dist2 = (a - b).squaredNorm();
    if (dist2 == 0.0) continue;
    const double ratio = (pseudo_gradient(game, a) - pseudo_gradient(game, b)).dot(a - b) / dist2;
    cert.worst_ratio = std::max(cert.worst_ratio, ratio);
    ++cert.samples_tested;
  }
  if (const auto* form = game.affine_form()) {
    cert.path = CertificatePath::exact_affine;
    const double lmin = symmetric_part_min_eigenvalue(form->M);
    if (lmin > 0.0) {
      cert.klass = MonotonicityClass::strongly_monotone;
      cert.beta = lmin;
    }
    return cert;
  }
  if (cert.samples_tested > 0 && cert.worst_ratio < 0.0) {
    cert.klass = MonotonicityClass::strongly_monotone;
    cert.beta = -cert.worst_ratio;
  }
  return cert;
}

// ---------------------------------------------------------------------------
// Constants

struct GameConstants {
  Vec lipschitz;      // L_i, sampled lower bound
  Vec utility_bound;  // G_i = d_i * max |u_i|, sampled lower bound
  Vec diameter;       // B_i, exact
};

namespace detail {

inline void for_each_box_vertex(const GameSpec& game, const std::function<void(const Vec&)>& f) {
  const int n = game.total_dim();
  Vec lo(n), hi(n);
  for (int i = 0; i < game.n_players(); ++i) {
    const auto* b = game.player(i).action_set.as_box();
    if (!b) return;
    game.block(lo, i) = b->lower;
    game.block(hi, i) = b->upper;
  }
  Vec v(n);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    for (int j = 0; j < n; ++j) v[j] = (mask >> j) & 1U ? hi[j] : lo[j];
    f(v);
  }
}

}  // namespace detail

inline GameConstants estimate_constants(const GameSpec& game, int n_samples, RandomSource& rng) {
  require(n_samples >= 2, "estimate_constants: n_samples must be >= 2");
  const int N = game.n_players();
  GameConstants c{Vec::Zero(N), Vec::Zero(N), Vec(N)};
  Vec max_abs_u = Vec::Zero(N);
  auto track_u = [&](const Vec& a) {
    max_abs_u = max_abs_u.cwiseMax(game.utility_oracle()(a).cwiseAbs());
  };
  for (int s = 0; s < n_samples; ++s) {
    const Vec a = game.sample_profile(rng);
    const Vec b = game.sample_profile(rng);
    track_u(a);
    track_u(b);
    const double dist = (a - b).norm();
    if (dist == 0.0) continue;
    const Vec dg = pseudo_gradient(game, a) - pseudo_gradient(game, b);
    for (int i = 0; i < N; ++i)
      c.lipschitz[i] = std::max(c.lipschitz[i], game.block(dg, i).norm() / dist);
  }
  if (game.total_dim() <= 12) detail::for_each_box_vertex(game, track_u);
  for (int i = 0; i < N; ++i) {
    c.utility_bound[i] = game.dim(i) * max_abs_u[i];
    c.diameter[i] = diameter(game.player(i).action_set);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Nash equilibrium via the variational inequality

struct NashSolution {
  Vec point;
  double vi_residual = 0.0;
  int solver_iterations = 0;
};

/// Lipschitz constant of the full pseudo-gradient: exact for affine games,
/// sampled otherwise.
inline double pseudo_gradient_lipschitz(const GameSpec& game, RandomSource& rng,
                                        int n_samples = 200) {
  if (const auto* form = game.affine_form()) {
    Eigen::JacobiSVD<Mat> svd(form->M);
    return svd.singularValues()(0);
  }
  double L = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    const Vec a = game.sample_profile(rng);
    const Vec b = game.sample_profile(rng);
    const double dist = (a - b).norm();
    if (dist > 0.0)
      L = std::max(L, (pseudo_gradient(game, a) - pseudo_gradient(game, b)).norm() / dist);
  }
  return L;
}

/// Natural-map residual |a - P(a + tau g(a))|.
inline double vi_residual(const GameSpec& game, const Vec& a, double tau) {
  return (a - game.project(a + tau * pseudo_gradient(game, a))).norm();
}

/// Extragradient on the VI. Intended for (strictly) monotone games; throws
/// ConvergenceError carrying the best iterate when max_iter is exhausted.
inline NashSolution solve_nash(const GameSpec& game, double tol, int max_iter,
                               std::optional<Vec> start = std::nullopt,
                               std::uint64_t seed = 0x5eedULL) {
  require(tol > 0.0, "solve_nash: tol must be positive");
  RandomSource rng(seed);
  const double L = pseudo_gradient_lipschitz(game, rng);
  const double tau = L > 0.0 ? 0.5 / L : 1.0;
  Vec a = start ? game.project(*start) : game.safety_centers();
  Vec best = a;
  double best_res = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= max_iter; ++it) {
    const Vec g = pseudo_gradient(game, a);
    const Vec half = game.project(a + tau * g);
    const double res = (a - half).norm();
    if (res < best_res) {
      best_res = res;
      best = a;
    }
    if (res <= tol) return NashSolution{a, res, it};
    a = game.project(a + tau * pseudo_gradient(game, half));
  }
  throw ConvergenceError("solve_nash: no convergence within " + std::to_string(max_iter) +
                             " iterations (residual " + std::to_string(best_res) + ")",
                         best, best_res);
}

// ---------------------------------------------------------------------------
// Smoothed-gradient Monte-Carlo oracle

struct SmoothedGradient {
  Vec mean;            // stacked, per coordinate
  Vec standard_error;  // per coordinate
  Vec pivot;           // joint pivot profile at which the smoothed gradient lives
  Vec mean_squared_norm;  // per player E|g_hat_i|^2
};

/// Monte-Carlo mean of the one-point estimator at a frozen intended profile.
inline SmoothedGradient smoothed_gradient_oracle(const GameSpec& game, const Vec& a, double delta,
                                                 long long n_mc, RandomSource& rng) {
  detail::require_feasible(game, a);
  require(delta > 0.0, "smoothed_gradient_oracle: delta must be positive");
  require(delta < game.min_safety_radius(),
          "smoothed_gradient_oracle: delta >= min safety radius");
  require(n_mc >= 2, "smoothed_gradient_oracle: n_mc must be >= 2");
  const int n = game.total_dim();
  const int N = game.n_players();
  Vec lambda(n), theta(n), pivot(n), applied(n);
  Vec sum = Vec::Zero(n), sum_sq = Vec::Zero(n), norm_sq = Vec::Zero(N);
  for (long long s = 0; s < n_mc; ++s) {
    for (int i = 0; i < N; ++i) {
      const auto& ball = game.player(i).safety_ball;
      game.block(lambda, i) = sample_unit_sphere(game.dim(i), rng);
      perturb_into(game.block(a, i), ball, game.block(lambda, i), delta, game.block(theta, i),
                   game.block(pivot, i), game.block(applied, i));
    }
    const Vec u = game.utility_oracle()(applied);
    for (int i = 0; i < N; ++i) {
      const double scale = game.dim(i) / delta * u[i];
      const auto ghat = scale * game.block(lambda, i);
      game.block(sum, i) += ghat;
      game.block(sum_sq, i) += ghat.cwiseAbs2();
      norm_sq[i] += scale * scale;
    }
  }
  const double m = static_cast<double>(n_mc);
  SmoothedGradient out;
  out.mean = sum / m;
  const Vec var = ((sum_sq / m) - out.mean.cwiseAbs2()) * (m / (m - 1.0));
  out.standard_error = (var.cwiseMax(0.0) / m).cwiseSqrt();
  out.pivot = pivot;
  out.mean_squared_norm = norm_sq / m;
  return out;
}

}  // namespace ogdlb
