#pragma once

// Networked Cournot game between fog service providers (FSPs) supplying
// app-user markets (AUMs) over a bipartite graph.
//
// FSP i holds one supply variable per market it serves. With s_j the total
// supply to market j,
//   u_i(a) = scale * ( sum_{j in S_i} a_ij (pbar_j - d_j s_j) - q_i |a_i|^2 - b_i'a_i ),
// i.e. linear inverse demand per market and quadratic-plus-linear costs. The
// pseudo-gradient is affine, so everything downstream gets exact oracles.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ogdlb/game.hpp"
#include "ogdlb/random.hpp"

namespace ogdlb {

struct FogGameParams {
  int n_fsp = 20;
  int n_aum = 7;
  /// markets[i] lists the AUMs served by FSP i, strictly increasing.
  std::vector<std::vector<int>> markets;
  std::vector<double> price_intercept;  // pbar_j
  std::vector<double> price_slope;      // d_j
  std::vector<double> cost_quadratic;   // q_i
  std::vector<std::vector<double>> cost_linear;  // b_i, one entry per served market
  std::vector<double> capacity;         // per FSP; each supply lies in [0, cap_i]
  std::vector<double> loss_probability;  // per FSP
  double scale = 1.0;

  int dim(int i) const { return static_cast<int>(markets[i].size()); }
  int total_dim() const {
    int n = 0;
    for (const auto& m : markets) n += static_cast<int>(m.size());
    return n;
  }
};

inline void validate(const FogGameParams& p) {
  require(p.n_fsp >= 1 && p.n_aum >= 1, "fog: need at least one FSP and one AUM");
  const auto nf = static_cast<std::size_t>(p.n_fsp);
  const auto na = static_cast<std::size_t>(p.n_aum);
  require(p.markets.size() == nf, "fog: markets must list every FSP");
  require(p.price_intercept.size() == na && p.price_slope.size() == na,
          "fog: one price intercept and slope per AUM");
  require(p.cost_quadratic.size() == nf && p.cost_linear.size() == nf && p.capacity.size() == nf &&
              p.loss_probability.size() == nf,
          "fog: per-FSP parameter lists must have n_fsp entries");
  require(p.scale > 0.0, "fog: scale must be positive");
  std::vector<int> served(na, 0);
  for (std::size_t i = 0; i < nf; ++i) {
    const auto& m = p.markets[i];
    const std::string who = "fog: FSP " + std::to_string(i);
    require(!m.empty(), who + " serves no market");
    require(std::is_sorted(m.begin(), m.end()) &&
                std::adjacent_find(m.begin(), m.end()) == m.end(),
            who + " market list must be strictly increasing");
    for (int j : m) {
      require(j >= 0 && j < p.n_aum, who + " serves unknown market " + std::to_string(j));
      ++served[static_cast<std::size_t>(j)];
    }
    require(p.cost_linear[i].size() == m.size(), who + " needs one linear cost per market");
    for (double b : p.cost_linear[i]) require(b >= 0.0, who + " linear cost must be nonnegative");
    require(p.cost_quadratic[i] > 0.0, who + " quadratic cost must be positive");
    require(p.capacity[i] > 0.0, who + " capacity must be positive");
  }
  for (std::size_t j = 0; j < na; ++j) {
    require(served[j] > 0, "fog: AUM " + std::to_string(j) + " has no supplier");
    require(p.price_intercept[j] > 0.0 && p.price_slope[j] > 0.0,
            "fog: AUM " + std::to_string(j) + " price parameters must be positive");
  }
}

inline AffineForm fog_affine_form(const FogGameParams& p) {
  const int n = p.total_dim();
  std::vector<int> edge_market, edge_fsp;
  for (int i = 0; i < p.n_fsp; ++i)
    for (int j : p.markets[i]) {
      edge_market.push_back(j);
      edge_fsp.push_back(i);
    }
  AffineForm f;
  f.M = Mat::Zero(n, n);
  f.m = Vec(n);
  f.constant = Vec::Zero(p.n_fsp);
  int e = 0;
  for (int i = 0; i < p.n_fsp; ++i) {
    for (std::size_t t = 0; t < p.markets[i].size(); ++t, ++e) {
      const int j = edge_market[e];
      f.m[e] = p.price_intercept[j] - p.cost_linear[i][t];
      for (int e2 = 0; e2 < n; ++e2)
        if (edge_market[e2] == j) f.M(e, e2) = p.price_slope[j];
      f.M(e, e) += p.price_slope[j] + 2.0 * p.cost_quadratic[i];
    }
  }
  f.M *= p.scale;
  f.m *= p.scale;
  return f;
}

/// Monotonicity modulus of the instance: smallest eigenvalue of sym(M).
inline double fog_beta(const FogGameParams& p) {
  return symmetric_part_min_eigenvalue(fog_affine_form(p).M);
}

inline GameSpec build_fog_game(const FogGameParams& p) {
  validate(p);
  AffineForm form = fog_affine_form(p);
  const double beta = symmetric_part_min_eigenvalue(form.M);
  if (!(beta > 0.0))
    throw InvalidArgument("fog: game is not strongly monotone (min eigenvalue " +
                          std::to_string(beta) + ")");
  std::vector<PlayerSpec> players;
  for (int i = 0; i < p.n_fsp; ++i) {
    const int d = p.dim(i);
    const double cap = p.capacity[i];
    players.push_back(PlayerSpec{ConvexSet::box(d, 0.0, cap),
                                 SafetyBall{Vec::Constant(d, 0.5 * cap), 0.4 * 0.5 * cap},
                                 p.loss_probability[i]});
  }
  return GameSpec::affine(std::move(players), std::move(form));
}

/// Reproducible 20 x 7 instance. Each FSP serves 2 to 4 distinct markets;
/// pbar in [8, 12], d in [0.5, 1.5], q in [0.5, 1], b in [0, 1], cap = 5.
/// Adjacency is resampled until every market has a supplier.
inline FogGameParams default_fog_params(std::uint64_t seed, double loss_probability = 1.0) {
  RandomSource rng(combine_key(seed, 0xf06ULL));
  constexpr int kMaxTries = 1000;
  for (int attempt = 0; attempt < kMaxTries; ++attempt) {
    FogGameParams p;
    p.markets.assign(static_cast<std::size_t>(p.n_fsp), {});
    std::vector<int> served(static_cast<std::size_t>(p.n_aum), 0);
    for (auto& m : p.markets) {
      const int count = 2 + static_cast<int>(rng.below(3));
      std::vector<int> all(static_cast<std::size_t>(p.n_aum));
      std::iota(all.begin(), all.end(), 0);
      for (int t = 0; t < count; ++t) {
        const auto pick = t + static_cast<int>(rng.below(static_cast<std::uint64_t>(p.n_aum - t)));
        std::swap(all[t], all[pick]);
        m.push_back(all[t]);
        ++served[static_cast<std::size_t>(all[t])];
      }
      std::sort(m.begin(), m.end());
    }
    for (int j = 0; j < p.n_aum; ++j) {
      p.price_intercept.push_back(rng.uniform(8.0, 12.0));
      p.price_slope.push_back(rng.uniform(0.5, 1.5));
    }
    for (int i = 0; i < p.n_fsp; ++i) {
      p.cost_quadratic.push_back(rng.uniform(0.5, 1.0));
      std::vector<double> b;
      for (std::size_t t = 0; t < p.markets[i].size(); ++t) b.push_back(rng.uniform(0.0, 1.0));
      p.cost_linear.push_back(std::move(b));
      p.capacity.push_back(5.0);
      p.loss_probability.push_back(loss_probability);
    }
    if (std::any_of(served.begin(), served.end(), [](int s) { return s == 0; })) continue;
    if (fog_beta(p) > 0.0) return p;
  }
  throw InvalidArgument("fog: instance sampling retry cap exceeded for seed " +
                        std::to_string(seed));
}

/// The default instance with utilities scaled so that the monotonicity modulus
/// equals `target_beta` (scale = target_beta / beta of the unscaled instance).
inline FogGameParams weak_beta_fog_params(std::uint64_t seed, double target_beta = 0.1,
                                          double loss_probability = 1.0) {
  FogGameParams p = default_fog_params(seed, loss_probability);
  p.scale = target_beta / fog_beta(p);
  return p;
}

}  // namespace ogdlb
