#pragma once

// Online gradient ascent with lossy one-point bandit feedback.
//
// Each round every player pulls its intended action toward its safety-ball
// center, perturbs it along a uniform unit direction, and plays the result.
// The realized utility reaches the player only when its loss channel lets it
// through; on delivery the player takes a projected ascent step along the
// single-query gradient estimate, otherwise its intended action stays put.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ogdlb/common.hpp"
#include "ogdlb/convex_set.hpp"
#include "ogdlb/estimator.hpp"
#include "ogdlb/game.hpp"
#include "ogdlb/random.hpp"

namespace ogdlb {

// ---------------------------------------------------------------------------
// Schedules

/// gamma_{i,k} = k^-b * p_i^-w
struct KnownP {
  double b;
  double w = 1.0;
};

/// gamma_{i,k} = 1 / (k p_i)
struct RateOptimal {};

/// gamma_{i,k} = Gamma_i^k ^ -q, where Gamma counts delivered rounds.
struct UnknownP {
  double q;
};

using StepSchedule = std::variant<KnownP, RateOptimal, UnknownP>;

inline void validate(const StepSchedule& s) {
  if (const auto* k = std::get_if<KnownP>(&s)) {
    require(k->b > 0.0 && k->b < 1.0, "known-p schedule: b must lie in (0, 1)");
    require(k->w > 0.0, "known-p schedule: w must be positive");
  } else if (const auto* u = std::get_if<UnknownP>(&s)) {
    require(u->q > 0.5 && u->q <= 1.0, "unknown-p schedule: q must lie in (1/2, 1]");
  }
}

inline double known_p_step(const KnownP& s, std::int64_t k, double p) {
  return std::pow(static_cast<double>(k), -s.b) * std::pow(p, -s.w);
}

inline double rate_optimal_step(std::int64_t k, double p) {
  return 1.0 / (static_cast<double>(k) * p);
}

/// Deliberately takes no probability: the unknown-p rule only sees its own
/// delivery count.
inline double unknown_p_step(const UnknownP& s, std::int64_t updates) {
  return std::pow(static_cast<double>(updates), -s.q);
}

/// Step size for one player. `updates` is Gamma_i^k including the current
/// round when it was delivered. `p` is consulted by the known-p variants only.
inline double step_size(const StepSchedule& s, std::int64_t k, std::int64_t updates, double p) {
  require(k >= 1, "step_size: k must be >= 1");
  if (const auto* kp = std::get_if<KnownP>(&s)) return known_p_step(*kp, k, p);
  if (std::holds_alternative<RateOptimal>(s)) return rate_optimal_step(k, p);
  return unknown_p_step(std::get<UnknownP>(s), std::max<std::int64_t>(updates, 1));
}

/// delta_k = delta1 * k^-c
struct PerturbationSchedule {
  double delta1;
  double c;

  double at(std::int64_t k) const { return delta1 * std::pow(static_cast<double>(k), -c); }

  void validate_against(const GameSpec& game) const {
    require(delta1 > 0.0, "perturbation: delta1 must be positive");
    require(c >= 0.0, "perturbation: c must be nonnegative");
    const double rmin = game.min_safety_radius();
    if (!(delta1 < rmin))
      throw InvalidArgument("perturbation: delta1 >= min r_i (" + std::to_string(delta1) +
                            " >= " + std::to_string(rmin) + ")");
  }
};

// ---------------------------------------------------------------------------
// Schedule validators

struct ScheduleVerdict {
  bool ok = true;
  std::string reason;
};

namespace detail {

// sum_k k^-s is finite iff s > 1.
inline bool power_series_converges(double exponent) { return exponent > 1.0; }

}  // namespace detail

/// Step/radius conditions for almost-sure convergence with power-law
/// schedules: sum gamma = inf, sum gamma delta < inf, sum gamma^2/delta^2 < inf,
/// delta -> 0. For unknown p the same conditions are applied with k^-q.
inline ScheduleVerdict check_convergence_conditions(const StepSchedule& step,
                                                    const PerturbationSchedule& pert) {
  double b = 1.0;
  std::string sym = "b";
  if (const auto* kp = std::get_if<KnownP>(&step)) {
    b = kp->b;
  } else if (const auto* up = std::get_if<UnknownP>(&step)) {
    b = up->q;
    sym = "q";
  }
  const double c = pert.c;
  if (!(c > 0.0)) return {false, "delta_k must vanish (c > 0)"};
  if (detail::power_series_converges(b))
    return {false, "sum gamma_k must diverge (" + sym + " <= 1)"};
  if (!detail::power_series_converges(b + c))
    return {false, "sum gamma_k delta_k must converge (" + sym + " + c > 1)"};
  if (!detail::power_series_converges(2.0 * b - 2.0 * c))
    return {false, "sum gamma_k^2 / delta_k^2 must converge (2" + sym + " - 2c = " +
                       std::to_string(2.0 * b - 2.0 * c) + " must exceed 1)"};
  return {};
}

/// Sublinear-regret conditions for the known-p schedule: 0 < c < b/2.
inline ScheduleVerdict check_no_regret_conditions(const StepSchedule& step,
                                                  const PerturbationSchedule& pert) {
  double b = 1.0;
  if (const auto* kp = std::get_if<KnownP>(&step)) b = kp->b;
  else if (const auto* up = std::get_if<UnknownP>(&step)) b = up->q;
  if (!(pert.c > 0.0 && pert.c < b / 2.0))
    return {false, "regret bound requires 0 < c < b/2 (c = " + std::to_string(pert.c) +
                       ", b/2 = " + std::to_string(b / 2.0) + ")"};
  return {};
}

// ---------------------------------------------------------------------------
// Loss channels

/// Source of delivery indicators I_i^k.
class LossChannel {
 public:
  virtual ~LossChannel() = default;
  virtual bool delivered(std::uint64_t path_seed, std::int64_t k, int player) const = 0;
};

/// Independent Bernoulli(p_i) deliveries, one substream per (round, player).
class BernoulliChannel final : public LossChannel {
 public:
  explicit BernoulliChannel(Vec p) : p_(std::move(p)) {
    for (Eigen::Index i = 0; i < p_.size(); ++i)
      require(p_[i] > 0.0 && p_[i] <= 1.0, "loss probability must lie in (0, 1]");
  }

  bool delivered(std::uint64_t path_seed, std::int64_t k, int player) const override {
    const double p = p_[player];
    if (p >= 1.0) return true;
    RandomSource rng(path_seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(player),
                     StreamTag::loss);
    return rng.bernoulli(p);
  }

 private:
  Vec p_;
};

/// Scripted indicators: row k-1 holds the N indicators of round k. Rounds past
/// the end of the script repeat it cyclically.
class ScriptedChannel final : public LossChannel {
 public:
  ScriptedChannel(std::vector<std::vector<std::uint8_t>> rows, int n_players)
      : rows_(std::move(rows)) {
    require(!rows_.empty(), "scripted channel: no rows");
    for (std::size_t r = 0; r < rows_.size(); ++r)
      require(static_cast<int>(rows_[r].size()) == n_players,
              "scripted channel: row " + std::to_string(r + 1) + " has " +
                  std::to_string(rows_[r].size()) + " entries, expected " +
                  std::to_string(n_players));
  }

  bool delivered(std::uint64_t, std::int64_t k, int player) const override {
    return rows_[static_cast<std::size_t>(k - 1) % rows_.size()][player] != 0;
  }

  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::vector<std::uint8_t>> rows_;
};

/// Reads a 0/1 matrix, one round per line, separated by spaces or commas.
/// Blank lines and text after # are ignored.
inline ScriptedChannel read_indicator_stream(std::istream& in, int n_players) {
  std::vector<std::vector<std::uint8_t>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = line.substr(0, line.find('#'));
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::vector<std::uint8_t> row;
    std::string tok;
    while (ls >> tok) {
      if (tok != "0" && tok != "1")
        throw InvalidArgument("indicator stream line " + std::to_string(line_no) +
                              ": expected 0 or 1, got '" + tok + "'");
      row.push_back(tok == "1" ? 1 : 0);
    }
    if (row.empty()) continue;
    if (static_cast<int>(row.size()) != n_players)
      throw InvalidArgument("indicator stream line " + std::to_string(line_no) + ": expected " +
                            std::to_string(n_players) + " values");
    rows.push_back(std::move(row));
  }
  return ScriptedChannel(std::move(rows), n_players);
}

inline ScriptedChannel read_indicator_file(const std::string& path, int n_players) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open indicator stream " + path);
  return read_indicator_stream(in, n_players);
}

// ---------------------------------------------------------------------------
// State and records

struct LearnerState {
  std::int64_t round = 1;
  Vec intended;                             // stacked a_{i,k}
  std::vector<std::int64_t> update_count;  // Gamma_i^{k-1}

  static LearnerState initial(const GameSpec& game, const Vec& a1) {
    game.check_joint(a1);
    require(game.feasible(a1), "initial actions are infeasible");
    return LearnerState{1, a1, std::vector<std::int64_t>(game.n_players(), 0)};
  }
};

/// One round's trace. Vectors are stacked over players.
struct StepRecord {
  std::int64_t round = 0;
  double delta = 0.0;
  Vec intended;  // a_k, before the update
  Vec lambda;
  Vec theta;
  Vec pivot;
  Vec applied;
  Vec gradient_estimate;
  Vec utility;                        // per player
  Vec step_size;                      // per player
  std::vector<std::uint8_t> indicator;  // per player

  void resize(const GameSpec& game) {
    const int n = game.total_dim();
    const int N = game.n_players();
    if (intended.size() == n && utility.size() == N) return;
    intended.resize(n);
    lambda.resize(n);
    theta.resize(n);
    pivot.resize(n);
    applied.resize(n);
    gradient_estimate.resize(n);
    utility.resize(N);
    step_size.resize(N);
    indicator.assign(N, 0);
  }
};

struct Schedules {
  StepSchedule step;
  PerturbationSchedule perturbation;
};

/// Validates schedule invariants and the radius bound against `game`.
inline void validate(const Schedules& s, const GameSpec& game) {
  validate(s.step);
  s.perturbation.validate_against(game);
}

/// One synchronous round for all players. `state` is advanced in place and
/// the round's trace is written into `rec`.
inline void run_round(const GameSpec& game, LearnerState& state, const Schedules& sched,
                      const LossChannel& channel, std::uint64_t path_seed, StepRecord& rec) {
  const std::int64_t k = state.round;
  const double delta = sched.perturbation.at(k);
  if (!(delta < game.min_safety_radius()))
    throw InvalidArgument("round " + std::to_string(k) + ": delta_k >= min r_i");
  rec.resize(game);
  rec.round = k;
  rec.delta = delta;
  rec.intended = state.intended;
  const int N = game.n_players();

  // All applied actions are formed before any utility is evaluated.
  for (int i = 0; i < N; ++i) {
    RandomSource rng(path_seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(i),
                     StreamTag::sphere);
    sample_unit_sphere_into(game.block(rec.lambda, i), rng);
    perturb_into(game.block(state.intended, i), game.player(i).safety_ball,
                 game.block(rec.lambda, i), delta, game.block(rec.theta, i),
                 game.block(rec.pivot, i), game.block(rec.applied, i));
  }
  rec.utility = game.utility_oracle()(rec.applied);

  for (int i = 0; i < N; ++i) {
    const int d = game.dim(i);
    game.block(rec.gradient_estimate, i) = (d / delta * rec.utility[i]) * game.block(rec.lambda, i);
    const bool got = channel.delivered(path_seed, k, i);
    rec.indicator[i] = got ? 1 : 0;
    if (!got) {
      rec.step_size[i] = 0.0;
      continue;
    }
    // Increment first, so the unknown-p rule sees Gamma >= 1.
    const std::int64_t updates = ++state.update_count[i];
    double gamma = 0.0;
    if (const auto* up = std::get_if<UnknownP>(&sched.step)) {
      gamma = unknown_p_step(*up, updates);
    } else {
      gamma = step_size(sched.step, k, updates, game.player(i).loss_probability);
    }
    rec.step_size[i] = gamma;
    auto a_i = game.block(state.intended, i);
    a_i += gamma * game.block(rec.gradient_estimate, i);
    project_in_place(game.player(i).action_set, a_i);
  }
  ++state.round;
}

inline std::pair<LearnerState, StepRecord> run_round(const GameSpec& game, LearnerState state,
                                                     const Schedules& sched,
                                                     const LossChannel& channel,
                                                     std::uint64_t path_seed) {
  StepRecord rec;
  run_round(game, state, sched, channel, path_seed, rec);
  return {std::move(state), std::move(rec)};
}

// ---------------------------------------------------------------------------
// Paths

/// Rounds at which records are retained.
class RecordGrid {
 public:
  static RecordGrid full(std::int64_t horizon) { return stride(horizon, 1); }

  /// {1, 1 + s, 1 + 2s, ...} together with the horizon.
  static RecordGrid stride(std::int64_t horizon, std::int64_t s) {
    require(horizon >= 1 && s >= 1, "record grid: horizon and stride must be >= 1");
    RecordGrid g;
    for (std::int64_t k = 1; k <= horizon; k += s) g.ks_.push_back(k);
    if (g.ks_.back() != horizon) g.ks_.push_back(horizon);
    return g;
  }

  /// Roughly `points` geometrically spaced rounds in [1, horizon], deduplicated.
  static RecordGrid geometric(std::int64_t horizon, int points) {
    require(horizon >= 1 && points >= 2, "record grid: need horizon >= 1 and >= 2 points");
    RecordGrid g;
    const double lg = std::log(static_cast<double>(horizon));
    for (int j = 0; j < points; ++j) {
      const auto k = static_cast<std::int64_t>(std::llround(std::exp(lg * j / (points - 1))));
      const std::int64_t kk = std::clamp<std::int64_t>(k, 1, horizon);
      if (g.ks_.empty() || kk > g.ks_.back()) g.ks_.push_back(kk);
    }
    if (g.ks_.back() != horizon) g.ks_.push_back(horizon);
    return g;
  }

  /// Full trace below 10^4 rounds, ~500 geometric points from there on.
  static RecordGrid standard(std::int64_t horizon) {
    return horizon >= 10000 ? geometric(horizon, 500) : full(horizon);
  }

  static RecordGrid explicit_rounds(std::vector<std::int64_t> ks) {
    require(!ks.empty(), "record grid: empty");
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    require(ks.front() >= 1, "record grid: rounds start at 1");
    RecordGrid g;
    g.ks_ = std::move(ks);
    return g;
  }

  const std::vector<std::int64_t>& rounds() const { return ks_; }
  std::size_t size() const { return ks_.size(); }
  std::int64_t horizon() const { return ks_.back(); }

 private:
  std::vector<std::int64_t> ks_;
};

struct TrajectoryLog {
  std::vector<StepRecord> records;  // at the grid's rounds, in order
  LearnerState final_state;
};

using RoundObserver = std::function<void(const StepRecord&)>;

struct PathOptions {
  std::optional<RecordGrid> grid;  // defaults to RecordGrid::standard(horizon)
  RoundObserver observer;          // sees every round, recorded or not
  const LossChannel* channel = nullptr;  // defaults to Bernoulli(p_i)
};

inline TrajectoryLog run_path(const GameSpec& game, const Schedules& sched, std::int64_t horizon,
                              const Vec& initial, std::uint64_t path_seed,
                              const PathOptions& opts = {}) {
  require(horizon >= 1, "run_path: horizon must be >= 1");
  validate(sched, game);
  const RecordGrid grid = opts.grid ? *opts.grid : RecordGrid::standard(horizon);
  std::unique_ptr<BernoulliChannel> owned;
  const LossChannel* channel = opts.channel;
  if (!channel) {
    owned = std::make_unique<BernoulliChannel>(game.loss_probabilities());
    channel = owned.get();
  }
  TrajectoryLog log;
  log.final_state = LearnerState::initial(game, initial);
  log.records.reserve(grid.size());
  StepRecord rec;
  std::size_t next = 0;
  const auto& ks = grid.rounds();
  for (std::int64_t k = 1; k <= horizon; ++k) {
    run_round(game, log.final_state, sched, *channel, path_seed, rec);
    if (opts.observer) opts.observer(rec);
    if (next < ks.size() && ks[next] == k) {
      log.records.push_back(rec);
      ++next;
    }
  }
  return log;
}

}  // namespace ogdlb
