#pragma once

// Named experiments. Paths run in parallel but every result is gathered by
// path index before aggregation, so outputs never depend on scheduling.

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <thread>

#include "ogdlb/metrics.hpp"
#include "ogdlb/sim/config.hpp"
#include "ogdlb/sim/csv.hpp"

namespace ogdlb::sim {

/// Runs fn(0..n-1) on up to `threads` workers; results come back in index
/// order. The lowest-index exception is rethrown after all workers finish.
template <class Fn>
auto parallel_paths(int n, int threads, Fn fn) -> std::vector<decltype(fn(0))> {
  using T = decltype(fn(0));
  std::vector<std::optional<T>> slots(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i; (i = next.fetch_add(1)) < n;) {
      try {
        slots[static_cast<std::size_t>(i)].emplace(fn(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<T> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

struct DistanceTable {
  std::vector<std::int64_t> k;
  std::vector<double> mean_applied;
  std::optional<std::vector<double>> se_applied;
  std::vector<double> mean_intended;
  std::optional<std::vector<double>> se_intended;
};

struct FitRow {
  std::string series;
  RateFit fit;
};

struct RegretRow {
  std::int64_t K;
  int player;
  double mean_regret;
  std::optional<double> se;
  double mean_regret_over_K;
};

struct IterRow {
  double P;
  std::optional<std::int64_t> iterations_to_eps;
  std::optional<double> updates_at_eps;
  std::vector<double> mean_updates;     // E[mean_i Gamma_i^{k-1}] for k = 1..K
  std::vector<double> mean_rel_error;   // E||a_k - a*|| / ||a*|| for k = 1..K
};

struct ExperimentResult {
  std::string experiment;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  int n_paths = 0;
  std::vector<std::string> files;
  double wall_clock_seconds = 0.0;

  Vec nash;
  double nash_residual = 0.0;
  /// Keyed by sweep label ("" for single-curve experiments).
  std::map<std::string, DistanceTable> distance;
  std::vector<FitRow> fits;
  std::vector<RegretRow> regret;
  std::vector<IterRow> iterations;
  std::vector<double> final_relative_error;  // per path, ||a_K - a*|| / ||a*||
  std::vector<std::vector<StepRecord>> trajectories;  // per path, trajectory experiments only
};

namespace detail {

inline Schedules schedules_of(const SimConfig& cfg) { return Schedules{cfg.schedule, cfg.perturbation}; }

inline std::string label(const std::string& prefix, double v) { return prefix + format_double(v); }

inline DistanceTable distance_table(const std::vector<Series>& applied,
                                    const std::vector<Series>& intended) {
  const MeanSeries a = average_paths(applied);
  const MeanSeries b = average_paths(intended);
  return DistanceTable{a.k, a.mean, a.standard_error, b.mean, b.standard_error};
}

struct PathOutput {
  Series applied_sq;
  Series intended_sq;
  double final_relative_error = 0.0;
  std::vector<StepRecord> records;
  std::vector<RegretLedger> ledgers;
  std::vector<float> rel_error;
  std::vector<float> updates;
};

struct PathNeeds {
  bool keep_records = false;
  std::vector<std::int64_t> regret_horizons;
  bool per_round = false;
};

inline PathOutput run_one(const GameSpec& game, const Schedules& sched, const SimConfig& cfg,
                          const Vec& a_star, std::uint64_t path_seed, const LossChannel* channel,
                          const PathNeeds& needs) {
  const RunSpec& run = cfg.run;
  const Vec initial = run.initial ? *run.initial : game.safety_centers();
  PathOptions opts;
  opts.grid = run.grid();
  opts.channel = channel;
  std::optional<RegretTracker> tracker;
  if (!needs.regret_horizons.empty()) tracker.emplace(game, needs.regret_horizons);
  PathOutput out;
  const double norm_star = a_star.norm();
  std::vector<std::int64_t> cum(static_cast<std::size_t>(game.n_players()), 0);
  if (needs.per_round) {
    out.rel_error.reserve(static_cast<std::size_t>(run.horizon));
    out.updates.reserve(static_cast<std::size_t>(run.horizon));
  }
  if (tracker || needs.per_round) {
    opts.observer = [&](const StepRecord& rec) {
      if (tracker) tracker->observe(rec);
      if (needs.per_round) {
        double g = 0.0;
        for (std::size_t i = 0; i < cum.size(); ++i) g += static_cast<double>(cum[i]);
        out.updates.push_back(static_cast<float>(g / static_cast<double>(cum.size())));
        out.rel_error.push_back(static_cast<float>((rec.intended - a_star).norm() / norm_star));
        for (std::size_t i = 0; i < cum.size(); ++i) cum[i] += rec.indicator[i];
      }
    };
  }
  TrajectoryLog log = run_path(game, sched, run.horizon, initial, path_seed, opts);
  for (const auto& d : distance_to_ne(log.records, a_star)) {
    out.applied_sq.k.push_back(d.k);
    out.applied_sq.value.push_back(d.applied_sq);
    out.intended_sq.k.push_back(d.k);
    out.intended_sq.value.push_back(d.intended_sq);
  }
  out.final_relative_error = (log.final_state.intended - a_star).norm() / norm_star;
  if (tracker) out.ledgers = tracker->ledgers();
  if (needs.keep_records) out.records = std::move(log.records);
  return out;
}

inline std::vector<PathOutput> run_paths(const GameSpec& game, const Schedules& sched,
                                         const SimConfig& cfg, const Vec& a_star,
                                         const PathNeeds& needs) {
  std::unique_ptr<ScriptedChannel> scripted;
  if (cfg.run.indicator_file)
    scripted = std::make_unique<ScriptedChannel>(read_indicator_file(*cfg.run.indicator_file, game.n_players()));
  return parallel_paths(cfg.run.n_paths, cfg.run.threads, [&](int path) {
    return run_one(game, sched, cfg, a_star, derive_seed(cfg.run.master_seed, static_cast<std::uint64_t>(path)),
                   scripted.get(), needs);
  });
}

inline void add_distance(ExperimentResult& res, const std::string& key,
                         const std::vector<PathOutput>& paths) {
  std::vector<Series> a, b;
  for (const auto& p : paths) {
    a.push_back(p.applied_sq);
    b.push_back(p.intended_sq);
  }
  res.distance[key] = distance_table(a, b);
}

inline std::int64_t fit_hi(const SimConfig& cfg) {
  return cfg.experiment.fit_k_max ? *cfg.experiment.fit_k_max : cfg.run.horizon;
}

// Fits the window when it is usable; `required` turns an unusable window into an error.
inline void add_fit(ExperimentResult& res, const std::string& series, const std::vector<std::int64_t>& k,
                    const std::vector<double>& v, const SimConfig& cfg, bool required) {
  const std::int64_t lo = cfg.experiment.fit_k_min;
  const std::int64_t hi = std::min(fit_hi(cfg), cfg.run.horizon);
  try {
    res.fits.push_back(FitRow{series, loglog_slope_fit(k, v, lo, hi)});
  } catch (const InvalidArgument&) {
    if (required) throw;
  }
}

inline void add_distance_fits(ExperimentResult& res, const std::string& key, const std::string& suffix,
                              const SimConfig& cfg, bool required) {
  const auto& t = res.distance.at(key);
  add_fit(res, "applied" + suffix, t.k, t.mean_applied, cfg, required);
  add_fit(res, "intended" + suffix, t.k, t.mean_intended, cfg, required);
}

inline NashSolution nash_of(const GameSpec& game) { return solve_nash(game, 1e-11, 2'000'000); }

inline IterRow iteration_row(double P, const std::vector<PathOutput>& paths, double eps) {
  IterRow row;
  row.P = P;
  const std::size_t K = paths.front().rel_error.size();
  const double n = static_cast<double>(paths.size());
  row.mean_rel_error.assign(K, 0.0);
  row.mean_updates.assign(K, 0.0);
  for (const auto& p : paths)
    for (std::size_t t = 0; t < K; ++t) {
      row.mean_rel_error[t] += p.rel_error[t];
      row.mean_updates[t] += p.updates[t];
    }
  for (std::size_t t = 0; t < K; ++t) {
    row.mean_rel_error[t] /= n;
    row.mean_updates[t] /= n;
  }
  for (std::size_t t = 0; t < K; ++t)
    if (row.mean_rel_error[t] <= eps) {
      row.iterations_to_eps = static_cast<std::int64_t>(t + 1);
      row.updates_at_eps = row.mean_updates[t];
      break;
    }
  return row;
}

}  // namespace detail

/// Runs the configured experiment without touching the filesystem.
inline ExperimentResult compute_experiment(const SimConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult res;
  res.experiment = cfg.experiment.name;
  res.config_hash = config_hash(cfg.document);
  res.seed = cfg.run.master_seed;
  res.n_paths = cfg.run.n_paths;
  const std::string& name = cfg.experiment.name;
  const Schedules sched = detail::schedules_of(cfg);

  const NashSolution ne = detail::nash_of(cfg.game);
  res.nash = ne.point;
  res.nash_residual = ne.vi_residual;

  if (name == "trajectory" || name == "converge" || name == "rate") {
    detail::PathNeeds needs;
    needs.keep_records = name != "rate";
    auto paths = detail::run_paths(cfg.game, sched, cfg, res.nash, needs);
    detail::add_distance(res, "", paths);
    for (auto& p : paths) {
      res.final_relative_error.push_back(p.final_relative_error);
      if (needs.keep_records) res.trajectories.push_back(std::move(p.records));
    }
    detail::add_distance_fits(res, "", "", cfg, name == "rate");
  } else if (name == "regret-curve") {
    detail::PathNeeds needs;
    needs.regret_horizons = log_horizon_grid(std::min(cfg.experiment.regret_k_min, cfg.run.horizon),
                                             cfg.run.horizon, cfg.experiment.regret_per_decade);
    const auto paths = detail::run_paths(cfg.game, sched, cfg, res.nash, needs);
    detail::add_distance(res, "", paths);
    const int N = cfg.game.n_players();
    const std::size_t H = needs.regret_horizons.size();
    for (int i = 0; i < N; ++i) {
      std::vector<Series> regs;
      for (const auto& p : paths) {
        Series s;
        for (std::size_t h = 0; h < H; ++h) {
          const auto& led = p.ledgers[h * static_cast<std::size_t>(N) + static_cast<std::size_t>(i)];
          s.k.push_back(led.horizon);
          s.value.push_back(led.regret);
        }
        regs.push_back(std::move(s));
      }
      const MeanSeries m = average_paths(regs);
      for (std::size_t h = 0; h < H; ++h) {
        std::optional<double> se;
        if (m.standard_error) se = (*m.standard_error)[h];
        res.regret.push_back(RegretRow{m.k[h], i, m.mean[h], se, m.mean[h] / static_cast<double>(m.k[h])});
      }
      detail::add_fit(res, "regret_player" + std::to_string(i), m.k, m.mean, cfg, false);
    }
    // (horizon, player) order
    std::stable_sort(res.regret.begin(), res.regret.end(),
                     [](const RegretRow& x, const RegretRow& y) { return x.K < y.K; });
  } else if (name == "rate-vs-p" || name == "iter-vs-updates") {
    const bool iter = name == "iter-vs-updates";
    for (double P : cfg.experiment.p_grid) {
      const GameSpec game = cfg.game.with_loss_probability(P);
      detail::PathNeeds needs;
      needs.per_round = iter;
      const auto paths = detail::run_paths(game, sched, cfg, res.nash, needs);
      const std::string key = detail::label("P", P);
      detail::add_distance(res, key, paths);
      if (iter) res.iterations.push_back(detail::iteration_row(P, paths, cfg.experiment.epsilon));
      else detail::add_distance_fits(res, key, "_" + key, cfg, false);
    }
  } else if (name == "rate-vs-b" || name == "rate-vs-q") {
    const bool b = name == "rate-vs-b";
    for (double v : b ? cfg.experiment.b_grid : cfg.experiment.q_grid) {
      Schedules s = sched;
      if (b) std::get<KnownP>(s.step).b = v;
      else s.step = UnknownP{v};
      const auto paths = detail::run_paths(cfg.game, s, cfg, res.nash, {});
      const std::string key = detail::label(b ? "b" : "q", v);
      detail::add_distance(res, key, paths);
      detail::add_distance_fits(res, key, "_" + key, cfg, false);
    }
  }
  res.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

namespace detail {

inline void write_distance(const std::string& path, const DistanceTable& t) {
  CsvWriter w(path, {"k", "mean_dist_sq_applied", "se_applied", "mean_dist_sq_intended", "se_intended"});
  for (std::size_t j = 0; j < t.k.size(); ++j) {
    w.field(t.k[j]).field(t.mean_applied[j]);
    w.field(t.se_applied ? std::optional<double>((*t.se_applied)[j]) : std::nullopt);
    w.field(t.mean_intended[j]);
    w.field(t.se_intended ? std::optional<double>((*t.se_intended)[j]) : std::nullopt);
    w.row_end();
  }
  w.close();
}

inline void write_trajectories(const std::string& path, const GameSpec& game,
                               const std::vector<std::vector<StepRecord>>& paths) {
  CsvWriter w(path, {"path_id", "k", "player", "coord", "intended", "applied", "indicator", "step_size"});
  for (std::size_t p = 0; p < paths.size(); ++p)
    for (const auto& rec : paths[p])
      for (int i = 0; i < game.n_players(); ++i)
        for (int c = 0; c < game.dim(i); ++c) {
          const int e = game.offset(i) + c;
          w.field(static_cast<std::int64_t>(p)).field(rec.round).field(i).field(c);
          w.field(rec.intended[e]).field(rec.applied[e]);
          w.field(static_cast<int>(rec.indicator[static_cast<std::size_t>(i)]));
          w.field(rec.step_size[i]);
          w.row_end();
        }
  w.close();
}

inline json manifest_json(const ExperimentResult& r) {
  std::vector<double> ne(r.nash.data(), r.nash.data() + r.nash.size());
  return json{{"experiment", r.experiment},
              {"config_hash", hex64(r.config_hash)},
              {"seed", r.seed},
              {"paths", r.n_paths},
              {"rng_version", kRngVersion},
              {"files", r.files},
              {"nash", ne},
              {"nash_vi_residual", r.nash_residual},
              {"wall_clock_seconds", r.wall_clock_seconds}};
}

}  // namespace detail

/// Writes the result's CSVs and manifest.json into `dir`, recording file names
/// in `res.files`. Files already written are removed if any write fails.
inline void emit(ExperimentResult& res, const SimConfig& cfg, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  res.files.clear();
  auto path_of = [&](const std::string& f) {
    res.files.push_back(f);
    return (fs::path(dir) / f).string();
  };
  try {
    if (!res.trajectories.empty())
      detail::write_trajectories(path_of("trajectory.csv"), cfg.game, res.trajectories);
    for (const auto& [key, table] : res.distance)
      detail::write_distance(path_of(key.empty() ? "distance.csv" : "distance_" + key + ".csv"), table);
    if (!res.regret.empty()) {
      CsvWriter w(path_of("regret.csv"), {"K", "player", "mean_regret", "se", "mean_regret_over_K"});
      for (const auto& r : res.regret) {
        w.field(r.K).field(r.player).field(r.mean_regret).field(r.se).field(r.mean_regret_over_K);
        w.row_end();
      }
      w.close();
    }
    if (!res.fits.empty()) {
      CsvWriter w(path_of("ratefit.csv"), {"series", "k_min", "k_max", "slope", "r_squared"});
      for (const auto& f : res.fits) {
        w.field(f.series).field(f.fit.k_min).field(f.fit.k_max).field(f.fit.slope).field(f.fit.r_squared);
        w.row_end();
      }
      w.close();
    }
    if (!res.iterations.empty()) {
      CsvWriter w(path_of("iter_vs_upd.csv"), {"P", "iterations_to_eps", "updates_at_eps"});
      for (const auto& r : res.iterations) {
        w.field(r.P);
        w.field(r.iterations_to_eps ? std::to_string(*r.iterations_to_eps) : std::string("NA"));
        w.field(r.updates_at_eps);
        w.row_end();
      }
      w.close();
    }
    const std::string mpath = (fs::path(dir) / "manifest.json").string();
    res.files.push_back("manifest.json");
    std::ofstream m(mpath);
    m << detail::manifest_json(res).dump(2) << '\n';
    if (!m) throw std::runtime_error("cannot write " + mpath);
  } catch (...) {
    std::error_code ec;
    for (const auto& f : res.files) fs::remove(fs::path(dir) / f, ec);
    res.files.clear();
    throw;
  }
}

/// Runs the experiment and writes its outputs to `cfg.run.out_dir`.
inline ExperimentResult run_experiment(const SimConfig& cfg) {
  ExperimentResult res = compute_experiment(cfg);
  emit(res, cfg, cfg.run.out_dir);
  return res;
}

}  // namespace ogdlb::sim
