#pragma once

// Experiment configuration: a strict JSON document with top-level sections
// game, schedule, perturbation, run and experiment. Unknown keys are errors.

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ogdlb/fog.hpp"
#include "ogdlb/game.hpp"
#include "ogdlb/learner.hpp"
#include "ogdlb/toy_game.hpp"

namespace ogdlb::sim {

using nlohmann::json;

/// Malformed or inconsistent configuration. `what()` names the failing key or
/// constraint; parse failures carry the line number.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{
      "trajectory", "converge",  "regret-curve", "rate",
      "rate-vs-p",  "rate-vs-b", "rate-vs-q",    "iter-vs-updates"};
  return names;
}

enum class ThinningMode { standard, full, stride, geometric };

struct RunSpec {
  std::int64_t horizon = 1000;
  int n_paths = 10;
  std::uint64_t master_seed = 1;
  ThinningMode thinning = ThinningMode::standard;
  std::int64_t stride = 1;
  int grid_points = 500;
  int threads = 1;
  std::string out_dir = "out";
  std::optional<Vec> initial;  // defaults to the safety-ball centers
  std::optional<std::string> indicator_file;

  RecordGrid grid() const {
    switch (thinning) {
      case ThinningMode::full: return RecordGrid::full(horizon);
      case ThinningMode::stride: return RecordGrid::stride(horizon, stride);
      case ThinningMode::geometric: return RecordGrid::geometric(horizon, grid_points);
      case ThinningMode::standard: break;
    }
    return RecordGrid::standard(horizon);
  }
};

struct ExperimentSpec {
  std::string name = "trajectory";
  std::vector<double> p_grid{0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> b_grid{0.6, 0.7, 0.8};
  std::vector<double> q_grid{0.6, 0.7, 0.8};
  double epsilon = 0.01;
  std::int64_t regret_k_min = 10;
  int regret_per_decade = 2;
  std::int64_t fit_k_min = 1000;
  std::optional<std::int64_t> fit_k_max;
};

struct SimConfig {
  json document;  // as loaded, with overrides applied
  GameSpec game;
  StepSchedule schedule;
  PerturbationSchedule perturbation;
  RunSpec run;
  ExperimentSpec experiment;
};

// ---------------------------------------------------------------------------
// Strict JSON access

namespace detail {

inline void check_keys(const json& obj, const std::string& where,
                       const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

inline const json& need(const json& obj, const std::string& where, const std::string& key) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return obj.at(key);
}

inline double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

inline std::int64_t integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return v.get<std::int64_t>();
}

inline std::string text(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": expected a string");
  return v.get<std::string>();
}

inline double number_or(const json& obj, const std::string& where, const std::string& key,
                        double fallback) {
  return obj.contains(key) ? number(obj.at(key), where + "." + key) : fallback;
}

inline std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t j = 0; j < v.size(); ++j)
    out.push_back(number(v[j], where + "[" + std::to_string(j) + "]"));
  return out;
}

inline Vec vec(const json& v, const std::string& where) {
  const auto xs = numbers(v, where);
  return Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

inline Mat matrix(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a nonempty matrix");
  const auto rows = static_cast<Eigen::Index>(v.size());
  Mat M;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vec row = vec(v[r], where + "[" + std::to_string(r) + "]");
    if (r == 0) M.resize(rows, row.size());
    if (row.size() != M.cols()) throw ConfigError(where + ": ragged matrix");
    M.row(r) = row.transpose();
  }
  return M;
}

// Scalar broadcast to n entries, or an array of exactly n.
inline std::vector<double> per_player(const json& v, const std::string& where, std::size_t n) {
  if (v.is_number()) return std::vector<double>(n, v.get<double>());
  auto xs = numbers(v, where);
  if (xs.size() != n)
    throw ConfigError(where + ": expected " + std::to_string(n) + " values, got " +
                      std::to_string(xs.size()));
  return xs;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fog parameters <-> JSON

inline json fog_params_to_json(const FogGameParams& p) {
  return json{{"n_fsp", p.n_fsp},
              {"n_aum", p.n_aum},
              {"markets", p.markets},
              {"price_intercept", p.price_intercept},
              {"price_slope", p.price_slope},
              {"cost_quadratic", p.cost_quadratic},
              {"cost_linear", p.cost_linear},
              {"capacity", p.capacity},
              {"loss_probability", p.loss_probability},
              {"scale", p.scale}};
}

inline FogGameParams fog_params_from_json(const json& j, const std::string& where) {
  detail::check_keys(j, where,
                     {"n_fsp", "n_aum", "markets", "price_intercept", "price_slope",
                      "cost_quadratic", "cost_linear", "capacity", "loss_probability", "scale"});
  FogGameParams p;
  try {
    p.n_fsp = detail::need(j, where, "n_fsp").get<int>();
    p.n_aum = detail::need(j, where, "n_aum").get<int>();
    p.markets = detail::need(j, where, "markets").get<std::vector<std::vector<int>>>();
    p.price_intercept = detail::need(j, where, "price_intercept").get<std::vector<double>>();
    p.price_slope = detail::need(j, where, "price_slope").get<std::vector<double>>();
    p.cost_quadratic = detail::need(j, where, "cost_quadratic").get<std::vector<double>>();
    p.cost_linear = detail::need(j, where, "cost_linear").get<std::vector<std::vector<double>>>();
    p.capacity = detail::need(j, where, "capacity").get<std::vector<double>>();
    p.loss_probability = detail::need(j, where, "loss_probability").get<std::vector<double>>();
    p.scale = j.value("scale", 1.0);
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return p;
}

// ---------------------------------------------------------------------------
// Sections

inline ConvexSet set_from_json(const json& j, const std::string& where) {
  const std::string type = detail::text(detail::need(j, where, "type"), where + ".type");
  if (type == "box") {
    detail::check_keys(j, where, {"type", "lower", "upper"});
    return ConvexSet::box(detail::vec(detail::need(j, where, "lower"), where + ".lower"),
                          detail::vec(detail::need(j, where, "upper"), where + ".upper"));
  }
  if (type == "ball") {
    detail::check_keys(j, where, {"type", "center", "radius"});
    return ConvexSet::ball(detail::vec(detail::need(j, where, "center"), where + ".center"),
                           detail::number(detail::need(j, where, "radius"), where + ".radius"));
  }
  if (type == "simplex") {
    detail::check_keys(j, where, {"type", "dim", "scale"});
    return ConvexSet::simplex(
        static_cast<int>(detail::integer(detail::need(j, where, "dim"), where + ".dim")),
        detail::number(detail::need(j, where, "scale"), where + ".scale"));
  }
  throw ConfigError(where + ".type: unknown set type '" + type + "'");
}

inline GameSpec game_from_json(const json& g) {
  const std::string where = "game";
  const std::string id = detail::text(detail::need(g, where, "id"), "game.id");
  if (id == "quadratic-toy") {
    detail::check_keys(g, where,
                       {"id", "theta", "kappa", "scale", "preset", "target_beta",
                        "loss_probability", "safety_center", "safety_radius"});
    QuadraticToyParams p;
    if (g.contains("theta")) {
      const auto th = detail::numbers(g["theta"], "game.theta");
      if (th.size() != 2) throw ConfigError("game.theta: expected 2 values");
      p.theta = {th[0], th[1]};
    }
    p.kappa = detail::number_or(g, where, "kappa", p.kappa);
    p.scale = detail::number_or(g, where, "scale", p.scale);
    const std::string preset = g.contains("preset") ? detail::text(g["preset"], "game.preset") : "default";
    if (preset == "weak-beta") {
      const double target = detail::number_or(g, where, "target_beta", 0.1);
      if (std::abs(p.kappa) >= 2.0) throw ConfigError("game.preset: weak-beta needs |kappa| < 2");
      p.scale = target / (2.0 - std::abs(p.kappa));
    } else if (preset != "default") {
      throw ConfigError("game.preset: unknown preset '" + preset + "'");
    }
    if (g.contains("loss_probability")) {
      const auto lp = detail::per_player(g["loss_probability"], "game.loss_probability", 2);
      p.loss_probability = {lp[0], lp[1]};
    }
    p.safety_center = detail::number_or(g, where, "safety_center", p.safety_center);
    p.safety_radius = detail::number_or(g, where, "safety_radius", p.safety_radius);
    return quadratic_toy_game(p);
  }
  if (id == "fog") {
    detail::check_keys(g, where,
                       {"id", "seed", "preset", "target_beta", "loss_probability", "params"});
    FogGameParams p;
    if (g.contains("params")) {
      p = fog_params_from_json(g["params"], "game.params");
    } else {
      const auto seed = static_cast<std::uint64_t>(
          g.contains("seed") ? detail::integer(g["seed"], "game.seed") : 1);
      const std::string preset =
          g.contains("preset") ? detail::text(g["preset"], "game.preset") : "default";
      if (preset == "weak-beta")
        p = weak_beta_fog_params(seed, detail::number_or(g, where, "target_beta", 0.1));
      else if (preset == "default")
        p = default_fog_params(seed);
      else
        throw ConfigError("game.preset: unknown preset '" + preset + "'");
    }
    if (g.contains("loss_probability")) {
      p.loss_probability = detail::per_player(g["loss_probability"], "game.loss_probability",
                                              static_cast<std::size_t>(p.n_fsp));
    }
    return build_fog_game(p);
  }
  if (id == "affine") {
    detail::check_keys(g, where, {"id", "players", "M", "m", "constant"});
    const auto& pl = detail::need(g, where, "players");
    if (!pl.is_array() || pl.empty()) throw ConfigError("game.players: expected a nonempty array");
    std::vector<PlayerSpec> players;
    for (std::size_t i = 0; i < pl.size(); ++i) {
      const std::string w = "game.players[" + std::to_string(i) + "]";
      detail::check_keys(pl[i], w, {"set", "safety_ball", "loss_probability"});
      ConvexSet set = set_from_json(detail::need(pl[i], w, "set"), w + ".set");
      const auto& sb = detail::need(pl[i], w, "safety_ball");
      detail::check_keys(sb, w + ".safety_ball", {"center", "radius"});
      SafetyBall ball{detail::vec(detail::need(sb, w + ".safety_ball", "center"), w + ".safety_ball.center"),
                      detail::number(detail::need(sb, w + ".safety_ball", "radius"), w + ".safety_ball.radius")};
      players.push_back(PlayerSpec{std::move(set), std::move(ball),
                                   detail::number_or(pl[i], w, "loss_probability", 1.0)});
    }
    AffineForm f;
    f.M = detail::matrix(detail::need(g, where, "M"), "game.M");
    f.m = detail::vec(detail::need(g, where, "m"), "game.m");
    if (g.contains("constant")) f.constant = detail::vec(g["constant"], "game.constant");
    return GameSpec::affine(std::move(players), std::move(f));
  }
  throw ConfigError("game.id: unknown game '" + id + "' (expected quadratic-toy, fog or affine)");
}

inline StepSchedule schedule_from_json(const json& s) {
  const std::string type = detail::text(detail::need(s, "schedule", "type"), "schedule.type");
  if (type == "known-p") {
    detail::check_keys(s, "schedule", {"type", "b", "w"});
    return KnownP{detail::number(detail::need(s, "schedule", "b"), "schedule.b"),
                  detail::number_or(s, "schedule", "w", 1.0)};
  }
  if (type == "rate-optimal") {
    detail::check_keys(s, "schedule", {"type"});
    return RateOptimal{};
  }
  if (type == "unknown-p") {
    detail::check_keys(s, "schedule", {"type", "q"});
    return UnknownP{detail::number(detail::need(s, "schedule", "q"), "schedule.q")};
  }
  throw ConfigError("schedule.type: unknown schedule '" + type + "'");
}

inline PerturbationSchedule perturbation_from_json(const json& p) {
  detail::check_keys(p, "perturbation", {"delta1", "c"});
  return PerturbationSchedule{
      detail::number(detail::need(p, "perturbation", "delta1"), "perturbation.delta1"),
      detail::number(detail::need(p, "perturbation", "c"), "perturbation.c")};
}

inline RunSpec run_from_json(const json& r) {
  detail::check_keys(r, "run",
                     {"horizon", "paths", "seed", "thinning", "stride", "grid_points", "threads",
                      "out", "initial", "indicator_file"});
  RunSpec run;
  if (r.contains("horizon")) run.horizon = detail::integer(r["horizon"], "run.horizon");
  if (r.contains("paths")) run.n_paths = static_cast<int>(detail::integer(r["paths"], "run.paths"));
  if (r.contains("seed")) run.master_seed = static_cast<std::uint64_t>(detail::integer(r["seed"], "run.seed"));
  if (r.contains("thinning")) {
    const std::string t = detail::text(r["thinning"], "run.thinning");
    if (t == "standard") run.thinning = ThinningMode::standard;
    else if (t == "full") run.thinning = ThinningMode::full;
    else if (t == "stride") run.thinning = ThinningMode::stride;
    else if (t == "geometric") run.thinning = ThinningMode::geometric;
    else throw ConfigError("run.thinning: unknown mode '" + t + "'");
  }
  if (r.contains("stride")) run.stride = detail::integer(r["stride"], "run.stride");
  if (r.contains("grid_points"))
    run.grid_points = static_cast<int>(detail::integer(r["grid_points"], "run.grid_points"));
  if (r.contains("threads")) run.threads = static_cast<int>(detail::integer(r["threads"], "run.threads"));
  if (r.contains("out")) run.out_dir = detail::text(r["out"], "run.out");
  if (r.contains("initial")) run.initial = detail::vec(r["initial"], "run.initial");
  if (r.contains("indicator_file")) run.indicator_file = detail::text(r["indicator_file"], "run.indicator_file");
  if (run.horizon < 1) throw ConfigError("run.horizon: K must be >= 1");
  if (run.n_paths < 1) throw ConfigError("run.paths: must be >= 1");
  if (run.stride < 1) throw ConfigError("run.stride: must be >= 1");
  if (run.grid_points < 2) throw ConfigError("run.grid_points: must be >= 2");
  if (run.threads < 1) throw ConfigError("run.threads: must be >= 1");
  return run;
}

inline ExperimentSpec experiment_from_json(const json& e) {
  detail::check_keys(e, "experiment",
                     {"name", "p_grid", "b_grid", "q_grid", "epsilon", "regret_k_min",
                      "regret_per_decade", "fit_k_min", "fit_k_max"});
  ExperimentSpec x;
  if (e.contains("name")) x.name = detail::text(e["name"], "experiment.name");
  if (e.contains("p_grid")) x.p_grid = detail::numbers(e["p_grid"], "experiment.p_grid");
  if (e.contains("b_grid")) x.b_grid = detail::numbers(e["b_grid"], "experiment.b_grid");
  if (e.contains("q_grid")) x.q_grid = detail::numbers(e["q_grid"], "experiment.q_grid");
  x.epsilon = detail::number_or(e, "experiment", "epsilon", x.epsilon);
  if (e.contains("regret_k_min")) x.regret_k_min = detail::integer(e["regret_k_min"], "experiment.regret_k_min");
  if (e.contains("regret_per_decade"))
    x.regret_per_decade = static_cast<int>(detail::integer(e["regret_per_decade"], "experiment.regret_per_decade"));
  if (e.contains("fit_k_min")) x.fit_k_min = detail::integer(e["fit_k_min"], "experiment.fit_k_min");
  if (e.contains("fit_k_max")) x.fit_k_max = detail::integer(e["fit_k_max"], "experiment.fit_k_max");
  return x;
}

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline void check_schedule_for(const std::string& experiment, const StepSchedule& step,
                               const PerturbationSchedule& pert) {
  try {
    validate(step);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  if (experiment == "converge") {
    const auto v = check_convergence_conditions(step, pert);
    if (!v.ok) throw ConfigError("schedule/perturbation: convergence conditions fail: " + v.reason);
    return;
  }
  if (std::holds_alternative<KnownP>(step)) {
    const auto v = check_no_regret_conditions(step, pert);
    if (!v.ok) throw ConfigError("schedule/perturbation: " + v.reason);
  }
}

}  // namespace detail

/// Builds and validates a configuration from a parsed document.
inline SimConfig config_from_json(const json& doc) {
  detail::check_keys(doc, "config", {"game", "schedule", "perturbation", "run", "experiment"});
  GameSpec game = [&] {
    try {
      return game_from_json(detail::need(doc, "config", "game"));
    } catch (const ConfigError&) {
      throw;
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("game: ") + e.what());
    }
  }();
  SimConfig cfg{doc,
                std::move(game),
                schedule_from_json(detail::need(doc, "config", "schedule")),
                perturbation_from_json(detail::need(doc, "config", "perturbation")),
                run_from_json(doc.value("run", json::object())),
                experiment_from_json(doc.value("experiment", json::object()))};
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), cfg.experiment.name) == names.end())
    throw ConfigError("experiment.name: unknown experiment '" + cfg.experiment.name + "'");
  const auto& pert = cfg.perturbation;
  if (!(pert.delta1 > 0.0)) throw ConfigError("perturbation.delta1: must be positive");
  if (!(pert.c >= 0.0)) throw ConfigError("perturbation.c: must be nonnegative");
  if (!(pert.delta1 < cfg.game.min_safety_radius()))
    throw ConfigError("perturbation.delta1: delta_1 >= min r_i (" + std::to_string(pert.delta1) +
                      " >= " + std::to_string(cfg.game.min_safety_radius()) + ")");
  detail::check_schedule_for(cfg.experiment.name, cfg.schedule, pert);
  if (cfg.experiment.name == "rate-vs-b") {
    if (!std::holds_alternative<KnownP>(cfg.schedule))
      throw ConfigError("experiment rate-vs-b: requires a known-p schedule");
    for (double b : cfg.experiment.b_grid) {
      auto kp = std::get<KnownP>(cfg.schedule);
      kp.b = b;
      detail::check_schedule_for(cfg.experiment.name, kp, pert);
    }
  }
  if (cfg.experiment.name == "rate-vs-q") {
    if (!std::holds_alternative<UnknownP>(cfg.schedule))
      throw ConfigError("experiment rate-vs-q: requires an unknown-p schedule");
    for (double q : cfg.experiment.q_grid) detail::check_schedule_for(cfg.experiment.name, UnknownP{q}, pert);
  }
  for (double p : cfg.experiment.p_grid)
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("experiment.p_grid: values must lie in (0, 1]");
  if (!(cfg.experiment.epsilon > 0.0)) throw ConfigError("experiment.epsilon: must be positive");
  if (cfg.experiment.regret_per_decade < 1) throw ConfigError("experiment.regret_per_decade: must be >= 1");
  if (cfg.run.initial) {
    if (cfg.run.initial->size() != cfg.game.total_dim())
      throw ConfigError("run.initial: expected " + std::to_string(cfg.game.total_dim()) + " values");
    if (!cfg.game.feasible(*cfg.run.initial)) throw ConfigError("run.initial: infeasible");
  }
  return cfg;
}

inline json parse_config_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t j = 0; j + 1 < upto; ++j)
      if (text[j] == '\n') ++line;
    throw ConfigError("parse error at line " + std::to_string(line) + ": " + e.what());
  }
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(parse_config_text(ss.str()));
}

/// FNV-1a over the canonical serialization. Object keys serialize sorted, so
/// the hash ignores key order. Output location and thread count are excluded.
inline std::uint64_t config_hash(const json& doc) {
  json canon = doc;
  if (canon.contains("run")) {
    canon["run"].erase("out");
    canon["run"].erase("threads");
  }
  const std::string s = canon.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int j = 15; j >= 0; --j, v >>= 4) s[static_cast<std::size_t>(j)] = digits[v & 0xf];
  return s;
}

}  // namespace ogdlb::sim
