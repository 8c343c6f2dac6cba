#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ogdlb/sim/experiment.hpp"

using namespace ogdlb;
using namespace ogdlb::sim;
namespace fs = std::filesystem;

namespace {

json toy_doc(const std::string& experiment = "regret-curve") {
  return json::parse(R"({
    "game": {"id": "quadratic-toy", "loss_probability": 0.6},
    "schedule": {"type": "known-p", "b": 0.7},
    "perturbation": {"delta1": 0.5, "c": 0.32},
    "run": {"horizon": 1000, "paths": 2, "seed": 7},
    "experiment": {"name": ")" + experiment + R"("}
  })");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t data_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n - 1;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ogdlb_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string error_of(const json& doc) {
  try {
    config_from_json(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, PaperRegretSettingsAccepted) {
  const auto cfg = config_from_json(toy_doc());
  EXPECT_EQ(cfg.run.horizon, 1000);
  EXPECT_EQ(cfg.game.player(0).loss_probability, 0.6);
  EXPECT_EQ(std::get<KnownP>(cfg.schedule).b, 0.7);
}

TEST(Config, ConvergenceExperimentRejectsShallowRadiusDecay) {
  auto doc = toy_doc("converge");
  doc["perturbation"]["c"] = 0.4;
  const auto err = error_of(doc);
  EXPECT_NE(err.find("2b - 2c = 0.6"), std::string::npos) << err;
  // The same settings also fail the regret condition c < b/2 elsewhere.
  doc["experiment"]["name"] = "trajectory";
  EXPECT_NE(error_of(doc).find("c < b/2"), std::string::npos);
}

TEST(Config, ConvergenceExperimentAcceptsValidRegion) {
  auto doc = toy_doc("converge");
  doc["schedule"]["b"] = 0.99;
  doc["perturbation"]["c"] = 0.25;
  EXPECT_NO_THROW(config_from_json(doc));
}

TEST(Config, UnknownPRejectsSmallQ) {
  auto doc = toy_doc();
  doc["schedule"] = json{{"type", "unknown-p"}, {"q", 0.3}};
  EXPECT_NE(error_of(doc).find("(1/2, 1]"), std::string::npos);
}

TEST(Config, RadiusConstraintNamed) {
  auto doc = toy_doc();
  doc["perturbation"]["delta1"] = 1.0;
  EXPECT_NE(error_of(doc).find("delta_1 >= min r_i"), std::string::npos);
}

TEST(Config, UnknownKeysRejected) {
  auto doc = toy_doc();
  doc["schedule"]["bb"] = 0.7;
  EXPECT_NE(error_of(doc).find("unknown key 'bb'"), std::string::npos);
  auto top = toy_doc();
  top["extra"] = 1;
  EXPECT_NE(error_of(top).find("unknown key 'extra'"), std::string::npos);
}

TEST(Config, BadValuesRejected) {
  auto doc = toy_doc();
  doc["run"]["horizon"] = 0;
  EXPECT_NE(error_of(doc).find("K must be >= 1"), std::string::npos);
  doc = toy_doc();
  doc["run"]["paths"] = 0;
  EXPECT_FALSE(error_of(doc).empty());
  doc = toy_doc();
  doc["experiment"]["name"] = "nope";
  EXPECT_NE(error_of(doc).find("unknown experiment"), std::string::npos);
  doc = toy_doc();
  doc["game"]["loss_probability"] = 0.0;
  EXPECT_FALSE(error_of(doc).empty());
  doc = toy_doc();
  doc["schedule"]["b"] = "0.7";
  EXPECT_NE(error_of(doc).find("schedule.b: expected a number"), std::string::npos);
}

TEST(Config, ParseErrorReportsLine) {
  try {
    parse_config_text("{\n  \"game\": {\n    \"id\": \"quadratic-toy\",,\n  }\n}\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Config, AffineGameFromJson) {
  auto doc = toy_doc();
  doc["game"] = json::parse(R"({
    "id": "affine",
    "players": [
      {"set": {"type": "ball", "center": [0, 0], "radius": 2}, "safety_ball": {"center": [0, 0], "radius": 1}},
      {"set": {"type": "simplex", "dim": 2, "scale": 3}, "safety_ball": {"center": [0.8, 0.8], "radius": 0.6}, "loss_probability": 0.5}
    ],
    "M": [[2,0,0.5,0],[0,2,0,0.5],[0.5,0,2,0],[0,0.5,0,2]],
    "m": [1, 0, 0.5, 0.5]
  })");
  const auto cfg = config_from_json(doc);
  EXPECT_EQ(cfg.game.total_dim(), 4);
  EXPECT_EQ(cfg.game.player(1).loss_probability, 0.5);
  EXPECT_TRUE(cfg.game.player(1).action_set.as_simplex());
}

TEST(Config, HashIgnoresKeyOrderButNotValues) {
  const std::string a = R"({"game":{"id":"quadratic-toy","kappa":1},"schedule":{"type":"known-p","b":0.7},"perturbation":{"delta1":0.5,"c":0.32}})";
  const std::string b = R"({"perturbation":{"c":0.32,"delta1":0.5},"schedule":{"b":0.7,"type":"known-p"},"game":{"kappa":1,"id":"quadratic-toy"}})";
  EXPECT_EQ(config_hash(parse_config_text(a)), config_hash(parse_config_text(b)));
  auto c = parse_config_text(a);
  c["schedule"]["b"] = 0.71;
  EXPECT_NE(config_hash(parse_config_text(a)), config_hash(c));
  auto d = parse_config_text(a);
  d["perturbation"]["delta1"] = 0.5000000001;
  EXPECT_NE(config_hash(parse_config_text(a)), config_hash(d));
}

TEST(Csv, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  RandomSource rng(1);
  for (int t = 0; t < 1000; ++t) {
    const double x = rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}

TEST(ParallelPaths, ResultsInIndexOrderAndErrorsPropagate) {
  const auto out = parallel_paths(50, 4, [](int i) { return i * i; });
  for (int i = 0; i < 50; ++i) EXPECT_EQ(out[i], i * i);
  EXPECT_THROW(parallel_paths(10, 3,
                              [](int i) {
                                if (i == 6) throw std::runtime_error("boom");
                                return i;
                              }),
               std::runtime_error);
}

TEST(Experiment, RegretCurveIsDeterministic) {
  const auto dir1 = scratch("det1"), dir2 = scratch("det2"), dir3 = scratch("det3");
  auto doc = toy_doc();
  auto cfg = config_from_json(doc);
  auto r1 = compute_experiment(cfg);
  emit(r1, cfg, dir1.string());
  auto r2 = compute_experiment(cfg);
  emit(r2, cfg, dir2.string());
  doc["run"]["threads"] = 2;
  cfg = config_from_json(doc);
  auto r3 = compute_experiment(cfg);
  emit(r3, cfg, dir3.string());
  EXPECT_EQ(r1.config_hash, r3.config_hash);
  for (const auto& f : r1.files) {
    if (f == "manifest.json") continue;
    EXPECT_EQ(slurp(dir1 / f), slurp(dir2 / f)) << f;
    EXPECT_EQ(slurp(dir1 / f), slurp(dir3 / f)) << f;
  }
  EXPECT_TRUE(fs::exists(dir1 / "regret.csv"));
  const auto manifest = json::parse(slurp(dir1 / "manifest.json"));
  EXPECT_EQ(manifest["experiment"], "regret-curve");
  EXPECT_EQ(manifest["seed"], 7);
  EXPECT_EQ(manifest["config_hash"], hex64(r1.config_hash));
}

TEST(Experiment, DifferentSeedsDiffer) {
  auto doc = toy_doc("trajectory");
  const auto a = compute_experiment(config_from_json(doc));
  doc["run"]["seed"] = 8;
  const auto b = compute_experiment(config_from_json(doc));
  EXPECT_NE(a.distance.at("").mean_applied, b.distance.at("").mean_applied);
}

TEST(Experiment, RowCountsMatchGrid) {
  const auto dir = scratch("rows");
  auto doc = toy_doc("trajectory");
  doc["run"]["thinning"] = "stride";
  doc["run"]["stride"] = 37;
  auto cfg = config_from_json(doc);
  auto res = compute_experiment(cfg);
  emit(res, cfg, dir.string());
  const auto grid = cfg.run.grid().size();
  EXPECT_EQ(data_rows(dir / "distance.csv"), grid);
  EXPECT_EQ(data_rows(dir / "trajectory.csv"), grid * 2 * 2);
  std::ifstream in(dir / "trajectory.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "path_id,k,player,coord,intended,applied,indicator,step_size");
}

TEST(Experiment, CsvHeaders) {
  const auto dir = scratch("headers");
  auto cfg = config_from_json(toy_doc());
  auto res = compute_experiment(cfg);
  emit(res, cfg, dir.string());
  auto first = [&](const char* f) {
    std::ifstream in(dir / f);
    std::string h;
    std::getline(in, h);
    return h;
  };
  EXPECT_EQ(first("distance.csv"), "k,mean_dist_sq_applied,se_applied,mean_dist_sq_intended,se_intended");
  EXPECT_EQ(first("regret.csv"), "K,player,mean_regret,se,mean_regret_over_K");
}

TEST(Experiment, SweepEmitsOneDistanceFilePerValue) {
  const auto dir = scratch("sweep");
  auto doc = toy_doc("rate-vs-p");
  doc["experiment"]["p_grid"] = {0.2, 0.6, 1.0};
  auto cfg = config_from_json(doc);
  auto res = compute_experiment(cfg);
  emit(res, cfg, dir.string());
  for (const char* f : {"distance_P0.2.csv", "distance_P0.6.csv", "distance_P1.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
}

TEST(Experiment, IterVsUpdatesRowsPerGridValue) {
  const auto dir = scratch("iter");
  auto doc = toy_doc("iter-vs-updates");
  doc["experiment"]["p_grid"] = {0.5, 1.0};
  doc["experiment"]["epsilon"] = 0.5;
  auto cfg = config_from_json(doc);
  auto res = compute_experiment(cfg);
  emit(res, cfg, dir.string());
  EXPECT_EQ(data_rows(dir / "iter_vs_upd.csv"), 2u);
  ASSERT_TRUE(res.iterations[1].iterations_to_eps);
}

TEST(Experiment, ScriptedIndicatorFile) {
  const auto dir = scratch("script");
  fs::create_directories(dir);
  std::ofstream(dir / "ind.txt") << "1 0\n0 1\n";
  auto doc = toy_doc("trajectory");
  doc["schedule"] = json{{"type", "unknown-p"}, {"q", 0.7}};
  doc["run"]["indicator_file"] = (dir / "ind.txt").string();
  const auto res = compute_experiment(config_from_json(doc));
  for (const auto& rec : res.trajectories[0]) {
    EXPECT_EQ(rec.indicator[0], rec.round % 2 == 1 ? 1 : 0);
    EXPECT_EQ(rec.indicator[1], rec.round % 2 == 0 ? 1 : 0);
  }
}

TEST(Experiment, FailedRunLeavesNoPartialOutputs) {
  const auto dir = scratch("fail");
  auto doc = toy_doc("rate");
  doc["experiment"]["fit_k_min"] = 995;  // six points, fewer than the fit needs
  auto cfg = config_from_json(doc);
  cfg.run.out_dir = dir.string();
  EXPECT_THROW(run_experiment(cfg), InvalidArgument);
  EXPECT_TRUE(!fs::exists(dir) || fs::is_empty(dir));
}

#ifdef OGDLB_SIM_EXE
TEST(Cli, RunsAndReportsErrors) {
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  std::ofstream(dir / "cfg.json") << toy_doc().dump();
  const std::string exe = OGDLB_SIM_EXE;
  const std::string ok = exe + " --config " + (dir / "cfg.json").string() + " --out " + (dir / "out").string() +
                         " --paths 1 --seed 3 > " + (dir / "stdout").string();
  EXPECT_EQ(std::system(ok.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "regret.csv"));
  const auto manifest = json::parse(slurp(dir / "out" / "manifest.json"));
  EXPECT_EQ(manifest["paths"], 1);
  EXPECT_EQ(manifest["seed"], 3);

  std::ofstream(dir / "bad.json") << R"({"game": {"id": "quadratic-toy"}, "schedule": {"type": "known-p", "b": 0.7, "typo": 1}, "perturbation": {"delta1": 0.5, "c": 0.3}})";
  const std::string bad = exe + " --config " + (dir / "bad.json").string() + " 2> " + (dir / "stderr").string();
  EXPECT_NE(std::system(bad.c_str()), 0);
  const auto err = json::parse(slurp(dir / "stderr"));
  EXPECT_EQ(err["error"], "config");
  EXPECT_NE(err["message"].get<std::string>().find("typo"), std::string::npos);
}
#endif
