#include "rdsym/pipeline.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace rdsym;
namespace pl = rdsym::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("rdsym_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

json tiny_config() {
  return json::parse(R"({
    "seed": 3,
    "ensemble_size": 2,
    "paths": {"laplacian": "graph.csv", "cohort": "cohort.json", "output": "out"},
    "cohort": {"subjects_per_group": 2, "groups": [{"label": "fisher", "table1": 1}],
               "initial": {"law": "uniform", "a": 0.05, "b": 0.5},
               "random_graph": {"nodes": 4, "edge_probability": 0.6}},
    "pinn": {"adam_steps": 150, "lbfgs_max_iters": 20, "hidden": [8], "reaction_hidden": [8],
             "collocation_count": 12},
    "symreg": {"iterations": 4, "population_size": 40},
    "projection": {"horizon": 30, "step": 0.25},
    "ablation": {"horizons": [2, 3]},
    "ko": {"t_end": 2, "data_points": 11, "collocation_count": 21, "hidden": [8],
           "adam_steps": 50, "lbfgs_max_iters": 5,
           "symreg": {"iterations": 2, "population_size": 30}}
  })");
}

fs::path write_config(const fs::path& dir, const json& j, const std::string& name = "config.json") {
  std::ofstream(dir / name) << j.dump(2);
  return dir / name;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RDSYM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// Shared discovery run for the tests that only read its outputs.
struct Discovered {
  fs::path dir;
  pl::RunConfig config;
  pl::DiscoveryResult result;
};

const Discovered& discovered() {
  static const Discovered d = [] {
    Discovered out;
    out.dir = fresh_dir("discover");
    out.config = pl::load_config(write_config(out.dir, tiny_config()));
    pl::cmd_simulate(out.config);
    out.result = pl::cmd_discover(out.config, 2);
    return out;
  }();
  return d;
}

}  // namespace

TEST(Config, UnknownKeysAreNamed) {
  auto j = tiny_config();
  j["pinn"]["adam_stepz"] = 3;
  try {
    pl::parse_config(j);
    FAIL();
  } catch (const pl::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("pinn.adam_stepz"), std::string::npos) << e.what();
  }
  j = tiny_config();
  j["extra"] = 1;
  EXPECT_THROW(pl::parse_config(j), pl::ConfigError);
}

TEST(Config, WrongTypesAndValues) {
  auto j = tiny_config();
  j["seed"] = "three";
  EXPECT_THROW(pl::parse_config(j), pl::ConfigError);
  j = tiny_config();
  j["cohort"]["times"] = {0, 2, 1};
  EXPECT_THROW(pl::parse_config(j), pl::ConfigError);
  j = tiny_config();
  j["constraint_mode"] = "soft";
  EXPECT_THROW(pl::parse_config(j), pl::ConfigError);
  j = tiny_config();
  j["paths"].erase("laplacian");
  EXPECT_THROW(pl::parse_config(j), pl::ConfigError);
  j = tiny_config();
  j["cohort"]["groups"][0]["reaction"] = "c*(1 - ";
  j["cohort"]["groups"][0].erase("table1");
  EXPECT_THROW(pl::parse_config(j), pl::ConfigError);
}

TEST(Config, DefaultsAndOverrides) {
  const auto c = pl::parse_config(json::parse(R"({"paths": {"laplacian": "g.csv"}})"), "/base");
  EXPECT_EQ(c.ensemble_size, 1);
  EXPECT_EQ(c.cohort_gen.subjects_per_group, 19);
  EXPECT_EQ(c.train.adam.steps, 20000);
  EXPECT_EQ(c.train.lbfgs.max_iterations, 2000);
  EXPECT_EQ(c.pinn.collocation_count, 64);
  EXPECT_EQ(c.symreg.iterations, 100);
  EXPECT_EQ(c.resolve(c.laplacian), fs::path("/base/g.csv"));
  const auto t = pl::parse_config(tiny_config());
  EXPECT_EQ(t.train.adam.steps, 150);
  EXPECT_EQ(t.ko_symreg.iterations, 2);
  EXPECT_TRUE(t.ko_symreg.operators.has(expr::UnaryOp::kSin));
}

TEST(Simulate, DefaultProtocolAndByteIdenticalRerun) {
  const auto dir = fresh_dir("simulate");
  const auto cfg_path = write_config(dir, json::parse(R"({
    "seed": 5, "paths": {"laplacian": "g.csv", "cohort": "c.json"},
    "cohort": {"random_graph": {"nodes": 5}}})"));
  const auto c = pl::load_config(cfg_path);
  const auto s = pl::cmd_simulate(c);
  const auto co = cohort::load_cohort(s.cohort_file);
  EXPECT_EQ(co.subjects.size(), 76u);
  EXPECT_EQ(s.summary["groups"].size(), 4u);
  for (const auto& g : s.summary["groups"]) EXPECT_EQ(g["subjects"], 19);
  const std::string first = slurp(s.cohort_file);
  pl::cmd_simulate(c);
  EXPECT_EQ(slurp(s.cohort_file), first);
}

TEST(Discover, EnsembleResultInvariants) {
  const auto& d = discovered();
  ASSERT_EQ(d.result.members.size(), 2u);
  for (const auto& m : d.result.members) {
    ASSERT_TRUE(m.ok()) << m.error;
    EXPECT_GE(d.result.members[static_cast<std::size_t>(d.result.best_member)].projection_error,
              0.0);
    EXPECT_LE(d.result.members[static_cast<std::size_t>(d.result.best_member)].projection_error,
              m.projection_error);
    ASSERT_EQ(m.groups.size(), 1u);
  }
  EXPECT_TRUE(fs::exists(d.dir / "out" / "discovery.json"));
  EXPECT_TRUE(fs::exists(d.dir / "out" / "frontier_member0_fisher.csv"));
}

TEST(Discover, JsonRoundTripAndRerunIdentical) {
  const auto& d = discovered();
  const json stored = json::parse(slurp(d.dir / "out" / "discovery.json"));
  const auto back = pl::discovery_from_json(stored);
  EXPECT_EQ(pl::comparable(pl::to_json(back)), pl::comparable(stored));
  const auto again = pl::discover(cohort::load_cohort(d.dir / "cohort.json"), pl::load_system(d.config),
                                  d.config, 1);
  EXPECT_EQ(pl::comparable(pl::to_json(again)).dump(), pl::comparable(stored).dump());
}

TEST(Discover, SingleMemberIsBest) {
  const auto& d = discovered();
  auto c = d.config;
  c.ensemble_size = 1;
  const auto r = pl::discover(cohort::load_cohort(d.dir / "cohort.json"), pl::load_system(c), c, 1);
  ASSERT_EQ(r.members.size(), 1u);
  EXPECT_EQ(r.best_member, 0);
}

TEST(Project, RowCountsAndBands) {
  const auto& d = discovered();
  auto c = d.config;
  c.subject_ids = {"fisher-s1"};
  const auto files = pl::cmd_project(c, d.dir / "out" / "discovery.json");
  ASSERT_EQ(files.size(), 2u);
  const auto proj = read_csv(files[0]);
  EXPECT_EQ(proj[0], (std::vector<std::string>{"time", "node_label", "member", "value"}));
  EXPECT_EQ(proj.size() - 1, 121u * 4 * 2);  // times x nodes x members
  const auto band = read_csv(files[1]);
  EXPECT_EQ(band.size() - 1, 121u * 4);
  for (std::size_t i = 1; i < band.size(); ++i) {
    const double lo = std::stod(band[i][2]), hi = std::stod(band[i][3]), best = std::stod(band[i][4]);
    EXPECT_LE(lo, best);
    EXPECT_LE(best, hi);
  }
}

TEST(Project, UnknownRegionIsConfigError) {
  const auto& d = discovered();
  auto c = d.config;
  c.regions = {"nowhere"};
  EXPECT_THROW(pl::cmd_project(c, d.dir / "out" / "discovery.json"), pl::ConfigError);
}

TEST(Project, GroundTruthSingleMemberBandIsDegenerate) {
  const auto& d = discovered();
  // Replace the best member's models with the generator's parameters.
  json j = json::parse(slurp(d.dir / "out" / "discovery.json"));
  j["members"] = json::array({j["members"][j["best_member"].get<int>()]});
  j["best_member"] = 0;
  auto& m = j["members"][0];
  const auto co = cohort::load_cohort(d.dir / "cohort.json");
  for (auto& s : m["trained"]["subjects"]) {
    s["kappa"] = *co.subject(s["id"]).true_kappa;
    s["alpha"] = *co.subject(s["id"]).true_alpha;
  }
  m["groups"][0]["selected"]["expression"] = "c*(1 - c)";
  std::ofstream(d.dir / "truth.json") << j.dump();
  auto c = d.config;
  c.output = d.dir / "truth_out";
  for (const auto& f : pl::cmd_project(c, d.dir / "truth.json")) {
    if (f.filename().string().rfind("band_", 0) != 0) continue;
    const auto band = read_csv(f);
    for (std::size_t i = 1; i < band.size(); ++i) {
      EXPECT_LE(std::stod(band[i][3]) - std::stod(band[i][2]), 1e-4);
    }
  }
}

TEST(Report, DensityCurvesFrontier) {
  const auto& d = discovered();
  const auto files = pl::cmd_report(d.config, d.dir / "out" / "discovery.json");
  const fs::path dir = d.dir / "out" / "report";
  for (const char* name : {"density_kappa.csv", "density_alpha.csv"}) {
    const auto rows = read_csv(dir / name);
    double area = 0.0;
    for (std::size_t i = 2; i < rows.size(); ++i) {
      const double x0 = std::stod(rows[i - 1][0]), x1 = std::stod(rows[i][0]);
      area += 0.5 * (x1 - x0) * (std::stod(rows[i - 1][1]) + std::stod(rows[i][1]));
    }
    EXPECT_NEAR(area, 1.0, 0.01) << name;
  }
  const auto curves = read_csv(dir / "f_curves_fisher.csv");
  EXPECT_EQ(curves.size() - 1, 101u);
  EXPECT_EQ(curves[0].back(), "f_true");
  EXPECT_EQ(read_csv(dir / "frontier_fisher.csv")[0],
            (std::vector<std::string>{"complexity", "mse", "mae", "score", "expression"}));
}

TEST(KernelDensity, NormalizedForVariousSamples) {
  for (const std::vector<double>& s :
       {std::vector<double>{1.0}, {0.5, 0.5, 0.5}, {0.1, 0.4, 0.45, 2.0}, {-3.0, 1.0, 7.0, 7.5, 8.0}}) {
    const auto d = pl::kernel_density(s, 400);
    double area = 0.0;
    for (std::size_t i = 1; i < d.size(); ++i) {
      area += 0.5 * (d[i].first - d[i - 1].first) * (d[i].second + d[i - 1].second);
    }
    EXPECT_NEAR(area, 1.0, 0.01);
  }
  EXPECT_THROW(pl::kernel_density({}), std::invalid_argument);
}

TEST(KernelDensity, SilvermanRule) {
  const std::vector<double> s{1, 2, 3, 4, 5};
  // sd = 1.5811, IQR/1.34 = 2/1.34 = 1.4925
  EXPECT_NEAR(pl::silverman_bandwidth(s), 0.9 * (2.0 / 1.34) * std::pow(5.0, -0.2), 1e-12);
}

TEST(Ablation, SupErrorAndCells) {
  EXPECT_NEAR(pl::sup_error([](double c) { return c; }, [](double) { return 0.0; }, 0.0, 0.5), 0.5, 1e-15);
  const auto dir = fresh_dir("ablate");
  auto j = tiny_config();
  j["ensemble_size"] = 1;
  const auto c = pl::load_config(write_config(dir, j));
  const auto cells = pl::cmd_ablate(c, 1);
  ASSERT_EQ(cells.size(), 4u);
  EXPECT_EQ(cells[0].mode, pinn::ConstraintMode::kHard);
  EXPECT_EQ(cells[1].mode, pinn::ConstraintMode::kNone);
  EXPECT_TRUE(fs::exists(dir / "out" / "ablation.csv"));
  for (const auto& cell : cells) EXPECT_TRUE(std::isfinite(cell.f_phi_error));
}

TEST(Cli, ExitCodes) {
  const auto dir = fresh_dir("cli");
  const auto good = write_config(dir, tiny_config());
  EXPECT_EQ(run_cli("simulate --config " + good.string()), 0);
  EXPECT_EQ(run_cli("discover --config " + good.string() + " --workers 2"), 0);
  EXPECT_EQ(run_cli("project --config " + good.string()), 0);
  EXPECT_EQ(run_cli("report --config " + good.string()), 0);
  EXPECT_EQ(run_cli("ko-demo --config " + good.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "ko_report.json"));

  auto j = tiny_config();
  j["paths"]["laplacian"] = "missing.csv";
  j["cohort"].erase("random_graph");
  EXPECT_EQ(run_cli("simulate --config " + write_config(dir, j, "nolap.json").string()), 2);
  j = tiny_config();
  j["bogus"] = true;
  EXPECT_EQ(run_cli("discover --config " + write_config(dir, j, "bogus.json").string()), 2);
  EXPECT_EQ(run_cli("simulate --config " + (dir / "absent.json").string()), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("simulate"), 2);
  std::ofstream(dir / "broken.json") << "{not json";
  EXPECT_EQ(run_cli("simulate --config " + (dir / "broken.json").string()), 2);

  // horizon before the last observation fails at run time
  j = tiny_config();
  j["projection"]["horizon"] = 1.0;
  EXPECT_EQ(run_cli("project --config " + write_config(dir, j, "short.json").string()), 3);
}

TEST(Cli, SeedAndOutFlags) {
  const auto dir = fresh_dir("cli_flags");
  const auto cfg = write_config(dir, tiny_config());
  EXPECT_EQ(run_cli("simulate --config " + cfg.string() + " --seed 9 --out " + (dir / "o9").string()), 0);
  const json s = json::parse(slurp(dir / "o9" / "simulate_summary.json"));
  EXPECT_EQ(s["seed"], 9);
}
