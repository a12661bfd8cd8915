#pragma once

// Experiment configuration and the end-to-end pipelines behind the
// command-line subcommands.

#include "rdsym/cohort.hpp"
#include "rdsym/evalproj.hpp"
#include "rdsym/graph.hpp"
#include "rdsym/kodemo.hpp"
#include "rdsym/pinn.hpp"
#include "rdsym/symreg.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdsym::pipeline {

// Invalid configuration or input schema (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RandomGraphSpec {
  int nodes = 10;
  double edge_probability = 0.3;
  double weight_low = 0.5;
  double weight_high = 1.5;
};

struct RunConfig {
  std::filesystem::path base_dir;  // relative paths resolve against this
  std::filesystem::path laplacian;
  std::filesystem::path cohort;
  std::filesystem::path output = "out";
  std::optional<RandomGraphSpec> random_graph;

  cohort::CohortConfig cohort_gen;
  pinn::GraphProblemConfig pinn;
  pinn::TrainOptions train;
  symreg::SymregConfig symreg;
  int symreg_samples = 200;
  bool symreg_uniform_grid = false;  // default: visited concentrations

  double horizon = 20.0;
  double step = 0.1;
  std::vector<std::string> regions;      // node labels; empty = all nodes
  std::vector<std::string> subject_ids;  // empty = all subjects

  std::vector<double> ablation_horizons{2.0, 4.0, 6.0};
  std::vector<pinn::ConstraintMode> ablation_modes{pinn::ConstraintMode::kHard,
                                                   pinn::ConstraintMode::kNone};

  kodemo::KoConfig ko;
  pinn::TrainOptions ko_train;
  symreg::SymregConfig ko_symreg = kodemo::default_symreg();

  int ensemble_size = 1;
  std::uint64_t seed = 0;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

// Parses and validates; unknown keys and wrong types raise ConfigError
// naming the offending key.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

// The graph named by the config; writes a random one first when the file is
// absent and a random_graph block is present.
graph::LaplacianSystem load_system(const RunConfig& config);

// ---- simulate

struct SimulateSummary {
  std::filesystem::path cohort_file;
  nlohmann::json summary;
};
SimulateSummary cmd_simulate(const RunConfig& config);

// ---- discover

struct GroupDiscovery {
  std::string label;
  std::vector<symreg::Candidate> frontier;
  symreg::Candidate selected;
};

struct MemberResult {
  int index = 0;
  std::uint64_t seed = 0;
  std::string error;  // non-empty when training failed
  std::optional<pinn::TrainedPinn> trained;  // after rescale_alpha_f
  std::vector<GroupDiscovery> groups;
  double projection_error = 0.0;

  bool ok() const { return error.empty(); }
};

struct DiscoveryResult {
  std::uint64_t seed = 0;
  pinn::ConstraintMode mode = pinn::ConstraintMode::kHard;
  std::vector<std::string> group_labels;
  std::vector<MemberResult> members;
  int best_member = 0;
  std::string created;  // timestamp, ignored by comparisons
};

// Runs ensemble training, distillation, selection and ranking on a cohort.
DiscoveryResult discover(const cohort::Cohort& cohort, const graph::LaplacianSystem& system,
                         const RunConfig& config, int workers);

// Models for every subject from one member.
evalproj::ModelMap member_models(const MemberResult& member);

// f_sym per group of `member`, as an expression.
expr::Expression member_reaction(const MemberResult& member, const std::string& group);

nlohmann::json to_json(const DiscoveryResult& result);
DiscoveryResult discovery_from_json(const nlohmann::json& j);
// JSON without the timestamp, for reproducibility checks.
nlohmann::json comparable(const nlohmann::json& result_json);

DiscoveryResult cmd_discover(const RunConfig& config, int workers);

// ---- project / report

// Writes projections and bands; returns the files written.
std::vector<std::filesystem::path> cmd_project(const RunConfig& config,
                                               const std::filesystem::path& result_file);
std::vector<std::filesystem::path> cmd_report(const RunConfig& config,
                                              const std::filesystem::path& result_file);

// Gaussian kernel density with Silverman's bandwidth on `points` values
// spanning the sample +/- 3 bandwidths. Returns (x, density) pairs.
std::vector<std::pair<double, double>> kernel_density(const std::vector<double>& sample,
                                                      int points = 200);
double silverman_bandwidth(const std::vector<double>& sample);

// ---- ablation

struct AblationCell {
  double horizon = 0.0;
  pinn::ConstraintMode mode = pinn::ConstraintMode::kHard;
  std::string f_sym;
  double f_phi_error = 0.0;       // sup |f_phi - f| on [0, 1]
  double f_phi_error_high = 0.0;  // sup |f_phi - f| on [0.7, 1]
  double f_sym_error = 0.0;       // sup |f_sym - f| on [0, 1]
  double kappa_rel_error = 0.0;   // worst subject
};

// Sup-norm of g - f on [lo, hi] sampled at 1001 points.
double sup_error(const graph::ReactionFn& g, const graph::ReactionFn& f, double lo, double hi);

std::vector<AblationCell> run_ablation(const RunConfig& config, int workers);
std::vector<AblationCell> cmd_ablate(const RunConfig& config, int workers);

// ---- Kraichnan-Orszag

kodemo::KoReport cmd_ko(const RunConfig& config);

}  // namespace rdsym::pipeline
