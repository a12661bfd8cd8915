#pragma once

// Subjects, cohorts and the synthetic cohort generator.

#include "rdsym/expr.hpp"
#include "rdsym/graph.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rdsym::cohort {

// Deterministic child seed for a named component of a run.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                          std::uint64_t index = 0);

struct Subject {
  std::string id;
  std::string group;
  Eigen::VectorXd times;           // observation times, strictly increasing
  Eigen::MatrixXd concentrations;  // times x nodes
  std::optional<double> true_kappa;
  std::optional<double> true_alpha;
};

struct Cohort {
  int node_count = 0;
  std::vector<Subject> subjects;
  // Ground-truth reaction term per group label (synthetic cohorts only).
  std::vector<std::pair<std::string, expr::Expression>> true_reactions;

  std::vector<std::string> group_labels() const;  // first-seen order
  const Subject& subject(const std::string& id) const;
  std::optional<expr::Expression> true_reaction(const std::string& group) const;
  void validate() const;
};

// Normalized ground-truth reaction terms, group 1..4:
// Fisher, Newell-Whitehead-Segel (q = 2, 3), Zeldovich-Frank-Kamenetskii.
expr::Expression table1_reaction(int group);

struct InitialLaw {
  enum class Kind { kNormal, kUniform };
  Kind kind = Kind::kNormal;
  double a = 0.05;  // mean or lower bound
  double b = 0.05;  // standard deviation or upper bound
};

struct GroupSpec {
  std::string label;
  expr::Expression reaction;
};

struct CohortConfig {
  std::vector<GroupSpec> groups;  // empty selects the four table1 terms
  int subjects_per_group = 19;
  std::vector<double> times{0.0, 1.0, 2.0};
  double kappa_mean = 1.0;
  double kappa_sd = 0.5;
  double alpha_group_mean = 0.6;
  double alpha_group_sd = 0.1;
  double alpha_subject_sd = 0.2;
  InitialLaw initial;
  double noise_sd = 0.0;

  std::vector<GroupSpec> resolved_groups() const;
};

Cohort generate_cohort(const CohortConfig& config,
                       const graph::LaplacianSystem& system, std::uint64_t seed);

// Normal(mean, sd^2) truncated to (0, inf) by rejection.
double sample_positive_normal(double mean, double sd, std::mt19937_64& rng);

constexpr int kCohortFormatVersion = 1;

nlohmann::json to_json(const Cohort& cohort);
Cohort cohort_from_json(const nlohmann::json& j);
void save_cohort(const std::filesystem::path& path, const Cohort& cohort);
Cohort load_cohort(const std::filesystem::path& path);

}  // namespace rdsym::cohort
