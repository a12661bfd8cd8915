#pragma once

// Symbolic regression by regularized evolution over expression trees, a
// complexity-indexed Pareto frontier, and score-based model selection.

#include "rdsym/expr.hpp"
#include "rdsym/graph.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace rdsym::symreg {

struct Dataset {
  Eigen::MatrixXd inputs;   // variables x samples
  Eigen::VectorXd targets;  // one per sample
  int dropped = 0;          // non-finite targets removed while sampling

  int size() const { return static_cast<int>(targets.size()); }
  int variables() const { return static_cast<int>(inputs.rows()); }
  void validate() const;
};

Dataset make_dataset(Eigen::MatrixXd inputs, Eigen::VectorXd targets);

// (c, f(c)) pairs; non-finite targets are dropped and counted.
Dataset sample_function(const graph::ReactionFn& f, const std::vector<double>& grid);

// n uniform points on [0, 1].
std::vector<double> uniform_grid(int n = 200);
// n evenly spaced empirical quantiles of `values` (uniform_grid when empty).
std::vector<double> quantile_grid(std::vector<double> values, int n = 200);

struct MutationWeights {
  double change_operator = 1.0;
  double replace_subtree = 1.0;
  double jitter_constant = 2.0;
  double insert_node = 1.0;
  double delete_node = 0.7;
  double simplify = 0.3;
  double crossover = 0.5;
};

struct SymregConfig {
  expr::OperatorSet operators = expr::OperatorSet::reaction_default();
  int iterations = 100;  // each iteration = population_size children
  int population_size = 200;
  int tournament_size = 10;
  int max_complexity = 30;
  double parsimony = 1e-4;  // fitness += parsimony * complexity
  int constant_evaluations = 100;  // Nelder-Mead budget per call
  double constant_probability = 0.1;
  int migration = 10;  // frontier entries copied back per iteration
  MutationWeights mutations;
  bool kpp_penalty = false;  // reject |f(0)| or |f(1)| > 1e-6
  std::uint64_t seed = 0;

  void validate() const;
};

struct FrontierEntry {
  expr::Expression expression;
  int complexity = 0;
  double mse = 0.0;
  double mae = 0.0;
};

// Best expression per complexity, restricted to entries whose loss
// strictly improves on every simpler entry.
class ParetoFrontier {
 public:
  // Keeps the entry if it beats the current one at its complexity and is
  // not dominated; returns whether it was kept.
  bool offer(const FrontierEntry& entry);
  std::vector<FrontierEntry> entries() const;  // ascending complexity
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

 private:
  void prune();
  std::map<int, FrontierEntry> entries_;
};

ParetoFrontier evolve(const Dataset& data, const SymregConfig& config);

// Loss statistics of an expression on a dataset (inf when non-finite).
FrontierEntry measure(const expr::Expression& e, const Dataset& data,
                      const expr::OperatorSet& ops);

struct Candidate {
  expr::Expression expression;
  int complexity = 0;
  double mae = 0.0;
  double mse = 0.0;
  double score = 0.0;
  bool boundary = false;  // lowest-complexity entry, score fixed at 0
};

constexpr double kMaeFloor = 1e-12;

std::vector<Candidate> score_frontier(const std::vector<FrontierEntry>& frontier);
std::vector<Candidate> score_frontier(const ParetoFrontier& frontier);

// Highest score among candidates with mse <= 1.5 * min mse; ties go to the
// lower complexity, then the lower mse.
Candidate select_candidate(const std::vector<Candidate>& candidates);

// The `count` highest-scoring candidates, same tie rules.
std::vector<Candidate> top_by_score(const std::vector<Candidate>& candidates,
                                    std::size_t count);

// Columns: complexity,mse,mae,score,expression
void write_frontier_csv(std::ostream& out, const std::vector<Candidate>& candidates,
                        const std::vector<std::string>& names = expr::default_names());
void write_frontier_csv(const std::filesystem::path& path,
                        const std::vector<Candidate>& candidates,
                        const std::vector<std::string>& names = expr::default_names());

// Local constant fitting, exposed for testing.
expr::Expression optimize_constants(const expr::Expression& e, const Dataset& data,
                                    int evaluations);
expr::Expression least_squares_constants(const expr::Expression& e,
                                         const Dataset& data, int iterations = 50);

}  // namespace rdsym::symreg
