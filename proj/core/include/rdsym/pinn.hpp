#pragma once

// Physics-informed inference: per-subject surrogate networks c_theta(t), a
// shared reaction network per group, learnable per-subject (kappa, alpha),
// and the weighted data + residual + auxiliary loss.

#include "rdsym/cohort.hpp"
#include "rdsym/graph.hpp"
#include "rdsym/mlp.hpp"
#include "rdsym/optim.hpp"
#include "rdsym/tape.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rdsym::pinn {

using optim::Vector;

enum class ConstraintMode { kHard, kNone };

const char* to_string(ConstraintMode mode);
ConstraintMode constraint_mode_from_string(const std::string& text);

// f(c) = c(1-c) exp(g(c)) / (4 max_grid c(1-c) exp(g(c)))   (hard)
// f(c) = g(c)                                                (none)
struct ReactionNet {
  nn::NetSpec spec{1, 1, {50, 50}};
  ConstraintMode mode = ConstraintMode::kHard;
  int grid_points = 1001;  // uniform normalization grid on [0, 1]

  void validate() const;
};

// Inputs outside [0, 1] are clamped; *clamped counts them when given.
double reaction_eval(const ReactionNet& net, const nn::ParamVector& phi,
                     double c, int* clamped = nullptr);
Eigen::VectorXd reaction_eval_batch(const ReactionNet& net,
                                    const nn::ParamVector& phi,
                                    const Eigen::VectorXd& c,
                                    int* clamped = nullptr);
// df/dc on the given points.
Eigen::VectorXd reaction_derivative(const ReactionNet& net,
                                    const nn::ParamVector& phi,
                                    const Eigen::VectorXd& c);
graph::ReactionFn reaction_function(const ReactionNet& net,
                                    const nn::ParamVector& phi);

// Mean of max(0, f'(c_k) - f'(c_0)) over the points; fprime[0] is f'(0).
double aux_penalty(const Eigen::VectorXd& fprime);
// aux_penalty of the net's derivative on {0, 1/(points-1), ..., 1}.
double aux_loss(const ReactionNet& net, const nn::ParamVector& phi,
                int points = 101);

struct LossWeights {
  double data = 1.0;
  double residual = 1.0;
  double aux = 1.0;
};

struct LossValues {
  double data = 0.0;
  double residual = 0.0;
  double aux = 0.0;
  double total = 0.0;
};

double combine(const LossWeights& w, double data, double residual, double aux);

struct LossTerms {
  ad::Var data;
  ad::Var residual;
  ad::Var aux;
  ad::Var total;
  // Labelled per-subject / per-group components, for diagnostics.
  std::vector<std::pair<std::string, double>> parts;
};

// A trainable inference problem: a packed parameter layout plus a tape
// program for the loss.
class Problem {
 public:
  virtual ~Problem() = default;
  virtual optim::TrainableState initial_state(std::uint64_t seed) const = 0;
  virtual LossTerms record(ad::Tape& tape, const Vector& x) const = 0;

  Eigen::Index dimension() const;
  optim::TapeObjective objective() const;
  LossValues losses(const optim::TrainableState& state) const;
  LossValues losses(const Vector& x) const;
  // Names the components that are non-finite at x ("" when none are).
  std::string diagnose(const Vector& x) const;
};

struct TrainOptions {
  optim::AdamOptions adam;
  optim::LbfgsOptions lbfgs;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Adam followed by L-BFGS on the total loss. history concatenates both
// phases. Throws TrainingDiverged naming the offending components.
optim::TrainResult train_problem(const Problem& problem, std::uint64_t seed,
                                 const TrainOptions& options);

struct GraphProblemConfig {
  std::vector<int> surrogate_hidden{50, 50};
  ReactionNet reaction;
  int collocation_count = 64;
  int aux_points = 101;
  LossWeights weights;
  double kappa_init = 1.0;
  double alpha_init = 0.5;

  void validate() const;
};

// Network reaction-diffusion inference over a cohort. Subjects are grouped
// by their group label; each group owns one ReactionNet.
class GraphProblem : public Problem {
 public:
  GraphProblem(cohort::Cohort cohort, graph::LaplacianSystem system,
               GraphProblemConfig config);

  optim::TrainableState initial_state(std::uint64_t seed) const override;
  LossTerms record(ad::Tape& tape, const Vector& x) const override;

  const cohort::Cohort& cohort() const { return cohort_; }
  const graph::LaplacianSystem& system() const { return system_; }
  const GraphProblemConfig& config() const { return config_; }
  const nn::NetSpec& surrogate_spec() const { return surrogate_spec_; }

  int subject_count() const { return static_cast<int>(cohort_.subjects.size()); }
  int group_count() const { return static_cast<int>(groups_.size()); }
  const std::string& group_label(int g) const { return groups_[g]; }
  int group_index(const std::string& label) const;
  int group_of(int subject) const { return subject_group_[subject]; }
  std::vector<int> group_members(int g) const;

  Eigen::Index surrogate_offset(int subject) const;
  Eigen::Index reaction_offset(int group) const;
  int kappa_index(int subject) const { return 2 * subject; }
  int alpha_index(int subject) const { return 2 * subject + 1; }
  const Eigen::VectorXd& collocation_times(int subject) const {
    return collocation_[subject];
  }

  // Surrogate concentrations (times x nodes) at arbitrary times.
  Eigen::MatrixXd surrogate_eval(const nn::ParamVector& params, int subject,
                                 const Eigen::VectorXd& t) const;

 private:
  double normalized_time(int subject, double t) const;

  cohort::Cohort cohort_;
  graph::LaplacianSystem system_;
  GraphProblemConfig config_;
  nn::NetSpec surrogate_spec_;
  std::vector<std::string> groups_;
  std::vector<int> subject_group_;
  std::vector<Eigen::VectorXd> collocation_;
  std::vector<std::pair<double, double>> time_span_;
  Eigen::Index reaction_block_ = 0;  // offset of the first reaction net
};

struct SubjectFit {
  std::string id;
  std::string group;
  nn::ParamVector surrogate;
  double kappa = 0.0;
  double alpha = 0.0;
};

struct GroupFit {
  std::string label;
  nn::ParamVector reaction;
};

struct TrainedPinn {
  std::uint64_t seed = 0;
  std::vector<SubjectFit> subjects;
  std::vector<GroupFit> groups;
  std::vector<double> loss_history;
  bool warning = false;  // L-BFGS line search gave up early

  bool operator==(const TrainedPinn& other) const;
};

TrainedPinn unpack_trained(const GraphProblem& problem,
                           const optim::TrainableState& state);
optim::TrainableState pack_trained(const GraphProblem& problem,
                                   const TrainedPinn& trained);

TrainedPinn train(const GraphProblem& problem, std::uint64_t seed,
                  const TrainOptions& options);

struct EnsembleMember {
  int index = 0;
  std::uint64_t seed = 0;
  std::optional<TrainedPinn> result;
  std::string error;  // set when the member failed
};

// Member m trains with derive_seed(root_seed, "member", m). Members run on
// up to `workers` threads; results are ordered by index. Throws when every
// member fails.
std::vector<EnsembleMember> ensemble_train(const GraphProblem& problem,
                                           std::uint64_t root_seed,
                                           int members,
                                           const TrainOptions& options,
                                           int workers = 1);

// Scales each group's f so its grid maximum is 0.25 and divides the
// subjects' alpha by the same factor. Hard-mode nets are already
// normalized and come back unchanged.
TrainedPinn rescale_alpha_f(const GraphProblem& problem, TrainedPinn trained);

// Surrogate concentrations at every collocation time and node, over the
// subjects of one group.
std::vector<double> visited_concentrations(const GraphProblem& problem,
                                           const TrainedPinn& trained,
                                           int group);

nlohmann::json to_json(const TrainedPinn& trained);
TrainedPinn trained_from_json(const nlohmann::json& j);

}  // namespace rdsym::pinn
