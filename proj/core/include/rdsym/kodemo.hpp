#pragma once

// Kraichnan-Orszag discovery demo:
//
//   du1/dt = exp(-t/10) u2 u3,   du2/dt = u1 u3,   du3/dt = -2 u1 u2
//
// learned as du1/dt = f1(t,u), du2/dt = f2(t,u), du3/dt = a u1 u2 + b with
// unknown networks f1, f2 and learnable constants a, b.

#include "rdsym/pinn.hpp"
#include "rdsym/symreg.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <vector>

namespace rdsym::kodemo {

constexpr std::array<double, 3> kInitial{1.0, 0.8, 0.5};

// True right-hand side.
Eigen::Vector3d ko_rhs(double t, const Eigen::Vector3d& u);

// Trajectory (|t_grid| x 3) from kInitial, rtol 1e-8 / atol 1e-10.
Eigen::MatrixXd ko_generate(const Eigen::VectorXd& t_grid);

struct KoConfig {
  double t_end = 10.0;
  int data_points = 101;
  int collocation_count = 201;
  std::vector<int> hidden{50, 50};
  pinn::LossWeights weights;
  double a_init = 0.0;
  double b_init = 0.0;

  void validate() const;
};

class KoProblem : public pinn::Problem {
 public:
  KoProblem(KoConfig config, Eigen::VectorXd times, Eigen::MatrixXd data);

  optim::TrainableState initial_state(std::uint64_t seed) const override;
  pinn::LossTerms record(ad::Tape& tape, const optim::Vector& x) const override;

  const KoConfig& config() const { return config_; }
  const nn::NetSpec& surrogate_spec() const { return surrogate_; }
  const nn::NetSpec& rhs_spec() const { return rhs_; }
  Eigen::Index rhs_offset() const { return surrogate_.param_count(); }
  const Eigen::VectorXd& collocation_times() const { return collocation_; }

  Eigen::MatrixXd surrogate_eval(const nn::ParamVector& params, const Eigen::VectorXd& t) const;
  // f1, f2 at rows (t, u1, u2, u3) of `inputs` (samples x 4).
  Eigen::MatrixXd rhs_eval(const nn::ParamVector& params, const Eigen::MatrixXd& inputs) const;

 private:
  Eigen::MatrixXd rhs_inputs(const Eigen::MatrixXd& inputs) const;

  KoConfig config_;
  Eigen::VectorXd times_;
  Eigen::MatrixXd data_;
  Eigen::VectorXd collocation_;
  nn::NetSpec surrogate_;
  nn::NetSpec rhs_;
};

KoProblem make_problem(const KoConfig& config);

struct FunctionReport {
  std::vector<symreg::Candidate> frontier;
  std::vector<symreg::Candidate> top;  // best three by score
};

struct KoReport {
  double a = 0.0;
  double b = 0.0;
  double final_loss = 0.0;
  std::uint64_t seed = 0;
  FunctionReport f1;
  FunctionReport f2;
};

// Trains the problem, then distills f1 and f2 independently over the
// surrogate's collocation states.
KoReport ko_discover(const KoConfig& config, std::uint64_t seed,
                     const pinn::TrainOptions& train,
                     symreg::SymregConfig symreg_config);

symreg::SymregConfig default_symreg();  // trig operator set

nlohmann::json to_json(const KoReport& report);

}  // namespace rdsym::kodemo
