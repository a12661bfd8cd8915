#pragma once

// Gradient-based optimizers (Adam, L-BFGS) over a flat parameter vector,
// plus the named scalar parameters that are trained alongside networks.

#include "rdsym/mlp.hpp"
#include "rdsym/tape.hpp"

#include <Eigen/Core>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdsym::optim {

using Vector = Eigen::VectorXd;

// Scalars trained jointly with networks (per-subject kappa/alpha, the
// constants of a known right-hand side). Scalars flagged `positive` are
// stored in log-space inside the optimizer's vector.
class LearnableScalars {
 public:
  int add(std::string name, double value, bool positive = false);
  int size() const { return static_cast<int>(names_.size()); }
  int index(const std::string& name) const;  // throws if absent

  const std::string& name(int i) const { return names_[i]; }
  double value(int i) const { return values_[i]; }
  bool positive(int i) const { return positive_[i]; }
  void set(int i, double v) { values_[i] = v; }

  double packed(int i) const;          // optimizer coordinate
  void set_packed(int i, double raw);  // inverse of packed()

  bool operator==(const LearnableScalars&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<double> values_;
  std::vector<bool> positive_;
};

// Network parameters followed by the packed scalars.
struct TrainableState {
  nn::ParamVector params;
  LearnableScalars scalars;

  Vector pack() const;
  void unpack(const Vector& x);
  Eigen::Index dimension() const { return params.size() + scalars.size(); }
  Eigen::Index scalar_offset() const { return params.size(); }
};

// Scalar i of `state` as a tape value read from the packed vector x.
ad::Var scalar_on_tape(ad::Tape& tape, const TrainableState& layout,
                       const Vector& x, int i);

class Objective {
 public:
  virtual ~Objective() = default;
  virtual Eigen::Index dimension() const = 0;
  // Loss at x; fills *grad (resized by the caller) when non-null.
  virtual double evaluate(const Vector& x, Vector* grad) const = 0;
};

// Objective built from a tape program: `build` records the loss on the
// tape from the packed vector and returns the 1x1 output Var.
class TapeObjective : public Objective {
 public:
  using Builder = std::function<ad::Var(ad::Tape&, const Vector&)>;
  TapeObjective(Eigen::Index dimension, Builder build);
  Eigen::Index dimension() const override { return dimension_; }
  double evaluate(const Vector& x, Vector* grad) const override;

 private:
  Eigen::Index dimension_;
  Builder build_;
};

// Reverse-mode gradient of a tape program.
Vector loss_gradient(const Objective& objective, const Vector& x);

// Central finite differences on selected coordinates.
Vector finite_difference_gradient(const Objective& objective, const Vector& x,
                                  const std::vector<Eigen::Index>& coords,
                                  double h = 1e-6);

class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(const std::string& what, Vector last_finite, int step,
                Vector failing = {})
      : std::runtime_error(what),
        last_finite_(std::move(last_finite)),
        failing_(std::move(failing)),
        step_(step) {}
  const Vector& last_finite() const { return last_finite_; }
  // Point whose loss was non-finite (empty when unknown).
  const Vector& failing() const { return failing_; }
  int step() const { return step_; }

 private:
  Vector last_finite_;
  Vector failing_;
  int step_;
};

enum class Status {
  kMaxIterations,
  kGradientTolerance,
  kLineSearchFailed,
  kCompleted,
};

struct Result {
  Vector x;
  std::vector<double> history;
  int iterations = 0;
  Status status = Status::kCompleted;
  bool warning = false;
};

struct AdamOptions {
  int steps = 20000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// history has steps + 1 entries: the loss before each step and at the end.
Result adam(const Objective& objective, Vector x0, const AdamOptions& options);

struct LbfgsOptions {
  int max_iterations = 2000;
  double gradient_tolerance = 1e-8;
  int memory = 10;
  double c1 = 1e-4;  // sufficient decrease
  double c2 = 0.9;   // curvature
  int max_line_search_evaluations = 40;
};

// history[0] is the initial loss, then one entry per accepted iteration.
// A line-search failure returns the best iterate with warning = true.
Result lbfgs(const Objective& objective, Vector x0,
             const LbfgsOptions& options);

struct TrainResult {
  TrainableState state;
  std::vector<double> history;
  bool warning = false;
};

TrainResult optimize_adam(const Objective& objective,
                          const TrainableState& init,
                          const AdamOptions& options);
TrainResult optimize_lbfgs(const Objective& objective,
                           const TrainableState& init,
                           const LbfgsOptions& options);

}  // namespace rdsym::optim
