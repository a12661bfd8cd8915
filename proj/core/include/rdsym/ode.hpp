#pragma once

// Adaptive Dormand-Prince 5(4) integration with output at fixed times.

#include <Eigen/Core>

#include <functional>
#include <stdexcept>
#include <string>

namespace rdsym::ode {

using State = Eigen::VectorXd;
// dy/dt written into `dydt` (pre-sized to y.size()).
using Rhs = std::function<void(double t, const State& y, State& dydt)>;

struct Options {
  double rtol = 1e-8;
  double atol = 1e-10;
  double initial_step = 0.0;  // 0 selects automatically
  double max_step = 0.0;      // 0 means unbounded
  long max_steps = 1'000'000;
};

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double time)
      : std::runtime_error(what + " at t=" + std::to_string(time)), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

struct Stats {
  long accepted = 0;
  long rejected = 0;
  long evaluations = 0;
};

// Solution sampled at t_grid (rows) starting from y0 at t_grid[0].
// t_grid must be strictly increasing.
Eigen::MatrixXd integrate(const Rhs& rhs, const State& y0,
                          const Eigen::VectorXd& t_grid,
                          const Options& options = {}, Stats* stats = nullptr);

// Classical fixed-step RK4; used as an independent reference.
Eigen::MatrixXd integrate_rk4(const Rhs& rhs, const State& y0,
                              const Eigen::VectorXd& t_grid, double h);

}  // namespace rdsym::ode
