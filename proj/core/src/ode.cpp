#include "rdsym/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rdsym::ode {

namespace {

// Dormand-Prince tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// Error coefficients: 5th-order minus embedded 4th-order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 10.0;

double error_norm(const State& err, const State& y0, const State& y1,
                  const Options& opt) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = opt.atol + opt.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / sc;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(1, err.size())));
}

double initial_step(const Rhs& rhs, double t0, const State& y0, const State& f0,
                    const Options& opt, Stats& stats) {
  // Hairer, Norsett & Wanner starting-step heuristic.
  const Eigen::ArrayXd sc = opt.atol + opt.rtol * y0.array().abs();
  const double d0 = std::sqrt((y0.array() / sc).square().mean());
  const double d1 = std::sqrt((f0.array() / sc).square().mean());
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  State y1 = y0 + h0 * f0;
  State f1(y0.size());
  rhs(t0 + h0, y1, f1);
  ++stats.evaluations;
  const double d2 = std::sqrt(((f1 - f0).array() / sc).square().mean()) / h0;
  double h1;
  if (std::max(d1, d2) <= 1e-15) {
    h1 = std::max(1e-6, h0 * 1e-3);
  } else {
    h1 = std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
  }
  return std::min(100.0 * h0, h1);
}

}  // namespace

Eigen::MatrixXd integrate(const Rhs& rhs, const State& y0,
                          const Eigen::VectorXd& t_grid, const Options& opt,
                          Stats* stats_out) {
  if (t_grid.size() < 1) throw std::invalid_argument("integrate: empty t_grid");
  for (Eigen::Index i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1])) {
      throw std::invalid_argument("integrate: t_grid must be strictly increasing");
    }
  }
  const Eigen::Index n = y0.size();
  Eigen::MatrixXd out(t_grid.size(), n);
  out.row(0) = y0.transpose();
  Stats stats;

  State y = y0, k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n),
        ynew(n), err(n);
  double t = t_grid[0];
  rhs(t, y, k1);
  ++stats.evaluations;
  double h = opt.initial_step > 0.0 ? opt.initial_step
                                    : initial_step(rhs, t, y, k1, opt, stats);
  long steps = 0;
  for (Eigen::Index target = 1; target < t_grid.size(); ++target) {
    const double t_end = t_grid[target];
    while (t < t_end) {
      if (++steps > opt.max_steps) {
        throw IntegrationError("maximum step count exceeded", t);
      }
      if (opt.max_step > 0.0) h = std::min(h, opt.max_step);
      bool last = false;
      if (t + h >= t_end || t + 1.01 * h >= t_end) {
        h = t_end - t;
        last = true;
      }
      if (h <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
        throw IntegrationError("step size underflow", t);
      }
      ytmp = y + h * a21 * k1;
      rhs(t + c2 * h, ytmp, k2);
      ytmp = y + h * (a31 * k1 + a32 * k2);
      rhs(t + c3 * h, ytmp, k3);
      ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
      rhs(t + c4 * h, ytmp, k4);
      ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      rhs(t + c5 * h, ytmp, k5);
      ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      rhs(t + h, ytmp, k6);
      ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      rhs(t + h, ynew, k7);
      stats.evaluations += 6;
      err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const double en = error_norm(err, y, ynew, opt);
      if (!std::isfinite(en)) {
        ++stats.rejected;
        h *= kMinFactor;
        continue;
      }
      if (en <= 1.0) {
        ++stats.accepted;
        t = last ? t_end : t + h;
        y = ynew;
        k1 = k7;  // first-same-as-last
        const double factor =
            en == 0.0 ? kMaxFactor
                      : std::clamp(kSafety * std::pow(en, -0.2), kMinFactor, kMaxFactor);
        // A truncated final step says nothing about the natural step size.
        if (!last) h *= factor;
      } else {
        ++stats.rejected;
        h *= std::max(kMinFactor, kSafety * std::pow(en, -0.2));
      }
    }
    out.row(target) = y.transpose();
  }
  if (stats_out != nullptr) *stats_out = stats;
  return out;
}

Eigen::MatrixXd integrate_rk4(const Rhs& rhs, const State& y0,
                              const Eigen::VectorXd& t_grid, double h) {
  const Eigen::Index n = y0.size();
  Eigen::MatrixXd out(t_grid.size(), n);
  out.row(0) = y0.transpose();
  State y = y0, k1(n), k2(n), k3(n), k4(n);
  double t = t_grid[0];
  for (Eigen::Index target = 1; target < t_grid.size(); ++target) {
    const double t_end = t_grid[target];
    const long steps = std::max<long>(1, std::lround(std::ceil((t_end - t) / h - 1e-9)));
    const double dt = (t_end - t) / static_cast<double>(steps);
    for (long s = 0; s < steps; ++s) {
      rhs(t, y, k1);
      rhs(t + 0.5 * dt, y + 0.5 * dt * k1, k2);
      rhs(t + 0.5 * dt, y + 0.5 * dt * k2, k3);
      rhs(t + dt, y + dt * k3, k4);
      y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t += dt;
    }
    t = t_end;
    out.row(target) = y.transpose();
  }
  return out;
}

}  // namespace rdsym::ode
