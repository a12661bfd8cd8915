#include "rdsym/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace rdsym::optim {

int LearnableScalars::add(std::string name, double value, bool positive) {
  if (positive && !(value > 0.0)) {
    throw std::invalid_argument("positive scalar '" + name +
                                "' needs a positive initial value");
  }
  names_.push_back(std::move(name));
  values_.push_back(value);
  positive_.push_back(positive);
  return size() - 1;
}

int LearnableScalars::index(const std::string& name) const {
  for (int i = 0; i < size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw std::out_of_range("no learnable scalar named '" + name + "'");
}

double LearnableScalars::packed(int i) const {
  return positive_[i] ? std::log(values_[i]) : values_[i];
}

void LearnableScalars::set_packed(int i, double raw) {
  values_[i] = positive_[i] ? std::exp(raw) : raw;
}

Vector TrainableState::pack() const {
  Vector x(dimension());
  x.head(params.size()) = params;
  for (int i = 0; i < scalars.size(); ++i) x[params.size() + i] = scalars.packed(i);
  return x;
}

void TrainableState::unpack(const Vector& x) {
  if (x.size() != dimension()) {
    throw std::invalid_argument("unpack: dimension mismatch");
  }
  params = x.head(params.size());
  for (int i = 0; i < scalars.size(); ++i) scalars.set_packed(i, x[params.size() + i]);
}

ad::Var scalar_on_tape(ad::Tape& tape, const TrainableState& layout,
                       const Vector& x, int i) {
  ad::Var raw = tape.parameter(x, layout.scalar_offset() + i, 1, 1);
  return layout.scalars.positive(i) ? ad::exp(raw) : raw;
}

TapeObjective::TapeObjective(Eigen::Index dimension, Builder build)
    : dimension_(dimension), build_(std::move(build)) {}

double TapeObjective::evaluate(const Vector& x, Vector* grad) const {
  ad::Tape tape;
  const ad::Var loss = build_(tape, x);
  const double value = loss.scalar();
  if (grad != nullptr) {
    grad->setZero(x.size());
    tape.backward(loss, *grad);
  }
  return value;
}

Vector loss_gradient(const Objective& objective, const Vector& x) {
  Vector g(x.size());
  const double f = objective.evaluate(x, &g);
  if (!std::isfinite(f)) {
    throw NonFiniteLoss("non-finite loss in gradient evaluation", x, 0);
  }
  return g;
}

Vector finite_difference_gradient(const Objective& objective, const Vector& x,
                                  const std::vector<Eigen::Index>& coords,
                                  double h) {
  Vector out(static_cast<Eigen::Index>(coords.size()));
  Vector probe = x;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const Eigen::Index i = coords[k];
    probe[i] = x[i] + h;
    const double fp = objective.evaluate(probe, nullptr);
    probe[i] = x[i] - h;
    const double fm = objective.evaluate(probe, nullptr);
    probe[i] = x[i];
    out[static_cast<Eigen::Index>(k)] = (fp - fm) / (2.0 * h);
  }
  return out;
}

Result adam(const Objective& objective, Vector x, const AdamOptions& options) {
  if (options.steps < 0) throw std::invalid_argument("adam: steps < 0");
  Result result;
  result.history.reserve(static_cast<std::size_t>(options.steps) + 1);
  Vector m = Vector::Zero(x.size());
  Vector v = Vector::Zero(x.size());
  Vector g(x.size());
  Vector last_finite = x;
  double b1t = 1.0, b2t = 1.0;
  for (int step = 0; step <= options.steps; ++step) {
    const bool last = step == options.steps;
    const double f = objective.evaluate(x, last ? nullptr : &g);
    if (!std::isfinite(f) || (!last && !g.allFinite())) {
      throw NonFiniteLoss("non-finite loss at Adam step " + std::to_string(step),
                          last_finite, step, x);
    }
    result.history.push_back(f);
    last_finite = x;
    if (last) break;
    b1t *= options.beta1;
    b2t *= options.beta2;
    m = options.beta1 * m + (1.0 - options.beta1) * g;
    v = options.beta2 * v + (1.0 - options.beta2) * g.cwiseAbs2();
    const double lr_t = options.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
    x.array() -= lr_t * m.array() /
                 (v.array().sqrt() + options.epsilon * std::sqrt(1.0 - b2t));
  }
  result.x = std::move(x);
  result.iterations = options.steps;
  result.status = Status::kCompleted;
  return result;
}

namespace {

struct LinePoint {
  double alpha;
  double f;
  double slope;
  Vector g;
};

// Minimizer of the cubic interpolating (a, fa, da), (b, fb, db), safeguarded
// into the interior of [min(a,b), max(a,b)].
double cubic_step(double a, double fa, double da, double b, double fb, double db) {
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double width = hi - lo;
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  double t = 0.5 * (a + b);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = db - da + 2.0 * d2;
    if (denom != 0.0) t = b - (b - a) * (db + d2 - d1) / denom;
  }
  if (!std::isfinite(t) || t < lo + 0.1 * width || t > hi - 0.1 * width) {
    t = 0.5 * (a + b);
  }
  return t;
}

class StrongWolfe {
 public:
  StrongWolfe(const Objective& obj, const Vector& x, const Vector& p, double f0,
              double slope0, const LbfgsOptions& opt)
      : obj_(obj), x_(x), p_(p), f0_(f0), d0_(slope0), opt_(opt) {}

  // Returns true and the accepted point on success. `best` always holds the
  // lowest point seen (possibly alpha = 0 when nothing improved).
  bool search(double alpha1, LinePoint& accepted) {
    LinePoint prev{0.0, f0_, d0_, {}};
    double alpha = alpha1;
    for (int i = 0; i < 20 && evals_ < opt_.max_line_search_evaluations; ++i) {
      LinePoint cur = probe(alpha);
      if (!std::isfinite(cur.f) || cur.f > f0_ + opt_.c1 * alpha * d0_ ||
          (i > 0 && cur.f >= prev.f)) {
        return zoom(prev, cur, accepted);
      }
      if (std::abs(cur.slope) <= -opt_.c2 * d0_) {
        accepted = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(cur, prev, accepted);
      prev = std::move(cur);
      alpha *= 2.0;
    }
    return fallback(accepted);
  }

 private:
  LinePoint probe(double alpha) {
    ++evals_;
    LinePoint pt;
    pt.alpha = alpha;
    pt.g.resize(x_.size());
    pt.f = obj_.evaluate(x_ + alpha * p_, &pt.g);
    pt.slope = std::isfinite(pt.f) ? pt.g.dot(p_) : std::numeric_limits<double>::quiet_NaN();
    if (std::isfinite(pt.f) && pt.g.allFinite() &&
        pt.f <= f0_ + opt_.c1 * alpha * d0_ &&
        (!has_best_ || pt.f < best_.f)) {
      best_ = pt;
      has_best_ = true;
    }
    return pt;
  }

  bool zoom(LinePoint lo, LinePoint hi, LinePoint& accepted) {
    while (evals_ < opt_.max_line_search_evaluations) {
      double alpha;
      if (std::isfinite(hi.f) && std::isfinite(hi.slope)) {
        alpha = cubic_step(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f, hi.slope);
      } else {
        alpha = 0.5 * (lo.alpha + hi.alpha);
      }
      if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, lo.alpha)) break;
      LinePoint cur = probe(alpha);
      if (!std::isfinite(cur.f) || cur.f > f0_ + opt_.c1 * alpha * d0_ ||
          cur.f >= lo.f) {
        hi = std::move(cur);
      } else {
        if (std::abs(cur.slope) <= -opt_.c2 * d0_) {
          accepted = std::move(cur);
          return true;
        }
        if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
    }
    return fallback(accepted);
  }

  // Sufficient decrease without curvature is still progress.
  bool fallback(LinePoint& accepted) {
    if (has_best_ && best_.f < f0_) {
      accepted = best_;
      return true;
    }
    return false;
  }

  const Objective& obj_;
  const Vector& x_;
  const Vector& p_;
  double f0_, d0_;
  const LbfgsOptions& opt_;
  int evals_ = 0;
  LinePoint best_;
  bool has_best_ = false;
};

}  // namespace

Result lbfgs(const Objective& objective, Vector x, const LbfgsOptions& options) {
  Result result;
  Vector g(x.size());
  double f = objective.evaluate(x, &g);
  if (!std::isfinite(f) || !g.allFinite()) {
    throw NonFiniteLoss("non-finite loss at L-BFGS start", x, 0);
  }
  result.history.push_back(f);
  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  result.status = Status::kMaxIterations;
  for (int it = 0; it < options.max_iterations; ++it) {
    if (g.norm() <= options.gradient_tolerance) {
      result.status = Status::kGradientTolerance;
      break;
    }
    // Two-loop recursion.
    Vector q = g;
    const std::size_t m = s_hist.size();
    std::vector<double> a(m);
    for (std::size_t k = m; k-- > 0;) {
      a[k] = rho_hist[k] * s_hist[k].dot(q);
      q -= a[k] * y_hist[k];
    }
    double gamma = 1.0;
    if (m > 0) gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    Vector p = gamma * q;
    for (std::size_t k = 0; k < m; ++k) {
      const double b = rho_hist[k] * y_hist[k].dot(p);
      p += (a[k] - b) * s_hist[k];
    }
    p = -p;
    double slope = g.dot(p);
    if (!(slope < 0.0)) {
      // Not a descent direction: restart from steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      p = -g;
      slope = -g.squaredNorm();
    }
    const double alpha0 = m == 0 ? std::min(1.0, 1.0 / g.norm()) : 1.0;
    StrongWolfe ls(objective, x, p, f, slope, options);
    LinePoint pt;
    if (!ls.search(alpha0, pt)) {
      result.status = Status::kLineSearchFailed;
      result.warning = true;
      break;
    }
    Vector s = pt.alpha * p;
    Vector y = pt.g - g;
    x += s;
    f = pt.f;
    g = std::move(pt.g);
    result.history.push_back(f);
    ++result.iterations;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
  }
  if (result.status == Status::kMaxIterations &&
      g.norm() <= options.gradient_tolerance) {
    result.status = Status::kGradientTolerance;
  }
  result.x = std::move(x);
  return result;
}

TrainResult optimize_adam(const Objective& objective,
                          const TrainableState& init,
                          const AdamOptions& options) {
  Result r = adam(objective, init.pack(), options);
  TrainResult out{init, std::move(r.history), r.warning};
  out.state.unpack(r.x);
  return out;
}

TrainResult optimize_lbfgs(const Objective& objective,
                           const TrainableState& init,
                           const LbfgsOptions& options) {
  Result r = lbfgs(objective, init.pack(), options);
  TrainResult out{init, std::move(r.history), r.warning};
  out.state.unpack(r.x);
  return out;
}

}  // namespace rdsym::optim
