#include "rdsym/symreg.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

namespace rdsym::symreg {

using expr::Expression;
using expr::Node;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double mse_of(const Expression& e, const Dataset& data) {
  const Eigen::ArrayXd pred = expr::eval_batch(e, data.inputs);
  const double m = (pred - data.targets.array()).square().mean();
  return std::isfinite(m) ? m : kInf;
}

// Nelder-Mead on an arbitrary objective; returns the best point found.
std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> x0, int budget) {
  const std::size_t n = x0.size();
  if (n == 0 || budget <= 0) return x0;
  std::vector<std::vector<double>> pts{x0};
  for (std::size_t i = 0; i < n; ++i) {
    auto p = x0;
    p[i] += 0.1 + 0.1 * std::abs(p[i]);
    pts.push_back(std::move(p));
  }
  std::vector<double> val;
  int evals = 0;
  for (const auto& p : pts) {
    val.push_back(f(p));
    ++evals;
  }
  std::vector<std::size_t> order(n + 1);
  while (evals < budget) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return val[a] < val[b]; });
    const std::size_t best = order[0], worst = order[n], second = order[n - 1];
    std::vector<double> centroid(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) centroid[i] += pts[order[k]][i] / static_cast<double>(n);
    }
    const auto along = [&](double t) {
      std::vector<double> p(n);
      for (std::size_t i = 0; i < n; ++i) p[i] = centroid[i] + t * (pts[worst][i] - centroid[i]);
      return p;
    };
    auto xr = along(-1.0);
    const double fr = f(xr);
    ++evals;
    if (fr < val[best]) {
      auto xe = along(-2.0);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        pts[worst] = std::move(xe);
        val[worst] = fe;
      } else {
        pts[worst] = std::move(xr);
        val[worst] = fr;
      }
    } else if (fr < val[second]) {
      pts[worst] = std::move(xr);
      val[worst] = fr;
    } else {
      auto xc = fr < val[worst] ? along(-0.5) : along(0.5);
      const double fc = f(xc);
      ++evals;
      if (fc < std::min(fr, val[worst])) {
        pts[worst] = std::move(xc);
        val[worst] = fc;
      } else {
        for (std::size_t k = 1; k <= n && evals < budget; ++k) {
          auto& p = pts[order[k]];
          for (std::size_t i = 0; i < n; ++i) p[i] = pts[best][i] + 0.5 * (p[i] - pts[best][i]);
          val[order[k]] = f(p);
          ++evals;
        }
      }
    }
  }
  const auto it = std::min_element(val.begin(), val.end());
  return pts[static_cast<std::size_t>(it - val.begin())];
}

class Evolution {
 public:
  Evolution(const Dataset& data, const SymregConfig& config)
      : data_(data), cfg_(config), rng_(config.seed) {
    const double mean = data.targets.mean();
    const double var = (data.targets.array() - mean).square().mean();
    scale_ = var > 1e-300 ? var : 1.0;
  }

  ParetoFrontier run() {
    const int pop = cfg_.population_size;
    while (static_cast<int>(population_.size()) < pop) {
      Expression e = random_tree(1 + static_cast<int>(rng_() % 3));
      if (complexity(e) <= cfg_.max_complexity) add(std::move(e));
    }
    for (int it = 0; it < cfg_.iterations; ++it) {
      for (int k = 0; k < pop; ++k) step();
      migrate();
    }
    return polish();
  }

 private:
  struct Member {
    Expression e;
    double fitness;
    std::uint64_t born;
  };

  int complexity(const Expression& e) const { return expr::complexity(e, cfg_.operators); }

  double fitness(const Expression& e, const FrontierEntry& m) const {
    if (!std::isfinite(m.mse)) return kInf;
    if (cfg_.kpp_penalty && violates_kpp(e)) return kInf;
    return m.mse / scale_ + cfg_.parsimony * m.complexity;
  }

  bool violates_kpp(const Expression& e) const {
    if (data_.variables() != 1) return false;
    const double z = 0.0, o = 1.0;
    const double f0 = expr::eval(e, std::span<const double>(&z, 1));
    const double f1 = expr::eval(e, std::span<const double>(&o, 1));
    return !(std::abs(f0) <= 1e-6 && std::abs(f1) <= 1e-6);
  }

  void add(Expression e) {
    const FrontierEntry m = measure(e, data_, cfg_.operators);
    const double fit = fitness(e, m);
    if (std::isfinite(fit)) frontier_.offer(m);
    Member member{std::move(e), fit, clock_++};
    if (static_cast<int>(population_.size()) < cfg_.population_size) {
      population_.push_back(std::move(member));
      return;
    }
    // Regularized evolution: the oldest member dies.
    auto oldest = std::min_element(population_.begin(), population_.end(),
                                   [](const Member& a, const Member& b) { return a.born < b.born; });
    *oldest = std::move(member);
  }

  const Member& tournament() {
    const Member* best = nullptr;
    const int n = static_cast<int>(population_.size());
    for (int k = 0; k < cfg_.tournament_size; ++k) {
      const Member& m = population_[static_cast<std::size_t>(rng_() % static_cast<std::uint64_t>(n))];
      if (best == nullptr || m.fitness < best->fitness) best = &m;
    }
    return *best;
  }

  void step() {
    for (int attempt = 0; attempt < 10; ++attempt) {
      Expression child = mutate(tournament().e);
      if (complexity(child) > cfg_.max_complexity) continue;
      if (!child.constants().empty() && uniform() < cfg_.constant_probability) {
        child = optimize_constants(child, data_, cfg_.constant_evaluations);
      }
      add(std::move(child));
      return;
    }
  }

  void migrate() {
    const auto entries = frontier_.entries();
    if (entries.empty()) return;
    const int count = std::min<int>(cfg_.migration, static_cast<int>(entries.size()));
    for (int k = 0; k < count; ++k) {
      add(entries[static_cast<std::size_t>(rng_() % entries.size())].expression);
    }
  }

  ParetoFrontier polish() {
    ParetoFrontier out;
    for (const auto& entry : frontier_.entries()) {
      out.offer(entry);
      if (entry.expression.constants().empty()) continue;
      Expression best = least_squares_constants(entry.expression, data_);
      for (int r = 0; r < 3; ++r) {
        best = optimize_constants(best, data_, 2 * cfg_.constant_evaluations);
        best = least_squares_constants(best, data_);
      }
      const FrontierEntry m = measure(best, data_, cfg_.operators);
      if (!cfg_.kpp_penalty || !violates_kpp(best)) out.offer(m);
    }
    return out;
  }

  // ---- random structure

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  Expression random_leaf() {
    if (uniform() < 0.6) {
      return Expression::variable(static_cast<int>(rng_() % static_cast<std::uint64_t>(data_.variables())));
    }
    return Expression::constant(std::normal_distribution<double>(0.0, 1.0)(rng_));
  }

  expr::UnaryOp random_unary() {
    const auto& u = cfg_.operators.unary;
    return u[rng_() % u.size()].op;
  }

  expr::BinaryOp random_binary() {
    const auto& b = cfg_.operators.binary;
    return b[rng_() % b.size()].op;
  }

  Expression random_tree(int depth) {
    if (depth <= 0 || uniform() < 0.3) return random_leaf();
    if (!cfg_.operators.unary.empty() && uniform() < 0.2) {
      return Expression::unary(random_unary(), random_tree(depth - 1));
    }
    return Expression::binary(random_binary(), random_tree(depth - 1), random_tree(depth - 1));
  }

  int random_index(const Expression& e) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(e.size())); }

  Expression mutate(const Expression& parent) {
    const MutationWeights& w = cfg_.mutations;
    std::discrete_distribution<int> pick({w.change_operator, w.replace_subtree, w.jitter_constant,
                                          w.insert_node, w.delete_node, w.simplify, w.crossover});
    switch (pick(rng_)) {
      case 0:
        return change_operator(parent);
      case 1:
        return parent.replace_subtree(random_index(parent), random_tree(2));
      case 2:
        return jitter(parent);
      case 3:
        return insert(parent);
      case 4:
        return remove(parent);
      case 5:
        return expr::simplify(parent);
      default:
        return crossover(parent, tournament().e);
    }
  }

  Expression change_operator(const Expression& e) {
    std::vector<int> ops;
    for (int i = 0; i < e.size(); ++i) {
      const auto kind = e.subtree(i).root().kind;
      if (kind == Node::Kind::kUnary || kind == Node::Kind::kBinary) ops.push_back(i);
    }
    if (ops.empty()) return e.replace_subtree(random_index(e), random_leaf());
    const int i = ops[rng_() % ops.size()];
    const Expression sub = e.subtree(i);
    const Node& n = sub.root();
    if (n.kind == Node::Kind::kUnary) {
      return e.replace_subtree(i, Expression::unary(random_unary(), Expression(n.lhs)));
    }
    return e.replace_subtree(i, Expression::binary(random_binary(), Expression(n.lhs), Expression(n.rhs)));
  }

  Expression jitter(const Expression& e) {
    std::vector<double> k = e.constants();
    if (k.empty()) return change_operator(e);
    const std::size_t i = rng_() % k.size();
    std::normal_distribution<double> noise(0.0, 1.0);
    if (uniform() < 0.5) {
      k[i] *= 1.0 + 0.2 * noise(rng_);
    } else {
      k[i] += 0.1 * noise(rng_);
    }
    return e.with_constants(k);
  }

  Expression insert(const Expression& e) {
    const int i = random_index(e);
    const Expression sub = e.subtree(i);
    if (!cfg_.operators.unary.empty() && uniform() < 0.3) {
      return e.replace_subtree(i, Expression::unary(random_unary(), sub));
    }
    const Expression leaf = random_leaf();
    return e.replace_subtree(i, uniform() < 0.5 ? Expression::binary(random_binary(), sub, leaf)
                                                : Expression::binary(random_binary(), leaf, sub));
  }

  Expression remove(const Expression& e) {
    std::vector<int> ops;
    for (int i = 0; i < e.size(); ++i) {
      if (e.subtree(i).root().kind != Node::Kind::kConstant &&
          e.subtree(i).root().kind != Node::Kind::kVariable) {
        ops.push_back(i);
      }
    }
    if (ops.empty()) return e;
    const int i = ops[rng_() % ops.size()];
    const Node& n = e.subtree(i).root();
    const bool left = n.kind == Node::Kind::kUnary || uniform() < 0.5;
    return e.replace_subtree(i, Expression(left ? n.lhs : n.rhs));
  }

  Expression crossover(const Expression& a, const Expression& b) {
    return a.replace_subtree(random_index(a), b.subtree(random_index(b)));
  }

  const Dataset& data_;
  const SymregConfig& cfg_;
  std::mt19937_64 rng_;
  double scale_ = 1.0;
  std::vector<Member> population_;
  std::uint64_t clock_ = 0;
  ParetoFrontier frontier_;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.complexity != b.complexity) return a.complexity < b.complexity;
  return a.mse < b.mse;
}

}  // namespace

void Dataset::validate() const {
  if (inputs.cols() != targets.size()) {
    throw std::invalid_argument("dataset: inputs and targets differ in length");
  }
  if (inputs.rows() < 1) throw std::invalid_argument("dataset: no input variables");
  if (!inputs.allFinite() || !targets.allFinite()) {
    throw std::invalid_argument("dataset: non-finite values");
  }
}

Dataset make_dataset(Eigen::MatrixXd inputs, Eigen::VectorXd targets) {
  Dataset d{std::move(inputs), std::move(targets), 0};
  d.validate();
  return d;
}

Dataset sample_function(const graph::ReactionFn& f, const std::vector<double>& grid) {
  std::vector<double> xs, ys;
  int dropped = 0;
  for (double c : grid) {
    const double y = f(c);
    if (std::isfinite(y) && std::isfinite(c)) {
      xs.push_back(c);
      ys.push_back(y);
    } else {
      ++dropped;
    }
  }
  Dataset d;
  d.inputs = Eigen::Map<const Eigen::RowVectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  d.targets = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  d.dropped = dropped;
  return d;
}

std::vector<double> uniform_grid(int n) {
  if (n < 2) throw std::invalid_argument("grid needs >= 2 points");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = static_cast<double>(k) / (n - 1);
  return out;
}

std::vector<double> quantile_grid(std::vector<double> values, int n) {
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  if (values.empty()) return uniform_grid(n);
  std::sort(values.begin(), values.end());
  std::vector<double> out(static_cast<std::size_t>(n));
  const double last = static_cast<double>(values.size() - 1);
  for (int k = 0; k < n; ++k) {
    const double pos = n == 1 ? 0.0 : last * k / (n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    out[static_cast<std::size_t>(k)] = values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  }
  return out;
}

void SymregConfig::validate() const {
  operators.validate();
  if (iterations < 1) throw std::invalid_argument("symreg iterations must be >= 1");
  if (population_size < 2) throw std::invalid_argument("population_size must be >= 2");
  if (tournament_size < 1) throw std::invalid_argument("tournament_size must be >= 1");
  if (max_complexity < 1) throw std::invalid_argument("max_complexity must be >= 1");
  if (parsimony < 0) throw std::invalid_argument("parsimony must be >= 0");
  if (constant_evaluations < 0) throw std::invalid_argument("constant_evaluations must be >= 0");
  if (constant_probability < 0 || constant_probability > 1) {
    throw std::invalid_argument("constant_probability must lie in [0, 1]");
  }
  if (migration < 0) throw std::invalid_argument("migration must be >= 0");
}

bool ParetoFrontier::offer(const FrontierEntry& entry) {
  if (!std::isfinite(entry.mse)) return false;
  auto it = entries_.find(entry.complexity);
  if (it != entries_.end() && !(entry.mse < it->second.mse)) return false;
  for (const auto& [c, e] : entries_) {
    if (c > entry.complexity) break;
    if (c < entry.complexity && e.mse <= entry.mse) return false;
  }
  entries_[entry.complexity] = entry;
  prune();
  return true;
}

void ParetoFrontier::prune() {
  double best = kInf;
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (it->second.mse < best) {
      best = it->second.mse;
      ++it;
    } else {
      it = entries_.erase(it);
    }
  }
}

std::vector<FrontierEntry> ParetoFrontier::entries() const {
  std::vector<FrontierEntry> out;
  for (const auto& [c, e] : entries_) out.push_back(e);
  return out;
}

FrontierEntry measure(const Expression& e, const Dataset& data, const expr::OperatorSet& ops) {
  const Eigen::ArrayXd err = expr::eval_batch(e, data.inputs) - data.targets.array();
  FrontierEntry m{e, expr::complexity(e, ops), err.square().mean(), err.abs().mean()};
  if (!std::isfinite(m.mse) || !std::isfinite(m.mae)) m.mse = m.mae = kInf;
  return m;
}

Expression optimize_constants(const Expression& e, const Dataset& data, int evaluations) {
  const std::vector<double> k0 = e.constants();
  if (k0.empty()) return e;
  const auto f = [&](const std::vector<double>& k) { return mse_of(e.with_constants(k), data); };
  const double f0 = f(k0);
  const std::vector<double> k = nelder_mead(f, k0, evaluations);
  return f(k) < f0 ? e.with_constants(k) : e;
}

Expression least_squares_constants(const Expression& e, const Dataset& data, int iterations) {
  std::vector<double> k = e.constants();
  if (k.empty()) return e;
  const auto p = static_cast<Eigen::Index>(k.size());
  const auto residual = [&](const std::vector<double>& kk) -> Eigen::VectorXd {
    return (expr::eval_batch(e.with_constants(kk), data.inputs) - data.targets.array()).matrix();
  };
  Eigen::VectorXd r = residual(k);
  double cost = r.squaredNorm();
  if (!std::isfinite(cost)) return e;
  double lambda = 1e-3;
  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd J(r.size(), p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double h = 1e-7 * std::max(1.0, std::abs(k[static_cast<std::size_t>(j)]));
      auto kp = k, km = k;
      kp[static_cast<std::size_t>(j)] += h;
      km[static_cast<std::size_t>(j)] -= h;
      J.col(j) = (residual(kp) - residual(km)) / (2.0 * h);
    }
    if (!J.allFinite()) break;
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 10 && !improved; ++tries) {
      Eigen::MatrixXd A = JtJ;
      A.diagonal().array() += lambda * (JtJ.diagonal().array() + 1e-12);
      const Eigen::VectorXd delta = A.ldlt().solve(-g);
      auto trial = k;
      for (Eigen::Index j = 0; j < p; ++j) trial[static_cast<std::size_t>(j)] += delta[j];
      const Eigen::VectorXd rt = residual(trial);
      const double ct = rt.squaredNorm();
      if (std::isfinite(ct) && ct < cost) {
        const double gain = (cost - ct) / std::max(cost, 1e-300);
        k = std::move(trial);
        r = rt;
        cost = ct;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
        if (gain < 1e-14) return e.with_constants(k);
      } else {
        lambda *= 4.0;
      }
    }
    if (!improved) break;
  }
  return e.with_constants(k);
}

ParetoFrontier evolve(const Dataset& data, const SymregConfig& config) {
  config.validate();
  data.validate();
  if (data.size() == 0) throw std::invalid_argument("evolve: empty dataset");
  Evolution evo(data, config);
  return evo.run();
}

std::vector<Candidate> score_frontier(const std::vector<FrontierEntry>& frontier) {
  std::vector<FrontierEntry> sorted = frontier;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.complexity < b.complexity; });
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& e = sorted[i];
    Candidate c{e.expression, e.complexity, e.mae, e.mse, 0.0, i == 0};
    if (i > 0) {
      const auto& prev = sorted[i - 1];
      const double now = std::log(std::max(e.mae, kMaeFloor));
      const double before = std::log(std::max(prev.mae, kMaeFloor));
      c.score = -(now - before) / static_cast<double>(e.complexity - prev.complexity);
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Candidate> score_frontier(const ParetoFrontier& frontier) {
  if (frontier.empty()) throw std::invalid_argument("score_frontier: empty frontier");
  return score_frontier(frontier.entries());
}

Candidate select_candidate(const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("select_candidate: no candidates");
  double min_loss = kInf;
  for (const auto& c : candidates) min_loss = std::min(min_loss, c.mse);
  const Candidate* best = nullptr;
  for (const auto& c : candidates) {
    if (!(c.mse <= 1.5 * min_loss)) continue;
    if (best == nullptr || better(c, *best)) best = &c;
  }
  return best != nullptr ? *best : candidates.front();
}

std::vector<Candidate> top_by_score(const std::vector<Candidate>& candidates, std::size_t count) {
  std::vector<Candidate> out = candidates;
  std::stable_sort(out.begin(), out.end(), better);
  if (out.size() > count) out.resize(count);
  return out;
}

void write_frontier_csv(std::ostream& out, const std::vector<Candidate>& candidates,
                        const std::vector<std::string>& names) {
  out.precision(17);
  out << "complexity,mse,mae,score,expression\n";
  for (const auto& c : candidates) {
    out << c.complexity << ',' << c.mse << ',' << c.mae << ',' << c.score << ",\""
        << expr::format(c.expression, names) << "\"\n";
  }
}

void write_frontier_csv(const std::filesystem::path& path, const std::vector<Candidate>& candidates,
                        const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_frontier_csv(out, candidates, names);
}

}  // namespace rdsym::symreg
