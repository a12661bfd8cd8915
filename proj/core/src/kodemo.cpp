#include "rdsym/kodemo.hpp"

#include "rdsym/ode.hpp"

#include <cmath>
#include <stdexcept>

namespace rdsym::kodemo {

Eigen::Vector3d ko_rhs(double t, const Eigen::Vector3d& u) {
  return {std::exp(-t / 10.0) * u[1] * u[2], u[0] * u[2], -2.0 * u[0] * u[1]};
}

Eigen::MatrixXd ko_generate(const Eigen::VectorXd& t_grid) {
  const ode::Rhs rhs = [](double t, const ode::State& u, ode::State& du) {
    du = ko_rhs(t, Eigen::Vector3d(u[0], u[1], u[2]));
  };
  ode::State u0(3);
  u0 << kInitial[0], kInitial[1], kInitial[2];
  ode::Options opts;
  opts.rtol = 1e-8;
  opts.atol = 1e-10;
  return ode::integrate(rhs, u0, t_grid, opts);
}

void KoConfig::validate() const {
  if (!(t_end > 0.0)) throw std::invalid_argument("ko t_end must be positive");
  if (data_points < 2) throw std::invalid_argument("ko data_points must be >= 2");
  if (collocation_count < 2) throw std::invalid_argument("ko collocation_count must be >= 2");
  for (int w : hidden) {
    if (w < 1) throw std::invalid_argument("ko hidden widths must be >= 1");
  }
}

KoProblem::KoProblem(KoConfig config, Eigen::VectorXd times, Eigen::MatrixXd data)
    : config_(std::move(config)), times_(std::move(times)), data_(std::move(data)) {
  config_.validate();
  if (data_.rows() != times_.size() || data_.cols() != 3) {
    throw std::invalid_argument("ko data must be |times| x 3");
  }
  collocation_ = Eigen::VectorXd::LinSpaced(config_.collocation_count, times_[0],
                                            times_[times_.size() - 1]);
  surrogate_ = nn::NetSpec{1, 3, config_.hidden};
  rhs_ = nn::NetSpec{4, 2, config_.hidden};
}

KoProblem make_problem(const KoConfig& config) {
  config.validate();
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(config.data_points, 0.0, config.t_end);
  return KoProblem(config, t, ko_generate(t));
}

optim::TrainableState KoProblem::initial_state(std::uint64_t seed) const {
  optim::TrainableState s;
  s.params.resize(surrogate_.param_count() + rhs_.param_count());
  s.params.head(surrogate_.param_count()) =
      nn::init_params(surrogate_, cohort::derive_seed(seed, "ko-surrogate"));
  s.params.tail(rhs_.param_count()) = nn::init_params(rhs_, cohort::derive_seed(seed, "ko-rhs"));
  s.scalars.add("a", config_.a_init);
  s.scalars.add("b", config_.b_init);
  return s;
}

Eigen::MatrixXd KoProblem::rhs_inputs(const Eigen::MatrixXd& inputs) const {
  // The network sees t / t_end so every input is O(1).
  Eigen::MatrixXd x = inputs;
  x.col(0) /= config_.t_end;
  return x;
}

pinn::LossTerms KoProblem::record(ad::Tape& tape, const optim::Vector& x) const {
  const double t0 = times_[0], t1 = times_[times_.size() - 1];
  const Eigen::Index nD = times_.size(), nR = collocation_.size();
  Eigen::MatrixXd X(nD + nR, 1);
  X.col(0).head(nD) = times_;
  X.col(0).tail(nR) = collocation_;
  X = ((X.array() - t0) * (2.0 / (t1 - t0)) - 1.0).matrix();
  const Eigen::MatrixXd dX = Eigen::MatrixXd::Constant(nD + nR, 1, 2.0 / (t1 - t0));
  const nn::DualOutput u = nn::forward_on_tape(tape, surrogate_, x, 0, tape.constant(X), dX);

  pinn::LossTerms terms;
  const ad::Var miss = ad::sub(ad::block_rows(u.value, 0, nD), tape.constant(data_));
  terms.data = ad::scale(ad::sum(ad::square(miss)), 1.0 / static_cast<double>(nD));

  const ad::Var uc = ad::block_rows(u.value, nD, nR);
  const ad::Var du = ad::block_rows(*u.tangent, nD, nR);
  const ad::Var tcol = tape.constant(Eigen::MatrixXd(collocation_ / config_.t_end));
  const ad::Var f = nn::forward_on_tape(tape, rhs_, x, rhs_offset(), ad::hcat({tcol, uc})).value;
  const Eigen::Index base = surrogate_.param_count() + rhs_.param_count();
  const ad::Var a = tape.parameter(x, base, 1, 1);
  const ad::Var b = tape.parameter(x, base + 1, 1, 1);
  const ad::Var u1 = ad::column(uc, 0), u2 = ad::column(uc, 1);
  const ad::Var known = ad::add_scalar(ad::mul_scalar(ad::mul(u1, u2), a), b);
  const ad::Var model = ad::hcat({ad::column(f, 0), ad::column(f, 1), known});
  const ad::Var r = ad::sub(du, model);
  terms.residual = ad::scale(ad::sum(ad::square(r)), 1.0 / static_cast<double>(nR));
  terms.aux = tape.constant(0.0);
  const pinn::LossWeights& w = config_.weights;
  terms.total = ad::add(ad::scale(terms.data, w.data), ad::scale(terms.residual, w.residual));
  terms.parts = {{"data", terms.data.scalar()}, {"residual", terms.residual.scalar()}};
  return terms;
}

Eigen::MatrixXd KoProblem::surrogate_eval(const nn::ParamVector& params,
                                          const Eigen::VectorXd& t) const {
  const double t0 = times_[0], t1 = times_[times_.size() - 1];
  const Eigen::MatrixXd X = ((t.array() - t0) * (2.0 / (t1 - t0)) - 1.0).matrix();
  return nn::forward_batch(surrogate_, params.head(surrogate_.param_count()), X);
}

Eigen::MatrixXd KoProblem::rhs_eval(const nn::ParamVector& params,
                                    const Eigen::MatrixXd& inputs) const {
  return nn::forward_batch(rhs_, params.segment(rhs_offset(), rhs_.param_count()),
                           rhs_inputs(inputs));
}

symreg::SymregConfig default_symreg() {
  symreg::SymregConfig c;
  c.operators = expr::OperatorSet::with_trig();
  return c;
}

KoReport ko_discover(const KoConfig& config, std::uint64_t seed, const pinn::TrainOptions& train,
                     symreg::SymregConfig sr) {
  const KoProblem problem = make_problem(config);
  const optim::TrainResult fit = pinn::train_problem(problem, seed, train);
  KoReport report;
  report.seed = seed;
  report.a = fit.state.scalars.value(0);
  report.b = fit.state.scalars.value(1);
  report.final_loss = fit.history.back();

  const Eigen::VectorXd& tc = problem.collocation_times();
  Eigen::MatrixXd inputs(tc.size(), 4);
  inputs.col(0) = tc;
  inputs.rightCols(3) = problem.surrogate_eval(fit.state.params, tc);
  const Eigen::MatrixXd f = problem.rhs_eval(fit.state.params, inputs);

  const auto distill = [&](int k) {
    sr.seed = cohort::derive_seed(seed, "ko-symreg", static_cast<std::uint64_t>(k));
    const symreg::Dataset data = symreg::make_dataset(inputs.transpose(), f.col(k));
    FunctionReport out;
    out.frontier = symreg::score_frontier(symreg::evolve(data, sr));
    out.top = symreg::top_by_score(out.frontier, 3);
    return out;
  };
  report.f1 = distill(0);
  report.f2 = distill(1);
  return report;
}

namespace {

nlohmann::json candidates_json(const std::vector<symreg::Candidate>& cs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cs) {
    arr.push_back({{"expression", expr::format(c.expression, expr::ko_names())},
                   {"complexity", c.complexity},
                   {"mse", c.mse},
                   {"mae", c.mae},
                   {"score", c.score}});
  }
  return arr;
}

}  // namespace

nlohmann::json to_json(const KoReport& r) {
  return {{"a", r.a},
          {"b", r.b},
          {"final_loss", r.final_loss},
          {"seed", r.seed},
          {"f1", {{"top3", candidates_json(r.f1.top)}, {"frontier", candidates_json(r.f1.frontier)}}},
          {"f2", {{"top3", candidates_json(r.f2.top)}, {"frontier", candidates_json(r.f2.frontier)}}}};
}

}  // namespace rdsym::kodemo
