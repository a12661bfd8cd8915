#include "rdsym/pinn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

namespace rdsym::pinn {

namespace {

Eigen::VectorXd unit_grid(int points) {
  return Eigen::VectorXd::LinSpaced(points, 0.0, 1.0);
}

// Raw hard-mode value c(1-c)exp(g(c)) on the normalization grid; returns
// the grid point where it peaks.
double hard_argmax(const ReactionNet& net, const nn::ParamVector& phi) {
  const Eigen::VectorXd grid = unit_grid(net.grid_points);
  const Eigen::VectorXd g = nn::forward_batch(net.spec, phi, grid).col(0);
  Eigen::Index best = 0;
  double best_v = -1.0;
  for (Eigen::Index k = 0; k < grid.size(); ++k) {
    const double c = grid[k];
    const double v = c * (1.0 - c) * std::exp(g[k]);
    if (v > best_v) {
      best_v = v;
      best = k;
    }
  }
  return grid[best];
}

double hard_peak(const ReactionNet& net, const nn::ParamVector& phi) {
  const double c = hard_argmax(net, phi);
  Eigen::VectorXd x(1);
  x[0] = c;
  return c * (1.0 - c) * std::exp(nn::forward(net.spec, phi, x)[0]);
}

// f and optionally f' on a tape for inputs cc (K x 1).
struct ReactionOnTape {
  ad::Var f;
  std::optional<ad::Var> df;
};

ReactionOnTape reaction_on_tape(ad::Tape& tape, const ReactionNet& net,
                                const Vector& x, Eigen::Index offset,
                                const ad::Var& cc, bool derivative) {
  std::optional<Eigen::MatrixXd> dX;
  if (derivative) dX = Eigen::MatrixXd::Ones(cc.rows(), 1);
  const nn::DualOutput g = nn::forward_on_tape(tape, net.spec, x, offset, cc, dX);
  if (net.mode == ConstraintMode::kNone) return {g.value, g.tangent};

  const nn::ParamVector phi = x.segment(offset, net.spec.param_count());
  const double cstar = hard_argmax(net, phi);
  const ad::Var gstar =
      nn::forward_on_tape(tape, net.spec, x, offset,
                          tape.constant(Eigen::MatrixXd::Constant(1, 1, cstar)))
          .value;
  // 1 / (4 * peak)
  const ad::Var inv = ad::recip(ad::scale(ad::exp(gstar), 4.0 * cstar * (1.0 - cstar)));

  const ad::Var e = ad::exp(g.value);
  const ad::Var q = ad::mul(cc, ad::shift(ad::neg(cc), 1.0));
  ReactionOnTape out{ad::mul_scalar(ad::mul(q, e), inv), std::nullopt};
  if (derivative) {
    const ad::Var slope = ad::shift(ad::scale(cc, -2.0), 1.0);
    const ad::Var dft = ad::add(ad::mul(slope, e), ad::mul(ad::mul(q, e), *g.tangent));
    out.df = ad::mul_scalar(dft, inv);
  }
  return out;
}

ad::Var aux_on_tape(ad::Tape& tape, const ReactionNet& net, const Vector& x,
                    Eigen::Index offset, int points) {
  const ad::Var cc = tape.constant(Eigen::MatrixXd(unit_grid(points)));
  const ReactionOnTape r = reaction_on_tape(tape, net, x, offset, cc, true);
  return ad::mean(ad::relu(ad::sub_scalar(*r.df, ad::entry(*r.df, 0, 0))));
}

}  // namespace

const char* to_string(ConstraintMode mode) {
  return mode == ConstraintMode::kHard ? "hard" : "none";
}

ConstraintMode constraint_mode_from_string(const std::string& text) {
  if (text == "hard") return ConstraintMode::kHard;
  if (text == "none") return ConstraintMode::kNone;
  throw std::invalid_argument("constraint_mode must be 'hard' or 'none', got '" + text + "'");
}

void ReactionNet::validate() const {
  spec.validate();
  if (spec.input_dim != 1 || spec.output_dim != 1) {
    throw std::invalid_argument("reaction net must map 1 -> 1");
  }
  if (grid_points < 3) throw std::invalid_argument("normalization grid needs >= 3 points");
}

Eigen::VectorXd reaction_eval_batch(const ReactionNet& net, const nn::ParamVector& phi,
                                    const Eigen::VectorXd& c, int* clamped) {
  Eigen::VectorXd cc = c;
  for (Eigen::Index k = 0; k < cc.size(); ++k) {
    if (cc[k] < 0.0 || cc[k] > 1.0) {
      cc[k] = std::clamp(cc[k], 0.0, 1.0);
      if (clamped != nullptr) ++*clamped;
    }
  }
  const Eigen::VectorXd g = nn::forward_batch(net.spec, phi, cc).col(0);
  if (net.mode == ConstraintMode::kNone) return g;
  const double scale = 1.0 / (4.0 * hard_peak(net, phi));
  Eigen::VectorXd out(cc.size());
  for (Eigen::Index k = 0; k < cc.size(); ++k) {
    out[k] = cc[k] * (1.0 - cc[k]) * std::exp(g[k]) * scale;
  }
  return out;
}

double reaction_eval(const ReactionNet& net, const nn::ParamVector& phi, double c,
                     int* clamped) {
  Eigen::VectorXd x(1);
  x[0] = c;
  return reaction_eval_batch(net, phi, x, clamped)[0];
}

Eigen::VectorXd reaction_derivative(const ReactionNet& net, const nn::ParamVector& phi,
                                    const Eigen::VectorXd& c) {
  Eigen::VectorXd out(c.size());
  const double scale =
      net.mode == ConstraintMode::kHard ? 1.0 / (4.0 * hard_peak(net, phi)) : 1.0;
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    Eigen::VectorXd x(1);
    x[0] = c[k];
    const double dg = nn::input_jacobian(net.spec, phi, x)(0, 0);
    if (net.mode == ConstraintMode::kNone) {
      out[k] = dg;
    } else {
      const double e = std::exp(nn::forward(net.spec, phi, x)[0]);
      const double q = c[k] * (1.0 - c[k]);
      out[k] = ((1.0 - 2.0 * c[k]) * e + q * e * dg) * scale;
    }
  }
  return out;
}

graph::ReactionFn reaction_function(const ReactionNet& net, const nn::ParamVector& phi) {
  const double scale =
      net.mode == ConstraintMode::kHard ? 1.0 / (4.0 * hard_peak(net, phi)) : 1.0;
  return [net, phi, scale](double c) {
    Eigen::VectorXd x(1);
    x[0] = std::clamp(c, 0.0, 1.0);
    const double g = nn::forward(net.spec, phi, x)[0];
    if (net.mode == ConstraintMode::kNone) return g;
    return x[0] * (1.0 - x[0]) * std::exp(g) * scale;
  };
}

double aux_penalty(const Eigen::VectorXd& fprime) {
  if (fprime.size() == 0) return 0.0;
  return (fprime.array() - fprime[0]).max(0.0).mean();
}

double aux_loss(const ReactionNet& net, const nn::ParamVector& phi, int points) {
  return aux_penalty(reaction_derivative(net, phi, unit_grid(points)));
}

double combine(const LossWeights& w, double data, double residual, double aux) {
  return w.data * data + w.residual * residual + w.aux * aux;
}

// ---------------------------------------------------------------- Problem

Eigen::Index Problem::dimension() const { return initial_state(0).dimension(); }

optim::TapeObjective Problem::objective() const {
  return optim::TapeObjective(dimension(), [this](ad::Tape& tape, const Vector& x) {
    return record(tape, x).total;
  });
}

LossValues Problem::losses(const Vector& x) const {
  ad::Tape tape;
  const LossTerms t = record(tape, x);
  return {t.data.scalar(), t.residual.scalar(), t.aux.scalar(), t.total.scalar()};
}

LossValues Problem::losses(const optim::TrainableState& state) const {
  return losses(state.pack());
}

std::string Problem::diagnose(const Vector& x) const {
  ad::Tape tape;
  const LossTerms t = record(tape, x);
  std::ostringstream out;
  bool any = false;
  for (const auto& [label, value] : t.parts) {
    if (!std::isfinite(value)) {
      out << (any ? ", " : "") << label << "=" << value;
      any = true;
    }
  }
  if (!x.allFinite()) out << (any ? ", " : "") << "non-finite parameters";
  return out.str();
}

optim::TrainResult train_problem(const Problem& problem, std::uint64_t seed,
                                 const TrainOptions& options) {
  const optim::TapeObjective objective = problem.objective();
  optim::TrainResult result{problem.initial_state(seed), {}, false};
  try {
    if (options.adam.steps > 0) {
      optim::TrainResult a = optim::optimize_adam(objective, result.state, options.adam);
      result.state = std::move(a.state);
      result.history = std::move(a.history);
    }
    if (options.lbfgs.max_iterations > 0) {
      optim::TrainResult b = optim::optimize_lbfgs(objective, result.state, options.lbfgs);
      result.state = std::move(b.state);
      const std::size_t skip = result.history.empty() ? 0 : 1;  // repeated start
      result.history.insert(result.history.end(), b.history.begin() + skip,
                            b.history.end());
      result.warning = b.warning;
    }
  } catch (const optim::NonFiniteLoss& e) {
    const Vector& at = e.failing().size() > 0 ? e.failing() : e.last_finite();
    std::string which = problem.diagnose(at);
    if (which.empty()) which = "gradient";
    throw TrainingDiverged(std::string(e.what()) + " (seed " + std::to_string(seed) +
                           "; diverged: " + which + ")");
  }
  if (result.history.empty()) result.history.push_back(problem.losses(result.state).total);
  if (!std::isfinite(result.history.back())) {
    throw TrainingDiverged("final loss is not finite");
  }
  return result;
}

// ----------------------------------------------------------- GraphProblem

void GraphProblemConfig::validate() const {
  reaction.validate();
  for (int w : surrogate_hidden) {
    if (w < 1) throw std::invalid_argument("surrogate hidden widths must be >= 1");
  }
  if (collocation_count < 2) throw std::invalid_argument("collocation_count must be >= 2");
  if (aux_points < 2) throw std::invalid_argument("aux grid needs >= 2 points");
  if (weights.data < 0 || weights.residual < 0 || weights.aux < 0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

GraphProblem::GraphProblem(cohort::Cohort cohort, graph::LaplacianSystem system,
                           GraphProblemConfig config)
    : cohort_(std::move(cohort)), system_(std::move(system)), config_(std::move(config)) {
  config_.validate();
  cohort_.validate();
  system_.validate();
  if (cohort_.node_count != system_.size()) {
    throw std::invalid_argument("cohort has " + std::to_string(cohort_.node_count) +
                                " nodes but the graph has " +
                                std::to_string(system_.size()));
  }
  surrogate_spec_ = nn::NetSpec{1, cohort_.node_count, config_.surrogate_hidden};
  groups_ = cohort_.group_labels();
  for (const auto& s : cohort_.subjects) {
    subject_group_.push_back(group_index(s.group));
    const double t0 = s.times[0], t1 = s.times[s.times.size() - 1];
    time_span_.emplace_back(t0, t1);
    collocation_.push_back(Eigen::VectorXd::LinSpaced(config_.collocation_count, t0, t1));
  }
  reaction_block_ = surrogate_spec_.param_count() * subject_count();
}

int GraphProblem::group_index(const std::string& label) const {
  for (int g = 0; g < group_count(); ++g) {
    if (groups_[g] == label) return g;
  }
  throw std::out_of_range("unknown group '" + label + "'");
}

std::vector<int> GraphProblem::group_members(int g) const {
  std::vector<int> out;
  for (int s = 0; s < subject_count(); ++s) {
    if (subject_group_[s] == g) out.push_back(s);
  }
  return out;
}

Eigen::Index GraphProblem::surrogate_offset(int subject) const {
  return surrogate_spec_.param_count() * subject;
}

Eigen::Index GraphProblem::reaction_offset(int group) const {
  return reaction_block_ + config_.reaction.spec.param_count() * group;
}

double GraphProblem::normalized_time(int subject, double t) const {
  const auto [t0, t1] = time_span_[subject];
  return 2.0 * (t - t0) / (t1 - t0) - 1.0;
}

optim::TrainableState GraphProblem::initial_state(std::uint64_t seed) const {
  optim::TrainableState state;
  const Eigen::Index sp = surrogate_spec_.param_count();
  const Eigen::Index rp = config_.reaction.spec.param_count();
  state.params.resize(sp * subject_count() + rp * group_count());
  const int last = surrogate_spec_.layer_count() - 1;
  for (int s = 0; s < subject_count(); ++s) {
    nn::ParamVector p = nn::init_params(surrogate_spec_, cohort::derive_seed(seed, "surrogate", s));
    // Start the output at the logit of each node's mean observation.
    const Eigen::RowVectorXd mean = cohort_.subjects[s].concentrations.colwise().mean();
    for (int i = 0; i < cohort_.node_count; ++i) {
      const double m = std::clamp(mean[i], 1e-3, 1.0 - 1e-3);
      p[surrogate_spec_.bias_offset(last) + i] = std::log(m / (1.0 - m));
    }
    state.params.segment(surrogate_offset(s), sp) = p;
  }
  for (int g = 0; g < group_count(); ++g) {
    state.params.segment(reaction_offset(g), rp) =
        nn::init_params(config_.reaction.spec, cohort::derive_seed(seed, "reaction", g));
  }
  for (int s = 0; s < subject_count(); ++s) {
    const std::string& id = cohort_.subjects[s].id;
    state.scalars.add("kappa:" + id, config_.kappa_init);
    state.scalars.add("alpha:" + id, config_.alpha_init);
  }
  return state;
}

LossTerms GraphProblem::record(ad::Tape& tape, const Vector& x) const {
  // Layout shared by every state of this problem.
  const Eigen::Index scalar_base = reaction_block_ +
                                   config_.reaction.spec.param_count() * group_count();
  const int n = cohort_.node_count;
  const Eigen::MatrixXd& L = system_.L;
  LossTerms terms;

  struct SubjectTape {
    ad::Var c_col;
    ad::Var dc_col;
    Eigen::Index nR;
  };
  std::vector<SubjectTape> st(static_cast<std::size_t>(subject_count()));
  std::vector<ad::Var> data_parts;

  for (int s = 0; s < subject_count(); ++s) {
    const auto& subj = cohort_.subjects[s];
    const Eigen::Index nD = subj.times.size();
    const Eigen::VectorXd& tr = collocation_[s];
    const Eigen::Index nR = tr.size();
    const auto [t0, t1] = time_span_[s];
    Eigen::MatrixXd X(nD + nR, 1);
    for (Eigen::Index k = 0; k < nD; ++k) X(k, 0) = normalized_time(s, subj.times[k]);
    for (Eigen::Index k = 0; k < nR; ++k) X(nD + k, 0) = normalized_time(s, tr[k]);
    const Eigen::MatrixXd dX = Eigen::MatrixXd::Constant(nD + nR, 1, 2.0 / (t1 - t0));

    const nn::DualOutput z =
        nn::forward_on_tape(tape, surrogate_spec_, x, surrogate_offset(s), tape.constant(X), dX);
    const ad::Var c = ad::logistic(z.value);
    const ad::Var dc = ad::mul(ad::mul(c, ad::shift(ad::neg(c), 1.0)), *z.tangent);

    const ad::Var miss = ad::sub(ad::block_rows(c, 0, nD), tape.constant(subj.concentrations));
    const ad::Var data = ad::scale(ad::sum(ad::square(miss)), 1.0 / static_cast<double>(nD));
    terms.parts.emplace_back("data[" + subj.id + "]", data.scalar());
    data_parts.push_back(data);
    st[static_cast<std::size_t>(s)] = {ad::block_rows(c, nD, nR), ad::block_rows(dc, nD, nR), nR};
  }

  std::vector<ad::Var> res_parts(static_cast<std::size_t>(subject_count()));
  std::vector<ad::Var> aux_parts;
  for (int g = 0; g < group_count(); ++g) {
    const std::vector<int> members = group_members(g);
    std::vector<ad::Var> stacked;
    for (int s : members) {
      const auto& t = st[static_cast<std::size_t>(s)];
      stacked.push_back(ad::reshape(t.c_col, t.nR * n, 1));
    }
    const ad::Var cc = ad::vcat(stacked);
    const ad::Var f = reaction_on_tape(tape, config_.reaction, x, reaction_offset(g), cc, false).f;
    Eigen::Index at = 0;
    for (int s : members) {
      const auto& t = st[static_cast<std::size_t>(s)];
      const ad::Var fs = ad::reshape(ad::block_rows(f, at, t.nR * n), t.nR, n);
      at += t.nR * n;
      const ad::Var kappa = tape.parameter(x, scalar_base + kappa_index(s), 1, 1);
      const ad::Var alpha = tape.parameter(x, scalar_base + alpha_index(s), 1, 1);
      // dc/dt + kappa (L c) - alpha f(c), one row per collocation time
      const ad::Var r = ad::sub(ad::add(t.dc_col, ad::mul_scalar(ad::matmul(t.c_col, L), kappa)),
                                ad::mul_scalar(fs, alpha));
      const ad::Var res = ad::scale(ad::sum(ad::square(r)), 1.0 / static_cast<double>(t.nR));
      terms.parts.emplace_back("residual[" + cohort_.subjects[s].id + "]", res.scalar());
      res_parts[static_cast<std::size_t>(s)] = res;
    }
    const ad::Var aux = aux_on_tape(tape, config_.reaction, x, reaction_offset(g), config_.aux_points);
    terms.parts.emplace_back("aux[" + groups_[g] + "]", aux.scalar());
    aux_parts.push_back(aux);
  }

  const auto average = [&tape](const std::vector<ad::Var>& parts) {
    if (parts.empty()) return tape.constant(0.0);
    return ad::scale(ad::sum(ad::hcat(parts)), 1.0 / static_cast<double>(parts.size()));
  };
  terms.data = average(data_parts);
  terms.residual = average(res_parts);
  terms.aux = average(aux_parts);
  const LossWeights& w = config_.weights;
  terms.total = ad::add(ad::add(ad::scale(terms.data, w.data), ad::scale(terms.residual, w.residual)),
                        ad::scale(terms.aux, w.aux));
  return terms;
}

Eigen::MatrixXd GraphProblem::surrogate_eval(const nn::ParamVector& params, int subject,
                                             const Eigen::VectorXd& t) const {
  Eigen::MatrixXd X(t.size(), 1);
  for (Eigen::Index k = 0; k < t.size(); ++k) X(k, 0) = normalized_time(subject, t[k]);
  const Eigen::MatrixXd z = nn::forward_batch(surrogate_spec_, params, X);
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

// ------------------------------------------------------------ TrainedPinn

bool TrainedPinn::operator==(const TrainedPinn& o) const {
  if (seed != o.seed || loss_history != o.loss_history || warning != o.warning ||
      subjects.size() != o.subjects.size() || groups.size() != o.groups.size()) {
    return false;
  }
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto& a = subjects[i];
    const auto& b = o.subjects[i];
    if (a.id != b.id || a.group != b.group || a.kappa != b.kappa || a.alpha != b.alpha ||
        a.surrogate != b.surrogate) {
      return false;
    }
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].label != o.groups[i].label || groups[i].reaction != o.groups[i].reaction) {
      return false;
    }
  }
  return true;
}

TrainedPinn unpack_trained(const GraphProblem& problem, const optim::TrainableState& state) {
  TrainedPinn out;
  const Eigen::Index sp = problem.surrogate_spec().param_count();
  const Eigen::Index rp = problem.config().reaction.spec.param_count();
  for (int s = 0; s < problem.subject_count(); ++s) {
    const auto& subj = problem.cohort().subjects[s];
    out.subjects.push_back({subj.id, subj.group,
                            state.params.segment(problem.surrogate_offset(s), sp),
                            state.scalars.value(problem.kappa_index(s)),
                            state.scalars.value(problem.alpha_index(s))});
  }
  for (int g = 0; g < problem.group_count(); ++g) {
    out.groups.push_back({problem.group_label(g),
                          state.params.segment(problem.reaction_offset(g), rp)});
  }
  return out;
}

optim::TrainableState pack_trained(const GraphProblem& problem, const TrainedPinn& trained) {
  optim::TrainableState state = problem.initial_state(0);
  if (static_cast<int>(trained.subjects.size()) != problem.subject_count() ||
      static_cast<int>(trained.groups.size()) != problem.group_count()) {
    throw std::invalid_argument("trained state does not match the problem layout");
  }
  const Eigen::Index sp = problem.surrogate_spec().param_count();
  const Eigen::Index rp = problem.config().reaction.spec.param_count();
  for (int s = 0; s < problem.subject_count(); ++s) {
    const auto& fit = trained.subjects[static_cast<std::size_t>(s)];
    if (fit.surrogate.size() != sp) throw std::invalid_argument("surrogate size mismatch");
    state.params.segment(problem.surrogate_offset(s), sp) = fit.surrogate;
    state.scalars.set(problem.kappa_index(s), fit.kappa);
    state.scalars.set(problem.alpha_index(s), fit.alpha);
  }
  for (int g = 0; g < problem.group_count(); ++g) {
    const auto& fit = trained.groups[static_cast<std::size_t>(g)];
    if (fit.reaction.size() != rp) throw std::invalid_argument("reaction size mismatch");
    state.params.segment(problem.reaction_offset(g), rp) = fit.reaction;
  }
  return state;
}

TrainedPinn train(const GraphProblem& problem, std::uint64_t seed, const TrainOptions& options) {
  optim::TrainResult r = train_problem(problem, seed, options);
  TrainedPinn out = unpack_trained(problem, r.state);
  out.seed = seed;
  out.loss_history = std::move(r.history);
  out.warning = r.warning;
  return out;
}

std::vector<EnsembleMember> ensemble_train(const GraphProblem& problem, std::uint64_t root_seed,
                                           int members, const TrainOptions& options,
                                           int workers) {
  if (members < 1) throw std::invalid_argument("ensemble size must be >= 1");
  std::vector<EnsembleMember> out(static_cast<std::size_t>(members));
  for (int m = 0; m < members; ++m) {
    out[static_cast<std::size_t>(m)].index = m;
    out[static_cast<std::size_t>(m)].seed = cohort::derive_seed(root_seed, "member", m);
  }
  std::atomic<int> next{0};
  const auto work = [&]() {
    for (int m = next++; m < members; m = next++) {
      auto& member = out[static_cast<std::size_t>(m)];
      try {
        member.result = train(problem, member.seed, options);
      } catch (const std::exception& e) {
        member.error = e.what();
      }
    }
  };
  const int threads = std::clamp(workers, 1, members);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (std::none_of(out.begin(), out.end(), [](const auto& m) { return m.result.has_value(); })) {
    throw TrainingDiverged("all " + std::to_string(members) +
                           " ensemble members failed; first error: " + out.front().error);
  }
  return out;
}

TrainedPinn rescale_alpha_f(const GraphProblem& problem, TrainedPinn trained) {
  const ReactionNet& net = problem.config().reaction;
  if (net.mode == ConstraintMode::kHard) return trained;
  const Eigen::VectorXd grid = unit_grid(net.grid_points);
  const int last = net.spec.layer_count() - 1;
  for (auto& group : trained.groups) {
    const double peak = reaction_eval_batch(net, group.reaction, grid).maxCoeff();
    if (!(peak > 0.0) || !std::isfinite(peak)) continue;  // nothing positive to normalize
    const double k = 0.25 / peak;
    // f = g is linear in the output layer, so scaling it scales f exactly.
    const Eigen::Index w0 = net.spec.weight_offset(last);
    const Eigen::Index len = net.spec.bias_offset(last) + net.spec.fan_out(last) - w0;
    group.reaction.segment(w0, len) *= k;
    for (auto& s : trained.subjects) {
      if (s.group == group.label) s.alpha /= k;
    }
  }
  return trained;
}

std::vector<double> visited_concentrations(const GraphProblem& problem,
                                           const TrainedPinn& trained, int group) {
  std::vector<double> out;
  for (int s : problem.group_members(group)) {
    const Eigen::MatrixXd c = problem.surrogate_eval(
        trained.subjects[static_cast<std::size_t>(s)].surrogate, s, problem.collocation_times(s));
    out.insert(out.end(), c.data(), c.data() + c.size());
  }
  return out;
}

// ------------------------------------------------------------------- JSON

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const TrainedPinn& t) {
  nlohmann::json j;
  j["seed"] = t.seed;
  j["warning"] = t.warning;
  j["loss_history"] = t.loss_history;
  j["subjects"] = nlohmann::json::array();
  for (const auto& s : t.subjects) {
    j["subjects"].push_back({{"id", s.id},
                             {"group", s.group},
                             {"kappa", s.kappa},
                             {"alpha", s.alpha},
                             {"surrogate", to_std(s.surrogate)}});
  }
  j["groups"] = nlohmann::json::array();
  for (const auto& g : t.groups) {
    j["groups"].push_back({{"label", g.label}, {"reaction", to_std(g.reaction)}});
  }
  return j;
}

TrainedPinn trained_from_json(const nlohmann::json& j) {
  TrainedPinn t;
  t.seed = j.at("seed").get<std::uint64_t>();
  t.warning = j.value("warning", false);
  t.loss_history = j.at("loss_history").get<std::vector<double>>();
  for (const auto& s : j.at("subjects")) {
    t.subjects.push_back({s.at("id").get<std::string>(), s.at("group").get<std::string>(),
                          from_std(s.at("surrogate").get<std::vector<double>>()),
                          s.at("kappa").get<double>(), s.at("alpha").get<double>()});
  }
  for (const auto& g : j.at("groups")) {
    t.groups.push_back({g.at("label").get<std::string>(),
                        from_std(g.at("reaction").get<std::vector<double>>())});
  }
  return t;
}

}  // namespace rdsym::pinn
