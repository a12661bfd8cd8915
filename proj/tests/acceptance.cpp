// Acceptance runner: one PASS/FAIL line per criterion.
//
//   rdsym_acceptance            run all criteria
//   rdsym_acceptance 1 2 8      run a subset
//
// Exit status is 0 only when every selected criterion passes.

#include "rdsym/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace rdsym;
namespace pl = rdsym::pipeline;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream o;
  o.precision(6);
  o << v;
  return o.str();
}

double at(const expr::Expression& e, double c) { return expr::eval(e, std::span<const double>(&c, 1)); }

double sup_on(const std::function<double(double)>& g, double lo, double hi, int n = 1001) {
  double worst = 0.0;
  for (int k = 0; k < n; ++k) {
    const double v = std::abs(g(lo + (hi - lo) * k / (n - 1)));
    worst = std::isfinite(v) ? std::max(worst, v) : INFINITY;
  }
  return worst;
}

graph::LaplacianSystem random_system(int nodes, std::uint64_t seed) {
  return graph::laplacian_from_weights(graph::random_weights(nodes, 0.3, 0.5, 1.5, seed));
}

// Synthetic-recovery setup shared by criteria 4, 5 and 10.
pl::RunConfig recovery_config(int subjects_per_group, std::vector<cohort::GroupSpec> groups) {
  pl::RunConfig c;
  c.seed = 11;
  c.ensemble_size = 1;
  c.cohort_gen.groups = std::move(groups);
  c.cohort_gen.subjects_per_group = subjects_per_group;
  c.cohort_gen.times = {0.0, 1.0, 2.0};
  c.cohort_gen.initial = {cohort::InitialLaw::Kind::kUniform, 0.0, 0.9};
  return c;
}

// ------------------------------------------------------------------------

Outcome criterion1() {
  double worst_bound = 0.0, worst_peak = 0.0;
  for (int g = 1; g <= 4; ++g) {
    const auto f = graph::reaction_from_expression(cohort::table1_reaction(g));
    worst_bound = std::max({worst_bound, std::abs(f(0.0)), std::abs(f(1.0))});
    // grid search, then golden-section refinement
    int best = 0;
    for (int k = 1; k <= 1000; ++k)
      if (f(k / 1000.0) > f(best / 1000.0)) best = k;
    double a = std::max(0, best - 1) / 1000.0, b = std::min(1000, best + 1) / 1000.0;
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 100; ++it) {
      const double x1 = b - r * (b - a), x2 = a + r * (b - a);
      (f(x1) < f(x2) ? a : b) = (f(x1) < f(x2) ? x1 : x2);
    }
    worst_peak = std::max(worst_peak, std::abs(f(0.5 * (a + b)) - 0.25));
  }
  return {worst_bound == 0.0 && worst_peak <= 1e-6,
          "max |f(0)|,|f(1)| = " + fmt(worst_bound) + ", max |peak - 0.25| = " + fmt(worst_peak)};
}

Outcome criterion2() {
  const graph::ReactionFn fisher = [](double c) { return c * (1 - c); };
  const graph::ReactionFn none = [](double) { return 0.0; };
  const auto one = graph::laplacian_from_weights(MatrixXd::Zero(1, 1));
  const VectorXd t2 = (VectorXd(2) << 0.0, 2.0).finished();
  const double logistic = graph::integrate(one, {1.0, 1.0, VectorXd::Constant(1, 0.5)}, fisher, t2)(1, 0);
  const double e1 = std::abs(logistic - 1.0 / (1.0 + std::exp(-2.0)));
  const auto two = graph::laplacian_from_weights((MatrixXd(2, 2) << 0, 1, 1, 0).finished());
  const VectorXd t1 = (VectorXd(2) << 0.0, 1.0).finished();
  const MatrixXd y = graph::integrate(two, {1.0, 0.0, (VectorXd(2) << 1, 0).finished()}, none, t1);
  const double e2 = std::abs(y(1, 0) - y(1, 1) - std::exp(-2.0));
  return {e1 <= 1e-6 && e2 <= 1e-6,
          "c(2) = " + fmt(logistic) + " (err " + fmt(e1) + "), gap(1) err " + fmt(e2)};
}

Outcome criterion3() {
  const auto sys = graph::laplacian_from_weights(graph::random_weights(3, 0.7, 0.5, 1.5, 5));
  cohort::CohortConfig cc;
  cc.groups = {{"fisher", cohort::table1_reaction(1)}};
  cc.subjects_per_group = 2;
  cc.initial = {cohort::InitialLaw::Kind::kUniform, 0.05, 0.6};
  const pinn::GraphProblem p(cohort::generate_cohort(cc, sys, 3), sys, {});
  const auto obj = p.objective();
  const VectorXd x = p.initial_state(17).pack();
  std::mt19937_64 rng(23);
  std::vector<Eigen::Index> coords;
  for (int i = 0; i < 20; ++i) coords.push_back(std::uniform_int_distribution<Eigen::Index>(0, x.size() - 1)(rng));
  const VectorXd g = optim::loss_gradient(obj, x);
  const VectorXd fd = optim::finite_difference_gradient(obj, x, coords);
  double worst = 0.0;
  VectorXd gs(20);
  for (int i = 0; i < 20; ++i) {
    gs(i) = g(coords[static_cast<std::size_t>(i)]);
    worst = std::max(worst, std::abs(gs(i) - fd(i)) / std::max(std::abs(fd(i)), 1e-6));
  }
  const double rel = (gs - fd).norm() / fd.norm();
  return {rel <= 1e-4, "relative error " + fmt(rel) + " over 20 coordinates (worst single " + fmt(worst) + ")"};
}

Outcome criterion4() {
  auto c = recovery_config(8, {{"fisher", cohort::table1_reaction(1)}});
  const auto sys = random_system(10, 7);
  const auto co = cohort::generate_cohort(c.cohort_gen, sys, 1);
  const auto r = pl::discover(co, sys, c, 1);
  const auto& m = r.members[0];
  if (!m.ok()) return {false, "training failed: " + m.error};

  double worst_kappa = 0.0;
  for (const auto& s : m.trained->subjects) {
    const double k0 = *co.subject(s.id).true_kappa;
    worst_kappa = std::max(worst_kappa, std::abs(s.kappa - k0) / k0);
  }
  // (b) least-squares k for f_sym ~ k c(1-c), then sup deviation on [0, 1]
  const auto f_sym = m.groups[0].selected.expression;
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double x = i / 1000.0, b = x * (1 - x);
    num += at(f_sym, x) * b;
    den += b * b;
  }
  const double k = num / den;
  const double dev = sup_on([&](double x) { return at(f_sym, x) - k * x * (1 - x); }, 0.0, 1.0);
  const bool equiv = dev <= 5e-3 && k >= 0.9 && k <= 1.1;

  evalproj::ModelMap truth;
  for (const auto& s : co.subjects) truth[s.id] = {*s.true_kappa, *s.true_alpha, cohort::table1_reaction(1), 0};
  const double e_truth = evalproj::projection_error(co, sys, truth);
  const double e_disc = m.projection_error;

  const bool pass = worst_kappa <= 0.10 && equiv && e_disc <= 2.0 * e_truth;
  return {pass, "(a) worst kappa rel err " + fmt(worst_kappa) + (worst_kappa <= 0.10 ? " ok" : " FAIL") +
                    "; (b) f_sym = " + expr::format(f_sym) + ", k = " + fmt(k) + ", sup dev " + fmt(dev) +
                    (equiv ? " ok" : " FAIL") + "; (c) projection err " + fmt(e_disc) + " vs truth " +
                    fmt(e_truth) + (e_disc <= 2.0 * e_truth ? " ok" : " FAIL")};
}

Outcome criterion5() {
  std::vector<cohort::GroupSpec> groups;
  for (int g = 1; g <= 4; ++g) groups.push_back({"g" + std::to_string(g), cohort::table1_reaction(g)});
  auto c = recovery_config(4, groups);
  const auto sys = random_system(10, 7);
  const auto co = cohort::generate_cohort(c.cohort_gen, sys, 2);
  const auto r = pl::discover(co, sys, c, 1);
  const auto& m = r.members[0];
  if (!m.ok()) return {false, "training failed: " + m.error};
  int own = 0;
  std::string detail;
  for (int g = 0; g < 4; ++g) {
    const auto f_sym = pl::member_reaction(m, groups[static_cast<std::size_t>(g)].label);
    std::vector<double> d;
    for (int h = 0; h < 4; ++h) {
      const auto& truth = groups[static_cast<std::size_t>(h)].reaction;
      d.push_back(sup_on([&](double x) { return at(f_sym, x) - at(truth, x); }, 0.0, 1.0));
    }
    const bool closest = std::min_element(d.begin(), d.end()) - d.begin() == g &&
                         std::count(d.begin(), d.end(), d[static_cast<std::size_t>(g)]) == 1;
    own += closest;
    detail += " g" + std::to_string(g + 1) + ":" + (closest ? "own" : "other") + "(" + fmt(d[static_cast<std::size_t>(g)]) + ")";
  }
  return {own >= 3, std::to_string(own) + "/4 groups closest to own truth;" + detail};
}

Outcome criterion6() {
  pl::RunConfig c;
  const auto r = kodemo::ko_discover(c.ko, 5, c.ko_train, c.ko_symreg);
  if (r.f2.top.empty()) return {false, "no f2 candidates"};
  const auto& top = r.f2.top.front().expression;
  // relative pointwise error against u1 u3 on the training data range
  const VectorXd t = VectorXd::LinSpaced(c.ko.data_points, 0.0, c.ko.t_end);
  const MatrixXd u = kodemo::ko_generate(t);
  double worst = 0.0;
  for (int k = 0; k < t.size(); ++k) {
    const double x[] = {t(k), u(k, 0), u(k, 1), u(k, 2)};
    const double ref = u(k, 0) * u(k, 2);
    worst = std::max(worst, std::abs(expr::eval(top, x) - ref) / std::max(std::abs(ref), 1e-3));
  }
  const bool pass = std::abs(r.a + 2.0) <= 0.05 && std::abs(r.b) <= 0.01 && worst <= 0.05;
  return {pass, "a = " + fmt(r.a) + ", b = " + fmt(r.b) + ", top f2 = " +
                    expr::format(top, expr::ko_names()) + " (max rel dev from u1*u3 " + fmt(worst) + ")"};
}

Outcome criterion7() {
  pl::RunConfig c;
  c.seed = 13;
  c.ensemble_size = 1;
  c.cohort_gen.groups = {{"fisher", cohort::table1_reaction(1)}};
  c.cohort_gen.subjects_per_group = 8;
  c.ablation_horizons = {2.0, 4.0, 6.0};
  c.train.adam.steps = 10000;
  c.train.lbfgs.max_iterations = 1000;
  const auto dir = std::filesystem::temp_directory_path() / "rdsym_acceptance_ablation";
  std::filesystem::create_directories(dir);
  graph::save_weights_csv(dir / "graph.csv", graph::random_weights(10, 0.3, 0.5, 1.5, 7));
  c.laplacian = dir / "graph.csv";
  const auto cells = pl::run_ablation(c, 1);
  const auto find = [&](double h, pinn::ConstraintMode m) {
    for (const auto& cell : cells)
      if (cell.horizon == h && cell.mode == m) return cell;
    throw std::logic_error("missing ablation cell");
  };
  const auto hard2 = find(2, pinn::ConstraintMode::kHard), none2 = find(2, pinn::ConstraintMode::kNone),
             none6 = find(6, pinn::ConstraintMode::kNone);
  const bool a = none2.f_phi_error_high > hard2.f_phi_error_high;
  const bool b = none6.f_phi_error <= none2.f_phi_error;
  std::string table;
  for (const auto& cell : cells) {
    table += " [T=" + fmt(cell.horizon) + " " + pinn::to_string(cell.mode) + " sup[0,1]=" + fmt(cell.f_phi_error) +
             " sup[0.7,1]=" + fmt(cell.f_phi_error_high) + "]";
  }
  return {a && b, std::string("none@2 > hard@2 on [0.7,1]: ") + (a ? "yes" : "no") +
                      "; none@6 <= none@2 on [0,1]: " + (b ? "yes" : "no") + ";" + table};
}

Outcome criterion8() {
  const auto c = expr::Expression::variable(0);
  const auto s = symreg::score_frontier(std::vector<symreg::FrontierEntry>{{c, 1, 0.01, 0.1}, {c, 3, 1e-6, 0.001}});
  const bool score_ok = std::abs(s[1].score - 2.302585) <= 1e-6 && s[0].score == 0.0;
  const auto cand = [&](int cx, double mse, double score) { return symreg::Candidate{c, cx, 0.1, mse, score, false}; };
  const auto sel = symreg::select_candidate({cand(1, 1.0, 0.5), cand(3, 1.4, 2.0), cand(5, 2.0, 9.9)});
  const bool filter_ok = sel.mse == 1.4 && sel.score == 2.0;
  const bool tie_ok = symreg::select_candidate({cand(7, 1.0, 2.0), cand(5, 1.1, 2.0)}).complexity == 5 &&
                      symreg::select_candidate({cand(5, 1.2, 2.0), cand(5, 1.1, 2.0)}).mse == 1.1;
  return {score_ok && filter_ok && tie_ok, "score " + fmt(s[1].score) + (score_ok ? " ok" : " FAIL") +
                                               ", 1.5x filter " + (filter_ok ? "ok" : "FAIL") + ", ties " +
                                               (tie_ok ? "ok" : "FAIL")};
}

// Small ensemble used by 9 and 10.
pl::RunConfig small_ensemble_config() {
  auto c = recovery_config(3, {{"fisher", cohort::table1_reaction(1)}});
  c.ensemble_size = 3;
  c.train.adam.steps = 1500;
  c.train.lbfgs.max_iterations = 150;
  c.pinn.surrogate_hidden = {20, 20};
  c.pinn.reaction.spec.hidden_widths = {20, 20};
  c.symreg.iterations = 20;
  return c;
}

Outcome criterion9() {
  const auto c = small_ensemble_config();
  const auto sys = random_system(6, 3);
  const auto co = cohort::generate_cohort(c.cohort_gen, sys, 4);
  const auto r = pl::discover(co, sys, c, 3);
  bool best_min = true;
  for (const auto& m : r.members) {
    best_min &= r.members[static_cast<std::size_t>(r.best_member)].projection_error <= m.projection_error;
  }
  bool ordered = true, contains = true;
  for (const auto& s : co.subjects) {
    std::vector<MatrixXd> traj;
    VectorXd grid;
    int best = 0;
    for (const auto& m : r.members) {
      if (!m.ok()) continue;
      if (m.index == r.best_member) best = static_cast<int>(traj.size());
      const auto p = evalproj::project(sys, s, pl::member_models(m).at(s.id), 20.0, 0.1);
      traj.push_back(p.trajectory);
      grid = p.t_grid;
    }
    const auto b = evalproj::band(traj, grid, best);
    ordered &= (b.min.array() <= b.best.array()).all() && (b.best.array() <= b.max.array()).all();
    for (const auto& t : traj) contains &= (b.min.array() <= t.array()).all() && (t.array() <= b.max.array()).all();
    const auto single = evalproj::band({traj[0]}, grid, 0);
    ordered &= single.min == single.max && single.max == single.best;
  }
  return {best_min && ordered && contains, std::string("best minimizes error: ") + (best_min ? "yes" : "no") +
                                                "; min <= best <= max and M=1 degenerate: " + (ordered ? "yes" : "no") +
                                                "; members inside band: " + (contains ? "yes" : "no")};
}

Outcome criterion10() {
  const auto c = small_ensemble_config();
  const auto sys = random_system(6, 3);
  const auto co = cohort::generate_cohort(c.cohort_gen, sys, 4);
  const auto a = pl::comparable(pl::to_json(pl::discover(co, sys, c, 3))).dump();
  const auto b = pl::comparable(pl::to_json(pl::discover(co, sys, c, 1))).dump();
  return {a == b, a == b ? "identical result JSON (" + std::to_string(a.size()) + " bytes), 3 vs 1 workers"
                         : "result JSON differs between reruns"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> all{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                  criterion6, criterion7, criterion8, criterion9, criterion10};
  // runtime budgets in seconds (0: none)
  const double budget[] = {1, 1, 30, 900, 2700, 600, 1800, 1, 60, 0};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  bool ok = true;
  for (int n = 1; n <= 10; ++n) {
    if (!selected.empty() && !selected.count(n)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = all[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double limit = budget[n - 1];
    if (limit > 0 && secs > limit) {
      o.pass = false;
      o.detail += "; over the " + fmt(limit) + " s budget";
    }
    std::printf("criterion %2d: %s  (%.1f s)  %s\n", n, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
    std::fflush(stdout);
    ok &= o.pass;
  }
  return ok ? 0 : 1;
}
