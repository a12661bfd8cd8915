#include "rdsym/pinn.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rdsym;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

cohort::Subject make_subject(std::string id, std::string group, VectorXd times, MatrixXd c) {
  cohort::Subject s;
  s.id = std::move(id);
  s.group = std::move(group);
  s.times = std::move(times);
  s.concentrations = std::move(c);
  return s;
}

graph::LaplacianSystem single_node() { return graph::laplacian_from_weights(MatrixXd::Zero(1, 1)); }

// One subject, one node, constant surrogate output 0.5.
double data_loss_for(const VectorXd& times, const VectorXd& values) {
  cohort::Cohort co;
  co.node_count = 1;
  co.subjects.push_back(make_subject("s", "g", times, values));
  pinn::GraphProblemConfig cfg;
  cfg.surrogate_hidden = {4};
  cfg.reaction.spec.hidden_widths = {4};
  const pinn::GraphProblem p(co, single_node(), cfg);
  auto st = p.initial_state(1);
  st.params.segment(p.surrogate_offset(0), p.surrogate_spec().param_count()).setZero();
  return p.losses(st).data;
}

pinn::GraphProblem small_problem(pinn::ConstraintMode mode, std::uint64_t seed = 2) {
  const auto sys = graph::laplacian_from_weights(graph::random_weights(3, 0.8, 0.5, 1.5, seed));
  cohort::CohortConfig cc;
  cc.groups = {{"a", cohort::table1_reaction(1)}};
  cc.subjects_per_group = 2;
  cc.initial = {cohort::InitialLaw::Kind::kUniform, 0.1, 0.6};
  pinn::GraphProblemConfig cfg;
  cfg.surrogate_hidden = {8, 8};
  cfg.reaction.spec.hidden_widths = {8, 8};
  cfg.reaction.mode = mode;
  cfg.collocation_count = 12;
  return pinn::GraphProblem(cohort::generate_cohort(cc, sys, seed), sys, cfg);
}

pinn::TrainOptions short_training() {
  pinn::TrainOptions t;
  t.adam.steps = 150;
  t.lbfgs.max_iterations = 30;
  return t;
}

}  // namespace

TEST(ReactionNet, HardModeBoundaryZerosForAnyParams) {
  const pinn::ReactionNet net{{1, 1, {10, 10}}, pinn::ConstraintMode::kHard};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto phi = nn::init_params(net.spec, seed);
    EXPECT_EQ(pinn::reaction_eval(net, phi, 0.0), 0.0);
    EXPECT_EQ(pinn::reaction_eval(net, phi, 1.0), 0.0);
  }
}

TEST(ReactionNet, HardModeZeroGIsFisher) {
  const pinn::ReactionNet net{{1, 1, {10}}, pinn::ConstraintMode::kHard};
  const VectorXd phi = VectorXd::Zero(net.spec.param_count());
  for (int k = 0; k <= 20; ++k) {
    const double c = k / 20.0;
    EXPECT_NEAR(pinn::reaction_eval(net, phi, c), c * (1 - c), 1e-15);
  }
}

TEST(ReactionNet, HardModeGridMaxIsQuarter) {
  const pinn::ReactionNet net{{1, 1, {16, 16}}, pinn::ConstraintMode::kHard};
  const VectorXd grid = VectorXd::LinSpaced(1001, 0.0, 1.0);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    VectorXd phi = nn::init_params(net.spec, seed) * 3.0;
    const VectorXd f = pinn::reaction_eval_batch(net, phi, grid);
    EXPECT_NEAR(f.maxCoeff(), 0.25, 1e-3);
    EXPECT_NEAR(f.maxCoeff(), 0.25, 2e-3);  // two grid steps
  }
}

TEST(ReactionNet, ClampsOutsideUnitInterval) {
  const pinn::ReactionNet net{{1, 1, {4}}, pinn::ConstraintMode::kHard};
  const VectorXd phi = nn::init_params(net.spec, 1);
  int clamped = 0;
  EXPECT_EQ(pinn::reaction_eval(net, phi, -0.5, &clamped), 0.0);
  EXPECT_EQ(pinn::reaction_eval(net, phi, 1.5, &clamped), 0.0);
  EXPECT_EQ(clamped, 2);
}

TEST(ReactionNet, NoneModeIsRawNetwork) {
  const pinn::ReactionNet net{{1, 1, {5}}, pinn::ConstraintMode::kNone};
  const VectorXd phi = nn::init_params(net.spec, 3);
  EXPECT_DOUBLE_EQ(pinn::reaction_eval(net, phi, 0.3), nn::forward(net.spec, phi, VectorXd::Constant(1, 0.3))(0));
}

TEST(ReactionNet, ModeStrings) {
  EXPECT_EQ(pinn::constraint_mode_from_string("hard"), pinn::ConstraintMode::kHard);
  EXPECT_EQ(pinn::constraint_mode_from_string("none"), pinn::ConstraintMode::kNone);
  EXPECT_THROW(pinn::constraint_mode_from_string("soft"), std::invalid_argument);
}

TEST(AuxLoss, FisherIsZero) {
  const VectorXd c = VectorXd::LinSpaced(101, 0.0, 1.0);
  EXPECT_EQ(pinn::aux_penalty((1.0 - 2.0 * c.array()).matrix()), 0.0);
  const pinn::ReactionNet net{{1, 1, {6}}, pinn::ConstraintMode::kHard};
  EXPECT_NEAR(pinn::aux_loss(net, VectorXd::Zero(net.spec.param_count())), 0.0, 1e-15);
}

TEST(AuxLoss, SquareOnGridIsOne) {
  const VectorXd c = VectorXd::LinSpaced(101, 0.0, 1.0);
  EXPECT_NEAR(pinn::aux_penalty(2.0 * c), 1.0, 0.01);
}

TEST(AuxLoss, InvariantToConstantShiftLinearInScale) {
  const pinn::ReactionNet net{{1, 1, {8}}, pinn::ConstraintMode::kNone};
  const VectorXd phi = nn::init_params(net.spec, 12);
  const double base = pinn::aux_loss(net, phi);
  ASSERT_GT(base, 0.0);
  VectorXd shifted = phi;
  shifted(shifted.size() - 1) += 3.0;  // output bias
  EXPECT_NEAR(pinn::aux_loss(net, shifted), base, 1e-14);
  VectorXd scaled = phi;
  const Eigen::Index w = net.spec.weight_offset(1);
  scaled.segment(w, scaled.size() - w) *= 2.5;
  EXPECT_NEAR(pinn::aux_loss(net, scaled), 2.5 * base, 1e-13);
}

TEST(AuxLoss, MatchesFiniteDifferenceDerivative) {
  const pinn::ReactionNet net{{1, 1, {8}}, pinn::ConstraintMode::kHard};
  const VectorXd phi = nn::init_params(net.spec, 4);
  const VectorXd c = VectorXd::LinSpaced(11, 0.05, 0.95);
  const VectorXd d = pinn::reaction_derivative(net, phi, c);
  const double h = 1e-6;
  for (int k = 0; k < c.size(); ++k) {
    const double fd = (pinn::reaction_eval(net, phi, c(k) + h) - pinn::reaction_eval(net, phi, c(k) - h)) / (2 * h);
    EXPECT_NEAR(d(k), fd, 1e-7);
  }
}

TEST(DataLoss, FormulaExample) {
  const VectorXd t = (VectorXd(2) << 0.0, 1.0).finished();
  EXPECT_NEAR(data_loss_for(t, (VectorXd(2) << 0.2, 0.2).finished()), 0.09, 1e-15);
}

TEST(DataLoss, ExactSurrogateIsZero) {
  const VectorXd t = (VectorXd(2) << 0.0, 1.0).finished();
  EXPECT_EQ(data_loss_for(t, VectorXd::Constant(2, 0.5)), 0.0);
}

TEST(DataLoss, DoublingTimesWithExactPointsHalves) {
  const double a = data_loss_for((VectorXd(2) << 0, 1).finished(), (VectorXd(2) << 0.2, 0.5).finished());
  const double b = data_loss_for((VectorXd(4) << 0, 1, 2, 3).finished(),
                                 (VectorXd(4) << 0.2, 0.5, 0.5, 0.5).finished());
  EXPECT_NEAR(b, a / 2.0, 1e-16);
}

TEST(TotalLoss, Combine) {
  EXPECT_NEAR(pinn::combine({1, 1, 1}, 0.1, 0.2, 0.3), 0.6, 1e-15);
  EXPECT_NEAR(pinn::combine({1, 1, 0}, 0.1, 0.2, 0.3), 0.3, 1e-15);
  EXPECT_EQ(pinn::combine({1, 1, 1}, 0.0, 0.0, 0.0), 0.0);
}

TEST(ResidualLoss, ExactLogisticSolutionVanishes) {
  // One node: c = logistic(alpha t + b0) solves dc/dt = alpha c (1 - c), which is
  // the hard-mode reaction with g = 0. A linear surrogate represents it exactly.
  const double alpha = 0.7, b0 = -1.0, t0 = 0.0, t1 = 2.0;
  const VectorXd times = (VectorXd(3) << t0, 1.0, t1).finished();
  VectorXd obs(3);
  for (int k = 0; k < 3; ++k) obs(k) = 1.0 / (1.0 + std::exp(-(alpha * times(k) + b0)));
  cohort::Cohort co;
  co.node_count = 1;
  co.subjects.push_back(make_subject("s", "g", times, obs));
  pinn::GraphProblemConfig cfg;
  cfg.surrogate_hidden = {};
  cfg.reaction.spec.hidden_widths = {4};
  const pinn::GraphProblem p(co, single_node(), cfg);
  auto st = p.initial_state(1);
  const Eigen::Index off = p.surrogate_offset(0);
  st.params(off) = alpha * (t1 - t0) / 2.0;                 // weight on normalized time
  st.params(off + 1) = alpha * (t0 + (t1 - t0) / 2.0) + b0;  // bias
  st.params.segment(p.reaction_offset(0), cfg.reaction.spec.param_count()).setZero();
  st.scalars.set(p.alpha_index(0), alpha);
  const auto l = p.losses(st);
  EXPECT_LE(l.residual, 1e-8);
  EXPECT_LE(l.data, 1e-20);
  EXPECT_NEAR(l.aux, 0.0, 1e-15);
}

TEST(ResidualLoss, NearZeroSurrogateIsFixedPoint) {
  const auto p = small_problem(pinn::ConstraintMode::kHard);
  auto st = p.initial_state(3);
  const auto& spec = p.surrogate_spec();
  for (int s = 0; s < p.subject_count(); ++s) {
    auto block = st.params.segment(p.surrogate_offset(s), spec.param_count());
    block.setZero();
    block.tail(spec.output_dim).setConstant(-60.0);  // logistic(-60) ~ 1e-26
  }
  EXPECT_LE(p.losses(st).residual, 1e-40);
}

TEST(ResidualLoss, QuadraticInKappaPerturbation) {
  const auto p = small_problem(pinn::ConstraintMode::kHard);
  auto st = p.initial_state(5);
  const auto at = [&](double k) {
    auto s = st;
    s.scalars.set(p.kappa_index(0), k);
    return p.losses(s).residual;
  };
  // The residual is affine in kappa, so the loss is an exact quadratic.
  const double l0 = at(0.0), l1 = at(1.0), l2 = at(2.0);
  const double a = (l2 - 2 * l1 + l0) / 2.0, b = l1 - l0 - a;
  const double kstar = -b / (2 * a);
  const double base = at(kstar);
  const double d1 = at(kstar + 1e-2) - base, d2 = at(kstar + 2e-2) - base;
  ASSERT_GT(d1, 0.0);
  EXPECT_NEAR(d2 / d1, 4.0, 1e-4);
}

TEST(TotalLoss, GradientMatchesFiniteDifferences) {
  for (auto mode : {pinn::ConstraintMode::kHard, pinn::ConstraintMode::kNone}) {
    const auto p = small_problem(mode);
    const auto obj = p.objective();
    const VectorXd x = p.initial_state(7).pack();
    std::vector<Eigen::Index> coords;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 16; ++i) coords.push_back(std::uniform_int_distribution<Eigen::Index>(0, x.size() - 1)(rng));
    for (int i = 0; i < 4; ++i) coords.push_back(x.size() - 1 - i);  // kappa/alpha
    const VectorXd g = optim::loss_gradient(obj, x);
    const VectorXd fd = optim::finite_difference_gradient(obj, x, coords);
    VectorXd gs(20);
    for (int i = 0; i < 20; ++i) gs(i) = g(coords[static_cast<std::size_t>(i)]);
    EXPECT_LE((gs - fd).norm() / fd.norm(), 1e-4) << pinn::to_string(mode);
  }
}

TEST(Train, ImprovesAndIsDeterministic) {
  const auto p = small_problem(pinn::ConstraintMode::kHard);
  const auto a = pinn::train(p, 3, short_training());
  const auto b = pinn::train(p, 3, short_training());
  EXPECT_TRUE(a == b);
  EXPECT_LT(a.loss_history.back(), a.loss_history.front());
  EXPECT_TRUE(std::isfinite(a.loss_history.back()));
  EXPECT_EQ(a.subjects.size(), 2u);
  EXPECT_EQ(a.groups.size(), 1u);
}

TEST(Train, JsonCheckpointRoundTrip) {
  const auto p = small_problem(pinn::ConstraintMode::kHard);
  const auto a = pinn::train(p, 3, short_training());
  const auto back = pinn::trained_from_json(nlohmann::json::parse(pinn::to_json(a).dump()));
  EXPECT_TRUE(back == a);
  const auto st = pinn::pack_trained(p, a);
  EXPECT_TRUE(pinn::unpack_trained(p, st).subjects[1].surrogate == a.subjects[1].surrogate);
}

TEST(Ensemble, SingleMemberEqualsTrain) {
  const auto p = small_problem(pinn::ConstraintMode::kHard);
  const auto e = pinn::ensemble_train(p, 11, 1, short_training());
  ASSERT_EQ(e.size(), 1u);
  ASSERT_TRUE(e[0].result);
  EXPECT_EQ(e[0].seed, cohort::derive_seed(11, "member", 0));
  EXPECT_TRUE(*e[0].result == pinn::train(p, e[0].seed, short_training()));
}

TEST(Ensemble, DistinctMembersAndWorkerIndependence) {
  const auto p = small_problem(pinn::ConstraintMode::kHard);
  const auto one = pinn::ensemble_train(p, 4, 3, short_training(), 1);
  const auto three = pinn::ensemble_train(p, 4, 3, short_training(), 3);
  ASSERT_EQ(one.size(), 3u);
  for (int m = 0; m < 3; ++m) {
    EXPECT_EQ(one[m].index, m);
    EXPECT_TRUE(*one[m].result == *three[m].result);
  }
  EXPECT_NE(one[0].seed, one[1].seed);
  EXPECT_FALSE(one[0].result->subjects[0].surrogate == one[1].result->subjects[0].surrogate);
  EXPECT_THROW(pinn::ensemble_train(p, 4, 0, short_training()), std::invalid_argument);
}

TEST(Rescale, HardModeIsIdentity) {
  const auto p = small_problem(pinn::ConstraintMode::kHard);
  const auto t = pinn::train(p, 1, short_training());
  EXPECT_TRUE(pinn::rescale_alpha_f(p, t) == t);
}

TEST(Rescale, PreservesAlphaTimesF) {
  const auto p = small_problem(pinn::ConstraintMode::kNone);
  const auto t = pinn::train(p, 1, short_training());
  const auto r = pinn::rescale_alpha_f(p, t);
  const auto& net = p.config().reaction;
  const VectorXd grid = VectorXd::LinSpaced(101, 0.0, 1.0);
  const VectorXd f0 = pinn::reaction_eval_batch(net, t.groups[0].reaction, grid);
  const VectorXd f1 = pinn::reaction_eval_batch(net, r.groups[0].reaction, grid);
  EXPECT_NEAR(pinn::reaction_eval_batch(net, r.groups[0].reaction, VectorXd::LinSpaced(1001, 0, 1)).maxCoeff(),
              0.25, 1e-12);
  for (std::size_t s = 0; s < t.subjects.size(); ++s) {
    const VectorXd a = t.subjects[s].alpha * f0, b = r.subjects[s].alpha * f1;
    EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Rescale, UndoesScaledF) {
  const auto p = small_problem(pinn::ConstraintMode::kNone);
  const auto t = pinn::train(p, 1, short_training());
  auto doubled = t;
  const auto& spec = p.config().reaction.spec;
  const Eigen::Index w = spec.weight_offset(spec.layer_count() - 1);
  doubled.groups[0].reaction.segment(w, spec.param_count() - w) *= 2.0;
  for (auto& s : doubled.subjects) s.alpha /= 2.0;
  const auto a = pinn::rescale_alpha_f(p, t), b = pinn::rescale_alpha_f(p, doubled);
  const VectorXd grid = VectorXd::LinSpaced(101, 0.0, 1.0);
  const auto& net = p.config().reaction;
  EXPECT_LE((pinn::reaction_eval_batch(net, a.groups[0].reaction, grid) -
             pinn::reaction_eval_batch(net, b.groups[0].reaction, grid)).cwiseAbs().maxCoeff(), 1e-12);
  for (std::size_t s = 0; s < a.subjects.size(); ++s) EXPECT_NEAR(a.subjects[s].alpha, b.subjects[s].alpha, 1e-12);
}

TEST(GraphProblem, CollocationSpansObservations) {
  const auto p = small_problem(pinn::ConstraintMode::kHard);
  for (int s = 0; s < p.subject_count(); ++s) {
    const auto& tr = p.collocation_times(s);
    EXPECT_EQ(tr.size(), 12);
    EXPECT_DOUBLE_EQ(tr(0), p.cohort().subjects[s].times(0));
    EXPECT_DOUBLE_EQ(tr(tr.size() - 1), p.cohort().subjects[s].times(2));
  }
}

TEST(GraphProblem, InitialScalars) {
  const auto p = small_problem(pinn::ConstraintMode::kHard);
  const auto st = p.initial_state(0);
  EXPECT_EQ(st.scalars.value(p.kappa_index(1)), 1.0);
  EXPECT_EQ(st.scalars.value(p.alpha_index(1)), 0.5);
  EXPECT_FALSE(st.scalars.positive(p.kappa_index(1)));
}
