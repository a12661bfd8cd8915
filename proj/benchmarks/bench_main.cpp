#include "rdsym/cohort.hpp"
#include "rdsym/pinn.hpp"
#include "rdsym/symreg.hpp"

#include <benchmark/benchmark.h>

using namespace rdsym;

namespace {

pinn::GraphProblem fisher_problem(int subjects, int nodes) {
  const auto sys = graph::laplacian_from_weights(graph::random_weights(nodes, 0.3, 0.5, 1.5, 7));
  cohort::CohortConfig cc;
  cc.groups = {{"fisher", cohort::table1_reaction(1)}};
  cc.subjects_per_group = subjects;
  return pinn::GraphProblem(cohort::generate_cohort(cc, sys, 1), sys, {});
}

void BM_LossAndGradient(benchmark::State& state) {
  const auto p = fisher_problem(static_cast<int>(state.range(0)), 10);
  const auto obj = p.objective();
  const Eigen::VectorXd x = p.initial_state(1).pack();
  Eigen::VectorXd g;
  for (auto _ : state) benchmark::DoNotOptimize(obj.evaluate(x, &g));
}
BENCHMARK(BM_LossAndGradient)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_FastTanh(benchmark::State& state) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(200, 50) * 3.0;
  for (auto _ : state) benchmark::DoNotOptimize(ad::fast_tanh(x));
}
BENCHMARK(BM_FastTanh);

void BM_Integrate(benchmark::State& state) {
  const auto sys = graph::laplacian_from_weights(graph::random_weights(83, 0.3, 0.5, 1.5, 2));
  const auto f = graph::reaction_from_expression(cohort::table1_reaction(4));
  const graph::SubjectParams p{1.0, 0.6, Eigen::VectorXd::Constant(83, 0.05)};
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(31, 0.0, 30.0);
  for (auto _ : state) benchmark::DoNotOptimize(graph::integrate(sys, p, f, t));
}
BENCHMARK(BM_Integrate)->Unit(benchmark::kMillisecond);

void BM_EvolveFisher(benchmark::State& state) {
  const auto d = symreg::sample_function([](double c) { return c * (1 - c); }, symreg::uniform_grid());
  symreg::SymregConfig cfg;
  cfg.iterations = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(symreg::evolve(d, cfg));
}
BENCHMARK(BM_EvolveFisher)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
