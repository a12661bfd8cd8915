#include "rdsym/kodemo.hpp"

#include <gtest/gtest.h>

using namespace rdsym;
using Eigen::VectorXd;

namespace {

kodemo::KoConfig tiny() {
  kodemo::KoConfig c;
  c.t_end = 2.0;
  c.data_points = 11;
  c.collocation_count = 21;
  c.hidden = {8};
  return c;
}

}  // namespace

TEST(Ko, RhsAtInitialState) {
  const Eigen::Vector3d u(kodemo::kInitial[0], kodemo::kInitial[1], kodemo::kInitial[2]);
  const Eigen::Vector3d d = kodemo::ko_rhs(0.0, u);
  EXPECT_DOUBLE_EQ(d(0), 0.4);
  EXPECT_DOUBLE_EQ(d(1), 0.5);
  EXPECT_DOUBLE_EQ(d(2), -1.6);
}

TEST(Ko, TrajectoryFiniteAndStartsAtInitial) {
  const auto y = kodemo::ko_generate(VectorXd::LinSpaced(101, 0.0, 10.0));
  EXPECT_TRUE(y.allFinite());
  EXPECT_EQ(y(0, 0), 1.0);
  EXPECT_EQ(y(0, 1), 0.8);
  EXPECT_EQ(y(0, 2), 0.5);
}

TEST(Ko, ProblemLayout) {
  const auto p = kodemo::make_problem(tiny());
  EXPECT_EQ(p.surrogate_spec().input_dim, 1);
  EXPECT_EQ(p.surrogate_spec().output_dim, 3);
  EXPECT_EQ(p.rhs_spec().input_dim, 4);
  EXPECT_EQ(p.rhs_spec().output_dim, 2);
  const auto st = p.initial_state(1);
  EXPECT_EQ(st.scalars.size(), 2);
  EXPECT_EQ(st.scalars.value(st.scalars.index("a")), 0.0);
}

TEST(Ko, GradientMatchesFiniteDifferences) {
  const auto p = kodemo::make_problem(tiny());
  const auto obj = p.objective();
  const VectorXd x = p.initial_state(2).pack();
  std::vector<Eigen::Index> coords;
  for (Eigen::Index i = 0; i < 18; ++i) coords.push_back((i * 37) % x.size());
  coords.push_back(x.size() - 1);
  coords.push_back(x.size() - 2);
  const VectorXd g = optim::loss_gradient(obj, x);
  const VectorXd fd = optim::finite_difference_gradient(obj, x, coords);
  VectorXd gs(static_cast<Eigen::Index>(coords.size()));
  for (std::size_t i = 0; i < coords.size(); ++i) gs(static_cast<Eigen::Index>(i)) = g(coords[i]);
  EXPECT_LE((gs - fd).norm() / fd.norm(), 1e-4);
}

TEST(Ko, DiscoverReportShapeAndDeterminism) {
  pinn::TrainOptions t;
  t.adam.steps = 100;
  t.lbfgs.max_iterations = 10;
  auto sr = kodemo::default_symreg();
  sr.iterations = 3;
  sr.population_size = 40;
  const auto a = kodemo::ko_discover(tiny(), 4, t, sr);
  const auto b = kodemo::ko_discover(tiny(), 4, t, sr);
  EXPECT_EQ(kodemo::to_json(a).dump(), kodemo::to_json(b).dump());
  EXPECT_LE(a.f1.top.size(), 3u);
  EXPECT_EQ(a.f2.top.size(), std::min<std::size_t>(3, a.f2.frontier.size()));
  const auto j = kodemo::to_json(a);
  EXPECT_TRUE(j.contains("a"));
  EXPECT_TRUE(j.contains("b"));
}

TEST(Ko, ConfigValidation) {
  auto c = tiny();
  c.data_points = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
