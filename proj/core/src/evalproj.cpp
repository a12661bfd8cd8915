#include "rdsym/evalproj.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace rdsym::evalproj {

namespace {

std::vector<int> all_columns(Eigen::Index n, const std::vector<int>& columns) {
  if (!columns.empty()) return columns;
  std::vector<int> out(static_cast<std::size_t>(n));
  std::iota(out.begin(), out.end(), 0);
  return out;
}

std::string label_of(const std::vector<std::string>& labels, int i) {
  return i < static_cast<int>(labels.size()) ? labels[static_cast<std::size_t>(i)]
                                              : std::to_string(i);
}

Eigen::MatrixXd integrate_model(const graph::LaplacianSystem& system,
                                const cohort::Subject& subject, const SubjectModel& model,
                                const Eigen::VectorXd& t_grid) {
  graph::SubjectParams p;
  p.kappa = model.kappa;
  p.alpha = model.alpha;
  p.c0 = subject.concentrations.row(0).transpose();
  try {
    return graph::integrate(system, p, graph::reaction_from_expression(model.f), t_grid);
  } catch (const std::exception& e) {
    throw std::runtime_error("projection failed for subject " + subject.id + ": " + e.what());
  }
}

}  // namespace

Eigen::VectorXd time_grid(double start, double end, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("time step must be positive");
  if (end < start) throw std::invalid_argument("time grid end precedes start");
  const auto n = static_cast<Eigen::Index>(std::floor((end - start) / step + 1e-9)) + 1;
  Eigen::VectorXd t(n);
  for (Eigen::Index k = 0; k < n; ++k) t[k] = start + step * static_cast<double>(k);
  return t;
}

ProjectionResult project(const graph::LaplacianSystem& system, const cohort::Subject& subject,
                         const SubjectModel& model, double horizon, double step) {
  const double t0 = subject.times[0];
  const double last = subject.times[subject.times.size() - 1];
  if (!(horizon > last)) {
    throw std::invalid_argument("projection horizon must exceed the last observation of " +
                                subject.id);
  }
  ProjectionResult r;
  r.subject_id = subject.id;
  r.t_grid = time_grid(t0, horizon, step);
  r.trajectory = integrate_model(system, subject, model, r.t_grid);
  r.member_seed = model.member_seed;
  r.f_text = expr::format(model.f);
  r.kappa = model.kappa;
  r.alpha = model.alpha;
  return r;
}

double projection_error(const Eigen::MatrixXd& observed, const Eigen::MatrixXd& projected) {
  if (observed.rows() != projected.rows() || observed.cols() != projected.cols()) {
    throw std::invalid_argument("projection_error: shape mismatch");
  }
  if (observed.rows() == 0) return 0.0;
  return (observed - projected).squaredNorm() / static_cast<double>(observed.rows());
}

double projection_error(const graph::LaplacianSystem& system, const cohort::Subject& subject,
                        const SubjectModel& model) {
  return projection_error(subject.concentrations,
                          integrate_model(system, subject, model, subject.times));
}

double projection_error(const cohort::Cohort& cohort, const graph::LaplacianSystem& system,
                        const ModelMap& models) {
  if (cohort.subjects.empty()) throw std::invalid_argument("projection_error: empty cohort");
  double total = 0.0;
  for (const auto& s : cohort.subjects) {
    const auto it = models.find(s.id);
    if (it == models.end()) throw std::invalid_argument("no model for subject " + s.id);
    total += projection_error(system, s, it->second);
  }
  return total / static_cast<double>(cohort.subjects.size());
}

Ranking rank_ensemble(const std::vector<double>& errors) {
  if (errors.empty()) throw std::invalid_argument("rank_ensemble: no members");
  Ranking r;
  r.order.resize(errors.size());
  std::iota(r.order.begin(), r.order.end(), 0);
  const auto key = [&](int i) {
    const double e = errors[static_cast<std::size_t>(i)];
    return std::isnan(e) ? std::numeric_limits<double>::infinity() : e;
  };
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](int a, int b) { return key(a) < key(b); });
  r.best = r.order.front();
  return r;
}

UncertaintyBand band(const std::vector<Eigen::MatrixXd>& members, const Eigen::VectorXd& t_grid,
                     int best) {
  if (members.empty()) throw std::invalid_argument("band: no members");
  if (best < 0 || best >= static_cast<int>(members.size())) {
    throw std::out_of_range("band: best member index");
  }
  UncertaintyBand b;
  b.t_grid = t_grid;
  b.min = members.front();
  b.max = members.front();
  for (const auto& m : members) {
    if (m.rows() != t_grid.size() || m.cols() != b.min.cols()) {
      throw std::invalid_argument("band: member trajectories are not aligned");
    }
    b.min = b.min.cwiseMin(m);
    b.max = b.max.cwiseMax(m);
  }
  b.best = members[static_cast<std::size_t>(best)];
  return b;
}

void write_projection_csv(std::ostream& out, const std::vector<ProjectionResult>& members,
                          const std::vector<std::string>& labels, const std::vector<int>& columns) {
  out.precision(12);
  out << "time,node_label,member,value\n";
  for (std::size_t m = 0; m < members.size(); ++m) {
    const auto& r = members[m];
    for (int c : all_columns(r.trajectory.cols(), columns)) {
      for (Eigen::Index k = 0; k < r.t_grid.size(); ++k) {
        out << r.t_grid[k] << ',' << label_of(labels, c) << ',' << m << ',' << r.trajectory(k, c)
            << '\n';
      }
    }
  }
}

void write_band_csv(std::ostream& out, const UncertaintyBand& b,
                    const std::vector<std::string>& labels, const std::vector<int>& columns) {
  out.precision(12);
  out << "time,node_label,min,max,best\n";
  for (int c : all_columns(b.min.cols(), columns)) {
    for (Eigen::Index k = 0; k < b.t_grid.size(); ++k) {
      out << b.t_grid[k] << ',' << label_of(labels, c) << ',' << b.min(k, c) << ',' << b.max(k, c)
          << ',' << b.best(k, c) << '\n';
    }
  }
}

}  // namespace rdsym::evalproj
