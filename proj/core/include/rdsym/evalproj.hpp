#pragma once

// Forward projection of discovered models, projection error, ensemble
// ranking and min/max uncertainty bands.

#include "rdsym/cohort.hpp"
#include "rdsym/expr.hpp"
#include "rdsym/graph.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace rdsym::evalproj {

struct SubjectModel {
  double kappa = 0.0;
  double alpha = 0.0;
  expr::Expression f;
  std::uint64_t member_seed = 0;
};

using ModelMap = std::map<std::string, SubjectModel>;  // by subject id

struct ProjectionResult {
  std::string subject_id;
  Eigen::VectorXd t_grid;
  Eigen::MatrixXd trajectory;  // |t_grid| x nodes
  std::uint64_t member_seed = 0;
  std::string f_text;
  double kappa = 0.0;
  double alpha = 0.0;
};

// start, start + step, ... up to `end` (inclusive within rounding).
Eigen::VectorXd time_grid(double start, double end, double step);

// Integrates from the subject's first observation up to time `horizon`.
ProjectionResult project(const graph::LaplacianSystem& system,
                         const cohort::Subject& subject,
                         const SubjectModel& model, double horizon,
                         double step);

// Mean over rows of the squared row-wise L2 misfit.
double projection_error(const Eigen::MatrixXd& observed,
                        const Eigen::MatrixXd& projected);
double projection_error(const graph::LaplacianSystem& system,
                        const cohort::Subject& subject,
                        const SubjectModel& model);
// Averaged over the cohort's subjects; every subject needs a model.
double projection_error(const cohort::Cohort& cohort,
                        const graph::LaplacianSystem& system,
                        const ModelMap& models);

struct Ranking {
  std::vector<int> order;  // ascending error, ties by index
  int best = 0;
};
Ranking rank_ensemble(const std::vector<double>& errors);

struct UncertaintyBand {
  Eigen::VectorXd t_grid;
  Eigen::MatrixXd min;
  Eigen::MatrixXd max;
  Eigen::MatrixXd best;
};

UncertaintyBand band(const std::vector<Eigen::MatrixXd>& members,
                     const Eigen::VectorXd& t_grid, int best);

// Columns: time,node_label,member,value. `columns` selects nodes (all when
// empty); labels default to node indices.
void write_projection_csv(std::ostream& out,
                          const std::vector<ProjectionResult>& members,
                          const std::vector<std::string>& labels,
                          const std::vector<int>& columns = {});
// Columns: time,node_label,min,max,best.
void write_band_csv(std::ostream& out, const UncertaintyBand& band,
                    const std::vector<std::string>& labels,
                    const std::vector<int>& columns = {});

}  // namespace rdsym::evalproj
