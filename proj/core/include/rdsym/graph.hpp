#pragma once

// Weighted graph Laplacians and the network reaction-diffusion system
//
//   dc_i/dt = -kappa * sum_j L_ij c_j + alpha * f(c_i).

#include "rdsym/expr.hpp"
#include "rdsym/ode.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdsym::graph {

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LaplacianSystem {
  Eigen::MatrixXd L;
  std::vector<std::string> node_labels;  // empty or one per node

  int size() const { return static_cast<int>(L.rows()); }
  // Column index of a node label; throws std::out_of_range if absent.
  int node_index(const std::string& label) const;
  void validate() const;
};

// L = diag(row sums of W) - W. W must be square, symmetric, non-negative
// with zero diagonal.
LaplacianSystem laplacian_from_weights(const Eigen::MatrixXd& W,
                                       std::vector<std::string> labels = {});

// Erdos-Renyi graph with Uniform(w_lo, w_hi) edge weights.
Eigen::MatrixXd random_weights(int nodes, double edge_probability,
                               double w_lo, double w_hi, std::uint64_t seed);

// Dense N x N CSV or an edge list with rows "i,j,weight" (0-based,
// undirected). An optional header row is skipped. Either form may carry a
// "# labels: a,b,c" comment line.
LaplacianSystem load_laplacian_csv(const std::filesystem::path& path);
void save_weights_csv(const std::filesystem::path& path,
                      const Eigen::MatrixXd& W,
                      const std::vector<std::string>& labels = {});

using ReactionFn = std::function<double(double)>;

ReactionFn reaction_from_expression(const expr::Expression& e);

Eigen::VectorXd rhs(const LaplacianSystem& sys, double kappa, double alpha,
                    const ReactionFn& f, const Eigen::VectorXd& c);

struct SubjectParams {
  double kappa = 1.0;
  double alpha = 0.5;
  Eigen::VectorXd c0;
};

ode::Options default_ode_options();  // rtol 1e-8, atol 1e-10

Eigen::MatrixXd integrate(const LaplacianSystem& sys,
                          const SubjectParams& params, const ReactionFn& f,
                          const Eigen::VectorXd& t_grid,
                          const ode::Options& options = default_ode_options());

}  // namespace rdsym::graph
