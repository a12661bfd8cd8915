#include "rdsym/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace rdsym::graph {

int LaplacianSystem::node_index(const std::string& label) const {
  for (std::size_t i = 0; i < node_labels.size(); ++i) {
    if (node_labels[i] == label) return static_cast<int>(i);
  }
  throw std::out_of_range("unknown node label '" + label + "'");
}

void LaplacianSystem::validate() const {
  const Eigen::Index n = L.rows();
  if (n < 1 || L.cols() != n) throw ValidationError("Laplacian must be square");
  if (!L.allFinite()) throw ValidationError("Laplacian has non-finite entries");
  if (!node_labels.empty() && static_cast<Eigen::Index>(node_labels.size()) != n) {
    throw ValidationError("node label count does not match Laplacian size");
  }
  const double scale = std::max(1.0, L.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(L.row(i).sum()) > 1e-10 * scale) {
      throw ValidationError("Laplacian row " + std::to_string(i) +
                            " does not sum to zero");
    }
    if (L(i, i) < 0.0) throw ValidationError("negative Laplacian diagonal");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (std::abs(L(i, j) - L(j, i)) > 1e-12 * scale) {
        throw ValidationError("Laplacian is not symmetric");
      }
      if (i != j && L(i, j) > 0.0) {
        throw ValidationError("positive off-diagonal Laplacian entry");
      }
    }
  }
}

LaplacianSystem laplacian_from_weights(const Eigen::MatrixXd& W,
                                       std::vector<std::string> labels) {
  const Eigen::Index n = W.rows();
  if (n < 1 || W.cols() != n) throw ValidationError("weights must be square");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (W(i, i) != 0.0) throw ValidationError("weights need a zero diagonal");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!std::isfinite(W(i, j)) || W(i, j) < 0.0) {
        throw ValidationError("weights must be finite and non-negative");
      }
      if (W(i, j) != W(j, i)) throw ValidationError("weights must be symmetric");
    }
  }
  LaplacianSystem sys;
  sys.L = -W;
  sys.L.diagonal() = W.rowwise().sum();
  sys.node_labels = std::move(labels);
  sys.validate();
  return sys;
}

Eigen::MatrixXd random_weights(int nodes, double edge_probability, double w_lo,
                               double w_hi, std::uint64_t seed) {
  if (nodes < 1) throw std::invalid_argument("random_weights: nodes < 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> weight(w_lo, w_hi);
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(nodes, nodes);
  for (int i = 0; i < nodes; ++i) {
    for (int j = i + 1; j < nodes; ++j) {
      const double draw = u01(rng);
      const double w = weight(rng);
      if (draw < edge_probability) {
        W(i, j) = w;
        W(j, i) = w;
      }
    }
  }
  return W;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

bool parse_double(const std::string& s, double& v) {
  try {
    std::size_t used = 0;
    v = std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

LaplacianSystem load_laplacian_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open Laplacian file " + path.string());
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  std::string line;
  bool first_data_line = true;
  std::size_t header_cells = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[0] == '#') {
      const std::string key = "# labels:";
      if (line.rfind(key, 0) == 0) labels = split(line.substr(key.size()), ',');
      continue;
    }
    auto cells = split(line, ',');
    std::vector<double> values(cells.size());
    bool numeric = true;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      numeric = numeric && parse_double(cells[i], values[i]);
    }
    if (!numeric) {
      if (first_data_line) {
        first_data_line = false;
        header_cells = cells.size();
        continue;  // header
      }
      throw ValidationError("non-numeric row in " + path.string() + ": " + line);
    }
    first_data_line = false;
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ValidationError("empty Laplacian file " + path.string());

  const bool square = std::all_of(rows.begin(), rows.end(), [&](const auto& r) {
    return r.size() == rows.size();
  });
  // A 3-column header ("i,j,weight") marks an edge list even for 3 rows.
  const bool edge_header = header_cells == 3;
  Eigen::MatrixXd W;
  if (square && !edge_header) {
    W.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < rows.size(); ++j) {
        W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
      }
    }
    // A dense file already holding a Laplacian is accepted as-is.
    bool looks_laplacian = false;
    for (Eigen::Index i = 0; i < W.rows(); ++i) looks_laplacian |= W(i, i) != 0.0;
    if (looks_laplacian) {
      LaplacianSystem sys{W, labels};
      sys.validate();
      return sys;
    }
    return laplacian_from_weights(W, labels);
  }
  // Edge list.
  int n = 0;
  for (const auto& r : rows) {
    if (r.size() != 3) throw ValidationError("edge-list rows need 3 columns");
    if (r[0] < 0 || r[1] < 0 || r[0] != std::floor(r[0]) || r[1] != std::floor(r[1])) {
      throw ValidationError("edge-list node ids must be non-negative integers");
    }
    n = std::max(n, static_cast<int>(std::max(r[0], r[1])) + 1);
  }
  if (!labels.empty()) n = std::max<int>(n, static_cast<int>(labels.size()));
  W = Eigen::MatrixXd::Zero(n, n);
  for (const auto& r : rows) {
    const auto i = static_cast<Eigen::Index>(r[0]);
    const auto j = static_cast<Eigen::Index>(r[1]);
    if (i == j) throw ValidationError("edge list contains a self-loop");
    W(i, j) += r[2];
    W(j, i) += r[2];
  }
  return laplacian_from_weights(W, labels);
}

void save_weights_csv(const std::filesystem::path& path, const Eigen::MatrixXd& W,
                      const std::vector<std::string>& labels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (!labels.empty()) {
    out << "# labels: ";
    for (std::size_t i = 0; i < labels.size(); ++i) out << (i ? "," : "") << labels[i];
    out << '\n';
  }
  out.precision(17);
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    for (Eigen::Index j = 0; j < W.cols(); ++j) out << (j ? "," : "") << W(i, j);
    out << '\n';
  }
}

ReactionFn reaction_from_expression(const expr::Expression& e) {
  return [e](double c) { return expr::eval(e, std::span<const double>(&c, 1)); };
}

Eigen::VectorXd rhs(const LaplacianSystem& sys, double kappa, double alpha,
                    const ReactionFn& f, const Eigen::VectorXd& c) {
  if (c.size() != sys.size()) throw std::invalid_argument("rhs: dimension mismatch");
  Eigen::VectorXd out = -kappa * (sys.L * c);
  for (Eigen::Index i = 0; i < c.size(); ++i) out[i] += alpha * f(c[i]);
  return out;
}

ode::Options default_ode_options() {
  ode::Options o;
  o.rtol = 1e-8;
  o.atol = 1e-10;
  return o;
}

Eigen::MatrixXd integrate(const LaplacianSystem& sys, const SubjectParams& params,
                          const ReactionFn& f, const Eigen::VectorXd& t_grid,
                          const ode::Options& options) {
  if (params.c0.size() != sys.size()) {
    throw std::invalid_argument("integrate: initial condition has wrong size");
  }
  const Eigen::MatrixXd& L = sys.L;
  const double kappa = params.kappa, alpha = params.alpha;
  auto f_rhs = [&](double, const ode::State& y, ode::State& dydt) {
    dydt.noalias() = -kappa * (L * y);
    for (Eigen::Index i = 0; i < y.size(); ++i) dydt[i] += alpha * f(y[i]);
  };
  return ode::integrate(f_rhs, params.c0, t_grid, options);
}

}  // namespace rdsym::graph
