#include "rdsym/mlp.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace rdsym::nn {

void NetSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw std::invalid_argument("NetSpec: dimensions must be >= 1");
  }
  for (int w : hidden_widths) {
    if (w < 1) throw std::invalid_argument("NetSpec: hidden width must be >= 1");
  }
}

int NetSpec::fan_in(int l) const {
  return l == 0 ? input_dim : hidden_widths[l - 1];
}

int NetSpec::fan_out(int l) const {
  return l == layer_count() - 1 ? output_dim : hidden_widths[l];
}

Eigen::Index NetSpec::param_count() const {
  Eigen::Index n = 0;
  for (int l = 0; l < layer_count(); ++l) {
    n += static_cast<Eigen::Index>(fan_in(l)) * fan_out(l) + fan_out(l);
  }
  return n;
}

Eigen::Index NetSpec::weight_offset(int l) const {
  Eigen::Index n = 0;
  for (int k = 0; k < l; ++k) {
    n += static_cast<Eigen::Index>(fan_in(k)) * fan_out(k) + fan_out(k);
  }
  return n;
}

Eigen::Index NetSpec::bias_offset(int l) const {
  return weight_offset(l) + static_cast<Eigen::Index>(fan_in(l)) * fan_out(l);
}

ParamVector init_params(const NetSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector p = ParamVector::Zero(spec.param_count());
  std::mt19937_64 rng(seed);
  for (int l = 0; l < spec.layer_count(); ++l) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(spec.fan_in(l) + spec.fan_out(l)));
    std::uniform_real_distribution<double> dist(-limit, limit);
    const Eigen::Index off = spec.weight_offset(l);
    const Eigen::Index n = static_cast<Eigen::Index>(spec.fan_in(l)) * spec.fan_out(l);
    for (Eigen::Index i = 0; i < n; ++i) p[off + i] = dist(rng);
  }
  return p;
}

LayerView layer(const NetSpec& spec, const ParamVector& params, int l) {
  return LayerView{
      Eigen::Map<const Eigen::MatrixXd>(params.data() + spec.weight_offset(l),
                                        spec.fan_in(l), spec.fan_out(l)),
      Eigen::Map<const Eigen::RowVectorXd>(params.data() + spec.bias_offset(l),
                                           spec.fan_out(l))};
}

namespace {

void check_params(const NetSpec& spec, const ParamVector& params) {
  if (params.size() != spec.param_count()) {
    throw std::invalid_argument("parameter vector has " +
                                std::to_string(params.size()) +
                                " entries, spec needs " +
                                std::to_string(spec.param_count()));
  }
}

}  // namespace

Eigen::MatrixXd forward_batch(const NetSpec& spec, const ParamVector& params,
                              const Eigen::MatrixXd& X) {
  check_params(spec, params);
  if (X.cols() != spec.input_dim) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  Eigen::MatrixXd h = X;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const auto view = layer(spec, params, l);
    Eigen::MatrixXd z = h * view.weight;
    z.rowwise() += view.bias;
    if (l + 1 < spec.layer_count()) {
      h = ad::fast_tanh(z);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

Eigen::VectorXd forward(const NetSpec& spec, const ParamVector& params,
                        const Eigen::VectorXd& x) {
  if (x.size() != spec.input_dim) {
    throw std::invalid_argument("forward: input dimension mismatch");
  }
  return forward_batch(spec, params, x.transpose()).row(0).transpose();
}

Eigen::MatrixXd input_jacobian(const NetSpec& spec, const ParamVector& params,
                               const Eigen::VectorXd& x) {
  check_params(spec, params);
  if (x.size() != spec.input_dim) {
    throw std::invalid_argument("input_jacobian: input dimension mismatch");
  }
  // Rows of `dh` are tangents along each input axis.
  Eigen::RowVectorXd h = x.transpose();
  Eigen::MatrixXd dh = Eigen::MatrixXd::Identity(spec.input_dim, spec.input_dim);
  for (int l = 0; l < spec.layer_count(); ++l) {
    const auto view = layer(spec, params, l);
    Eigen::RowVectorXd z = h * view.weight + view.bias;
    Eigen::MatrixXd dz = dh * view.weight;
    if (l + 1 < spec.layer_count()) {
      h = ad::fast_tanh(z);
      const Eigen::RowVectorXd slope = 1.0 - h.array().square();
      dh = dz.array().rowwise() * slope.array();
    } else {
      dh = std::move(dz);
    }
  }
  return dh.transpose();
}

DualOutput forward_on_tape(ad::Tape& tape, const NetSpec& spec,
                           const ParamVector& flat, Eigen::Index offset,
                           const ad::Var& X,
                           const std::optional<Eigen::MatrixXd>& dX) {
  if (X.cols() != spec.input_dim) {
    throw std::invalid_argument("forward_on_tape: input dimension mismatch");
  }
  if (dX && (dX->rows() != X.rows() || dX->cols() != X.cols())) {
    throw std::invalid_argument("forward_on_tape: tangent shape mismatch");
  }
  ad::Var h = X;
  std::optional<ad::Var> dh;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const ad::Var W = tape.parameter(flat, offset + spec.weight_offset(l),
                                     spec.fan_in(l), spec.fan_out(l));
    const ad::Var b =
        tape.parameter(flat, offset + spec.bias_offset(l), 1, spec.fan_out(l));
    ad::Var z = ad::add_row(ad::matmul(h, W), b);
    std::optional<ad::Var> dz;
    if (l == 0 && dX) {
      dz = ad::matmul(tape.constant(*dX), W);
    } else if (dh) {
      dz = ad::matmul(*dh, W);
    }
    if (l + 1 < spec.layer_count()) {
      h = ad::tanh(z);
      if (dz) {
        const ad::Var slope = ad::shift(ad::neg(ad::square(h)), 1.0);
        dh = ad::mul(slope, *dz);
      }
    } else {
      h = z;
      dh = dz;
    }
  }
  return DualOutput{h, dh};
}

}  // namespace rdsym::nn
