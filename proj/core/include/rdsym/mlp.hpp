#pragma once

// Fully-connected tanh networks.
//
// Parameter layout (ParamVector): for each layer l = 0..L-1 in order,
// the weight matrix W_l (fan_in x fan_out, column-major) followed by the
// bias b_l (fan_out). Inputs are row-batched: X is B x input_dim and a
// layer computes X W_l + b_l. Hidden layers apply tanh; the output layer
// is linear.

#include "rdsym/tape.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

namespace rdsym::nn {

using ParamVector = Eigen::VectorXd;

struct NetSpec {
  int input_dim = 1;
  int output_dim = 1;
  std::vector<int> hidden_widths{50, 50};

  void validate() const;
  int layer_count() const { return static_cast<int>(hidden_widths.size()) + 1; }
  int fan_in(int layer) const;
  int fan_out(int layer) const;
  Eigen::Index param_count() const;
  Eigen::Index weight_offset(int layer) const;
  Eigen::Index bias_offset(int layer) const;

  bool operator==(const NetSpec&) const = default;
};

// Glorot-uniform weights, zero biases.
ParamVector init_params(const NetSpec& spec, std::uint64_t seed);

struct LayerView {
  Eigen::Map<const Eigen::MatrixXd> weight;
  Eigen::Map<const Eigen::RowVectorXd> bias;
};
LayerView layer(const NetSpec& spec, const ParamVector& params, int l);

// Plain (no tape) evaluation. x is one input; rows of X are a batch.
Eigen::VectorXd forward(const NetSpec& spec, const ParamVector& params,
                        const Eigen::VectorXd& x);
Eigen::MatrixXd forward_batch(const NetSpec& spec, const ParamVector& params,
                              const Eigen::MatrixXd& X);

// d output / d input at x (output_dim x input_dim), forward mode.
Eigen::MatrixXd input_jacobian(const NetSpec& spec, const ParamVector& params,
                               const Eigen::VectorXd& x);

// Network output and its directional derivative along a fixed input
// tangent, both as tape values. `flat` holds all trainable parameters and
// the network's block starts at `offset`.
struct DualOutput {
  ad::Var value;
  std::optional<ad::Var> tangent;
};

DualOutput forward_on_tape(ad::Tape& tape, const NetSpec& spec,
                           const ParamVector& flat, Eigen::Index offset,
                           const ad::Var& X,
                           const std::optional<Eigen::MatrixXd>& dX = {});

}  // namespace rdsym::nn
