#pragma once

// Reverse-mode automatic differentiation over dense matrices.
//
// A Tape records matrix-valued operations; backward() propagates adjoints
// from a scalar (1x1) output to every parameter leaf, accumulating into a
// flat gradient vector at the leaf's offset. Forward-mode tangents (e.g.
// d/dt of a network) are ordinary tape values built from the same
// primitives, so gradients through input derivatives come for free.

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace rdsym::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Tape;

// Elementwise tanh through the vectorized exp (absolute error ~1e-16).
Matrix fast_tanh(const Matrix& x);

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  double scalar() const;  // value()(0, 0)
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(double value);
  // Leaf whose gradient lands in grad[offset .. offset + rows*cols), read
  // column-major from `flat`.
  Var parameter(const Vector& flat, Eigen::Index offset, Eigen::Index rows,
                Eigen::Index cols);

  // Seeds d(out)/d(out) = 1 and accumulates parameter gradients into grad
  // (which must already be sized).
  void backward(const Var& out, Vector& grad);

  std::size_t size() const { return nodes_.size(); }

  // Internal API used by the operation helpers.
  struct Node {
    Matrix value;
    Matrix adjoint;
    bool needs_grad = false;
    Eigen::Index leaf_offset = -1;
    std::function<void(Tape&, int)> backward;
  };

  Var push(Matrix value, bool needs_grad,
           std::function<void(Tape&, int)> backward);
  Node& node(int id) { return nodes_[id]; }
  const Node& node(int id) const { return nodes_[id]; }
  // Adds `delta` to the adjoint of `id` when that node needs a gradient.
  void accumulate(int id, const Matrix& delta);

 private:
  std::vector<Node> nodes_;
};

// Elementwise and linear-algebra primitives. Binary elementwise ops need
// equal shapes; *_scalar variants broadcast a 1x1 Var, *_row variants a
// 1xC row across rows.
Var matmul(const Var& a, const Var& b);
Var matmul(const Var& a, const Matrix& b);  // b constant
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_row(const Var& a, const Var& row);
Var add_scalar(const Var& a, const Var& s);
Var mul_scalar(const Var& a, const Var& s);
Var sub_scalar(const Var& a, const Var& s);
Var scale(const Var& a, double k);
Var shift(const Var& a, double k);
Var mul_const(const Var& a, const Matrix& k);  // elementwise with constant
Var neg(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
Var logistic(const Var& a);
Var square(const Var& a);
Var recip(const Var& a);
Var relu(const Var& a);
Var sum(const Var& a);   // 1x1
Var mean(const Var& a);  // 1x1
Var entry(const Var& a, Eigen::Index r, Eigen::Index c);  // 1x1
Var column(const Var& a, Eigen::Index c);
Var hcat(const std::vector<Var>& parts);
Var vcat(const std::vector<Var>& parts);
Var block_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);  // col-major

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

}  // namespace rdsym::ad
