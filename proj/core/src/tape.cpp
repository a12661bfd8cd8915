#include "rdsym/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace rdsym::ad {

namespace {

void require_same_tape(const Var& a, const Var& b) {
  if (a.tape() != b.tape() || a.tape() == nullptr) {
    throw std::invalid_argument("Var operands belong to different tapes");
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

bool grad_of(const Var& v) { return v.tape()->node(v.id()).needs_grad; }

}  // namespace

Matrix fast_tanh(const Matrix& x) {
  const Eigen::ArrayXXd e = (2.0 * x.array().max(-20.0).min(20.0)).exp();
  return (1.0 - 2.0 / (e + 1.0)).matrix();
}

const Matrix& Var::value() const { return tape_->node(id_).value; }
double Var::scalar() const { return value()(0, 0); }

Var Tape::push(Matrix value, bool needs_grad,
               std::function<void(Tape&, int)> backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, {}); }

Var Tape::constant(double value) {
  return push(Matrix::Constant(1, 1, value), false, {});
}

Var Tape::parameter(const Vector& flat, Eigen::Index offset, Eigen::Index rows,
                    Eigen::Index cols) {
  if (offset < 0 || offset + rows * cols > flat.size()) {
    throw std::out_of_range("parameter block exceeds flat vector");
  }
  Matrix m = Eigen::Map<const Matrix>(flat.data() + offset, rows, cols);
  Node n;
  n.value = std::move(m);
  n.needs_grad = true;
  n.leaf_offset = offset;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int id, const Matrix& delta) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.adjoint.size() == 0) {
    n.adjoint = delta;
  } else {
    n.adjoint += delta;
  }
}

void Tape::backward(const Var& out, Vector& grad) {
  if (out.tape() != this) throw std::invalid_argument("foreign Var");
  if (out.value().size() != 1) {
    throw std::invalid_argument("backward needs a 1x1 output");
  }
  for (auto& n : nodes_) n.adjoint.resize(0, 0);
  if (!nodes_[out.id()].needs_grad) return;
  nodes_[out.id()].adjoint = Matrix::Ones(1, 1);
  for (int i = out.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.adjoint.size() == 0) continue;
    if (n.leaf_offset >= 0) {
      Eigen::Map<Vector>(grad.data() + n.leaf_offset, n.adjoint.size()) +=
          Eigen::Map<const Vector>(n.adjoint.data(), n.adjoint.size());
    } else if (n.backward) {
      n.backward(*this, i);
    }
  }
}

Var matmul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape");
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() * b.value(), grad_of(a) || grad_of(b),
                [ia, ib](Tape& t, int self) {
                  const Matrix& g = t.node(self).adjoint;
                  if (t.node(ia).needs_grad) {
                    t.accumulate(ia, g * t.node(ib).value.transpose());
                  }
                  if (t.node(ib).needs_grad) {
                    t.accumulate(ib, t.node(ia).value.transpose() * g);
                  }
                });
}

Var matmul(const Var& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: shape");
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(a.value() * b, grad_of(a), [ia, b](Tape& t, int self) {
    t.accumulate(ia, t.node(self).adjoint * b.transpose());
  });
}

Var add(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "add");
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() + b.value(), grad_of(a) || grad_of(b),
                [ia, ib](Tape& t, int self) {
                  const Matrix g = t.node(self).adjoint;
                  t.accumulate(ia, g);
                  t.accumulate(ib, g);
                });
}

Var sub(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "sub");
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() - b.value(), grad_of(a) || grad_of(b),
                [ia, ib](Tape& t, int self) {
                  const Matrix g = t.node(self).adjoint;
                  t.accumulate(ia, g);
                  if (t.node(ib).needs_grad) t.accumulate(ib, -g);
                });
}

Var mul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "mul");
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.push(a.value().cwiseProduct(b.value()), grad_of(a) || grad_of(b),
                [ia, ib](Tape& t, int self) {
                  const Matrix& g = t.node(self).adjoint;
                  if (t.node(ia).needs_grad) {
                    t.accumulate(ia, g.cwiseProduct(t.node(ib).value));
                  }
                  if (t.node(ib).needs_grad) {
                    t.accumulate(ib, g.cwiseProduct(t.node(ia).value));
                  }
                });
}

Var add_row(const Var& a, const Var& row) {
  require_same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw std::invalid_argument("add_row: shape");
  }
  Tape& t = *a.tape();
  const int ia = a.id(), ir = row.id();
  Matrix v = a.value();
  v.rowwise() += row.value().row(0);
  return t.push(std::move(v), grad_of(a) || grad_of(row),
                [ia, ir](Tape& t, int self) {
                  const Matrix g = t.node(self).adjoint;
                  if (t.node(ir).needs_grad) {
                    t.accumulate(ir, g.colwise().sum());
                  }
                  t.accumulate(ia, g);
                });
}

Var add_scalar(const Var& a, const Var& s) {
  require_same_tape(a, s);
  if (s.value().size() != 1) throw std::invalid_argument("add_scalar: shape");
  Tape& t = *a.tape();
  const int ia = a.id(), is = s.id();
  Matrix v = a.value().array() + s.scalar();
  return t.push(std::move(v), grad_of(a) || grad_of(s),
                [ia, is](Tape& t, int self) {
                  const Matrix g = t.node(self).adjoint;
                  if (t.node(is).needs_grad) {
                    t.accumulate(is, Matrix::Constant(1, 1, g.sum()));
                  }
                  t.accumulate(ia, g);
                });
}

Var sub_scalar(const Var& a, const Var& s) {
  require_same_tape(a, s);
  if (s.value().size() != 1) throw std::invalid_argument("sub_scalar: shape");
  Tape& t = *a.tape();
  const int ia = a.id(), is = s.id();
  Matrix v = a.value().array() - s.scalar();
  return t.push(std::move(v), grad_of(a) || grad_of(s),
                [ia, is](Tape& t, int self) {
                  const Matrix g = t.node(self).adjoint;
                  if (t.node(is).needs_grad) {
                    t.accumulate(is, Matrix::Constant(1, 1, -g.sum()));
                  }
                  t.accumulate(ia, g);
                });
}

Var mul_scalar(const Var& a, const Var& s) {
  require_same_tape(a, s);
  if (s.value().size() != 1) throw std::invalid_argument("mul_scalar: shape");
  Tape& t = *a.tape();
  const int ia = a.id(), is = s.id();
  return t.push(a.value() * s.scalar(), grad_of(a) || grad_of(s),
                [ia, is](Tape& t, int self) {
                  const Matrix& g = t.node(self).adjoint;
                  if (t.node(is).needs_grad) {
                    t.accumulate(is, Matrix::Constant(
                                         1, 1,
                                         g.cwiseProduct(t.node(ia).value).sum()));
                  }
                  if (t.node(ia).needs_grad) {
                    t.accumulate(ia, g * t.node(is).value(0, 0));
                  }
                });
}

Var scale(const Var& a, double k) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(a.value() * k, grad_of(a), [ia, k](Tape& t, int self) {
    t.accumulate(ia, t.node(self).adjoint * k);
  });
}

Var shift(const Var& a, double k) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Matrix v = a.value().array() + k;
  return t.push(std::move(v), grad_of(a), [ia](Tape& t, int self) {
    const Matrix g = t.node(self).adjoint;
    t.accumulate(ia, g);
  });
}

Var mul_const(const Var& a, const Matrix& k) {
  if (k.rows() != a.rows() || k.cols() != a.cols()) {
    throw std::invalid_argument("mul_const: shape");
  }
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(a.value().cwiseProduct(k), grad_of(a),
                [ia, k](Tape& t, int self) {
                  t.accumulate(ia, t.node(self).adjoint.cwiseProduct(k));
                });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var tanh(const Var& a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Matrix v = fast_tanh(a.value());
  return t.push(std::move(v), grad_of(a), [ia](Tape& t, int self) {
    const auto& y = t.node(self).value.array();
    t.accumulate(ia, (t.node(self).adjoint.array() * (1.0 - y.square())).matrix());
  });
}

Var exp(const Var& a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Matrix v = a.value().array().exp();
  return t.push(std::move(v), grad_of(a), [ia](Tape& t, int self) {
    t.accumulate(ia, t.node(self).adjoint.cwiseProduct(t.node(self).value));
  });
}

Var logistic(const Var& a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Matrix v = (1.0 + (-a.value().array()).exp()).inverse();
  return t.push(std::move(v), grad_of(a), [ia](Tape& t, int self) {
    const auto& y = t.node(self).value.array();
    t.accumulate(ia, (t.node(self).adjoint.array() * y * (1.0 - y)).matrix());
  });
}

Var square(const Var& a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Matrix v = a.value().array().square();
  return t.push(std::move(v), grad_of(a), [ia](Tape& t, int self) {
    t.accumulate(ia, (2.0 * t.node(self).adjoint.array() *
                      t.node(ia).value.array())
                         .matrix());
  });
}

Var recip(const Var& a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Matrix v = a.value().array().inverse();
  return t.push(std::move(v), grad_of(a), [ia](Tape& t, int self) {
    const auto& y = t.node(self).value.array();
    t.accumulate(ia, (-t.node(self).adjoint.array() * y.square()).matrix());
  });
}

Var relu(const Var& a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Matrix v = a.value().cwiseMax(0.0);
  return t.push(std::move(v), grad_of(a), [ia](Tape& t, int self) {
    const auto& x = t.node(ia).value.array();
    t.accumulate(ia, (t.node(self).adjoint.array() *
                      (x > 0.0).cast<double>())
                         .matrix());
  });
}

Var sum(const Var& a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return t.push(Matrix::Constant(1, 1, a.value().sum()), grad_of(a),
                [ia, r, c](Tape& t, int self) {
                  t.accumulate(ia, Matrix::Constant(r, c,
                                                    t.node(self).adjoint(0, 0)));
                });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var entry(const Var& a, Eigen::Index r, Eigen::Index c) {
  if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols()) {
    throw std::out_of_range("entry");
  }
  Tape& t = *a.tape();
  const int ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return t.push(Matrix::Constant(1, 1, a.value()(r, c)), grad_of(a),
                [ia, r, c, rows, cols](Tape& t, int self) {
                  Matrix g = Matrix::Zero(rows, cols);
                  g(r, c) = t.node(self).adjoint(0, 0);
                  t.accumulate(ia, g);
                });
}

Var column(const Var& a, Eigen::Index c) {
  if (c < 0 || c >= a.cols()) throw std::out_of_range("column");
  Tape& t = *a.tape();
  const int ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return t.push(a.value().col(c), grad_of(a),
                [ia, c, rows, cols](Tape& t, int self) {
                  Matrix g = Matrix::Zero(rows, cols);
                  g.col(c) = t.node(self).adjoint;
                  t.accumulate(ia, g);
                });
}

Var hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("hcat: empty");
  Tape& t = *parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  bool needs = false;
  for (const auto& p : parts) {
    require_same_tape(parts.front(), p);
    if (p.rows() != rows) throw std::invalid_argument("hcat: rows");
    cols += p.cols();
    needs = needs || grad_of(p);
  }
  Matrix v(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> layout;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    layout.emplace_back(p.id(), p.cols());
    at += p.cols();
  }
  return t.push(std::move(v), needs, [layout](Tape& t, int self) {
    const Matrix g = t.node(self).adjoint;
    Eigen::Index at = 0;
    for (const auto& [id, w] : layout) {
      if (t.node(id).needs_grad) t.accumulate(id, g.middleCols(at, w));
      at += w;
    }
  });
}

Var vcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("vcat: empty");
  Tape& t = *parts.front().tape();
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  bool needs = false;
  for (const auto& p : parts) {
    require_same_tape(parts.front(), p);
    if (p.cols() != cols) throw std::invalid_argument("vcat: cols");
    rows += p.rows();
    needs = needs || grad_of(p);
  }
  Matrix v(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> layout;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    layout.emplace_back(p.id(), p.rows());
    at += p.rows();
  }
  return t.push(std::move(v), needs, [layout](Tape& t, int self) {
    const Matrix g = t.node(self).adjoint;
    Eigen::Index at = 0;
    for (const auto& [id, h] : layout) {
      if (t.node(id).needs_grad) t.accumulate(id, g.middleRows(at, h));
      at += h;
    }
  });
}

Var block_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw std::out_of_range("block_rows");
  }
  Tape& t = *a.tape();
  const int ia = a.id();
  const Eigen::Index rows = a.rows(), cols = a.cols();
  return t.push(a.value().middleRows(start, count), grad_of(a),
                [ia, start, count, rows, cols](Tape& t, int self) {
                  Matrix g = Matrix::Zero(rows, cols);
                  g.middleRows(start, count) = t.node(self).adjoint;
                  t.accumulate(ia, g);
                });
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) {
    throw std::invalid_argument("reshape: size");
  }
  Tape& t = *a.tape();
  const int ia = a.id();
  const Eigen::Index r0 = a.rows(), c0 = a.cols();
  Matrix v = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return t.push(std::move(v), grad_of(a), [ia, r0, c0](Tape& t, int self) {
    const Matrix& g = t.node(self).adjoint;
    t.accumulate(ia, Eigen::Map<const Matrix>(g.data(), r0, c0));
  });
}

}  // namespace rdsym::ad
