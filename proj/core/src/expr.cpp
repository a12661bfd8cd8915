#include "rdsym/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

namespace rdsym::expr {

namespace {

NodePtr make_constant(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::kConstant;
  n->value = v;
  return n;
}

NodePtr make_variable(int index) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::kVariable;
  n->variable = index;
  return n;
}

NodePtr make_unary(UnaryOp op, NodePtr child) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::kUnary;
  n->unary_op = op;
  n->lhs = std::move(child);
  return n;
}

NodePtr make_binary(BinaryOp op, NodePtr lhs, NodePtr rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Node::Kind::kBinary;
  n->binary_op = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

double apply(UnaryOp op, double a) {
  switch (op) {
    case UnaryOp::kExp: return std::exp(a);
    case UnaryOp::kRecip: return 1.0 / a;
    case UnaryOp::kSin: return std::sin(a);
    case UnaryOp::kCos: return std::cos(a);
  }
  return std::nan("");
}

double apply(BinaryOp op, double a, double b) {
  switch (op) {
    case BinaryOp::kAdd: return a + b;
    case BinaryOp::kSub: return a - b;
    case BinaryOp::kMul: return a * b;
  }
  return std::nan("");
}

void collect_preorder(const NodePtr& n, std::vector<const NodePtr*>& out,
                      const NodePtr* slot) {
  out.push_back(slot);
  if (n->lhs) collect_preorder(n->lhs, out, &n->lhs);
  if (n->rhs) collect_preorder(n->rhs, out, &n->rhs);
}

NodePtr replace_rec(const NodePtr& n, int& counter, int target,
                    const NodePtr& replacement) {
  if (counter == target) {
    ++counter;
    return replacement;
  }
  ++counter;
  switch (n->kind) {
    case Node::Kind::kConstant:
    case Node::Kind::kVariable:
      return n;
    case Node::Kind::kUnary: {
      auto c = replace_rec(n->lhs, counter, target, replacement);
      return c == n->lhs ? n : make_unary(n->unary_op, c);
    }
    case Node::Kind::kBinary: {
      auto l = replace_rec(n->lhs, counter, target, replacement);
      auto r = replace_rec(n->rhs, counter, target, replacement);
      return (l == n->lhs && r == n->rhs) ? n
                                          : make_binary(n->binary_op, l, r);
    }
  }
  return n;
}

NodePtr with_constants_rec(const NodePtr& n, std::span<const double> values,
                           std::size_t& pos) {
  switch (n->kind) {
    case Node::Kind::kConstant:
      if (pos >= values.size()) {
        throw std::invalid_argument("with_constants: too few values");
      }
      return make_constant(values[pos++]);
    case Node::Kind::kVariable:
      return n;
    case Node::Kind::kUnary:
      return make_unary(n->unary_op, with_constants_rec(n->lhs, values, pos));
    case Node::Kind::kBinary: {
      auto l = with_constants_rec(n->lhs, values, pos);
      auto r = with_constants_rec(n->rhs, values, pos);
      return make_binary(n->binary_op, l, r);
    }
  }
  return n;
}

bool is_const(const NodePtr& n, double v) {
  return n->kind == Node::Kind::kConstant && n->value == v;
}

bool is_const(const NodePtr& n) { return n->kind == Node::Kind::kConstant; }

NodePtr simplify_rec(const NodePtr& n) {
  switch (n->kind) {
    case Node::Kind::kConstant:
    case Node::Kind::kVariable:
      return n;
    case Node::Kind::kUnary: {
      auto c = simplify_rec(n->lhs);
      if (is_const(c)) {
        const double v = apply(n->unary_op, c->value);
        if (std::isfinite(v)) return make_constant(v);
      }
      return c == n->lhs ? n : make_unary(n->unary_op, c);
    }
    case Node::Kind::kBinary: {
      auto l = simplify_rec(n->lhs);
      auto r = simplify_rec(n->rhs);
      const BinaryOp op = n->binary_op;
      if (is_const(l) && is_const(r)) {
        const double v = apply(op, l->value, r->value);
        if (std::isfinite(v)) return make_constant(v);
      }
      switch (op) {
        case BinaryOp::kAdd:
          if (is_const(r, 0.0)) return l;
          if (is_const(l, 0.0)) return r;
          // k1 + (k2 + x) and k1 + (x + k2)
          if (is_const(l) && r->kind == Node::Kind::kBinary &&
              r->binary_op == BinaryOp::kAdd) {
            if (is_const(r->lhs)) {
              return simplify_rec(make_binary(
                  op, make_constant(l->value + r->lhs->value), r->rhs));
            }
            if (is_const(r->rhs)) {
              return simplify_rec(make_binary(
                  op, make_constant(l->value + r->rhs->value), r->lhs));
            }
          }
          break;
        case BinaryOp::kSub:
          if (is_const(r, 0.0)) return l;
          break;
        case BinaryOp::kMul:
          if (is_const(r, 1.0)) return l;
          if (is_const(l, 1.0)) return r;
          if (is_const(l, 0.0) || is_const(r, 0.0)) return make_constant(0.0);
          // k1 * (k2 * x) and k1 * (x * k2)
          if (is_const(l) && r->kind == Node::Kind::kBinary &&
              r->binary_op == BinaryOp::kMul) {
            if (is_const(r->lhs)) {
              return simplify_rec(make_binary(
                  op, make_constant(l->value * r->lhs->value), r->rhs));
            }
            if (is_const(r->rhs)) {
              return simplify_rec(make_binary(
                  op, make_constant(l->value * r->rhs->value), r->lhs));
            }
          }
          break;
      }
      return (l == n->lhs && r == n->rhs) ? n : make_binary(op, l, r);
    }
  }
  return n;
}

// ---------------------------------------------------------------- format

constexpr int kPrecAdd = 1;
constexpr int kPrecMul = 2;
constexpr int kPrecPow = 3;
constexpr int kPrecAtom = 4;

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

// Returns the exponent when `n` is a pure product of one variable.
int power_of_variable(const NodePtr& n, int& var) {
  if (n->kind == Node::Kind::kVariable) {
    if (var < 0) var = n->variable;
    return n->variable == var ? 1 : 0;
  }
  if (n->kind == Node::Kind::kBinary && n->binary_op == BinaryOp::kMul) {
    const int a = power_of_variable(n->lhs, var);
    if (a == 0) return 0;
    const int b = power_of_variable(n->rhs, var);
    if (b == 0) return 0;
    return a + b;
  }
  return 0;
}

struct Formatted {
  std::string text;
  int prec;
};

class Formatter {
 public:
  explicit Formatter(const std::vector<std::string>& names) : names_(names) {}

  Formatted run(const NodePtr& n) const {
    switch (n->kind) {
      case Node::Kind::kConstant: {
        const bool negative = std::signbit(n->value);
        return {format_number(n->value), negative ? kPrecMul : kPrecAtom};
      }
      case Node::Kind::kVariable:
        return {name(n->variable), kPrecAtom};
      case Node::Kind::kUnary: {
        if (n->unary_op == UnaryOp::kRecip) {
          return {"1/" + wrap(run(n->lhs), kPrecPow), kPrecMul};
        }
        return {std::string(to_string(n->unary_op)) + "(" + run(n->lhs).text +
                    ")",
                kPrecAtom};
      }
      case Node::Kind::kBinary:
        return binary(n);
    }
    return {"?", kPrecAtom};
  }

 private:
  std::string name(int index) const {
    if (index >= 0 && index < static_cast<int>(names_.size())) {
      return names_[index];
    }
    return "x" + std::to_string(index);
  }

  static std::string wrap(const Formatted& f, int min_prec) {
    return f.prec < min_prec ? "(" + f.text + ")" : f.text;
  }

  Formatted binary(const NodePtr& n) const {
    switch (n->binary_op) {
      case BinaryOp::kAdd: {
        auto l = run(n->lhs), r = run(n->rhs);
        return {wrap(l, kPrecAdd) + " + " + wrap(r, kPrecMul), kPrecAdd};
      }
      case BinaryOp::kSub: {
        auto l = run(n->lhs), r = run(n->rhs);
        return {wrap(l, kPrecAdd) + " - " + wrap(r, kPrecMul), kPrecAdd};
      }
      case BinaryOp::kMul: {
        int var = -1;
        const int k = power_of_variable(n, var);
        if (k >= 2) return {name(var) + "^" + std::to_string(k), kPrecPow};
        if (is_const(n->lhs, -1.0)) {
          return {"-" + wrap(run(n->rhs), kPrecPow), kPrecMul};
        }
        if (n->rhs->kind == Node::Kind::kUnary &&
            n->rhs->unary_op == UnaryOp::kRecip) {
          auto l = run(n->lhs);
          auto d = run(n->rhs->lhs);
          return {wrap(l, kPrecMul) + "/" + wrap(d, kPrecPow), kPrecMul};
        }
        auto l = run(n->lhs), r = run(n->rhs);
        return {wrap(l, kPrecMul) + "*" + wrap(r, kPrecPow), kPrecMul};
      }
    }
    return {"?", kPrecAtom};
  }

  const std::vector<std::string>& names_;
};

// ----------------------------------------------------------------- parse

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& names)
      : text_(text), names_(names) {}

  NodePtr run() {
    auto e = expression();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what, pos_);
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n')) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expression() {
    auto lhs = term();
    while (true) {
      if (accept('+')) {
        lhs = make_binary(BinaryOp::kAdd, lhs, term());
      } else if (accept('-')) {
        lhs = make_binary(BinaryOp::kSub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    auto lhs = unary();
    while (true) {
      if (accept('*')) {
        lhs = make_binary(BinaryOp::kMul, lhs, unary());
      } else if (accept('/')) {
        auto d = make_unary(UnaryOp::kRecip, unary());
        lhs = is_const(lhs, 1.0) ? d : make_binary(BinaryOp::kMul, lhs, d);
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) {
      auto operand = unary();
      if (is_const(operand)) return make_constant(-operand->value);
      return make_binary(BinaryOp::kMul, make_constant(-1.0), operand);
    }
    return power();
  }

  NodePtr power() {
    auto base = primary();
    if (!accept('^')) return base;
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
    if (start == pos_) fail("expected non-negative integer exponent");
    int k = 0;
    std::from_chars(text_.data() + start, text_.data() + pos_, k);
    if (k == 0) return make_constant(1.0);
    NodePtr out = base;
    for (int i = 1; i < k; ++i) out = make_binary(BinaryOp::kMul, out, base);
    return out;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char ch = text_[pos_];
    if (ch == '(') {
      ++pos_;
      auto e = expression();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
      return number();
    }
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
              text_[pos_] == '_')) {
        ++pos_;
      }
      const std::string_view ident = text_.substr(start, pos_ - start);
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == '(') {
        UnaryOp op;
        if (ident == "exp") {
          op = UnaryOp::kExp;
        } else if (ident == "sin") {
          op = UnaryOp::kSin;
        } else if (ident == "cos") {
          op = UnaryOp::kCos;
        } else if (ident == "recip") {
          op = UnaryOp::kRecip;
        } else {
          pos_ = start;
          fail("unknown function '" + std::string(ident) + "'");
        }
        ++pos_;
        auto arg = expression();
        if (!accept(')')) fail("expected ')'");
        return make_unary(op, arg);
      }
      for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == ident) return make_variable(static_cast<int>(i));
      }
      if (ident.size() > 1 && ident[0] == 'x') {
        int k = 0;
        auto [p, ec] = std::from_chars(ident.data() + 1,
                                       ident.data() + ident.size(), k);
        if (ec == std::errc() && p == ident.data() + ident.size()) {
          return make_variable(k);
        }
      }
      pos_ = start;
      fail("unknown variable '" + std::string(ident) + "'");
    }
    fail(std::string("unexpected character '") + ch + "'");
  }

  NodePtr number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() &&
             std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
      }
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
        ++pos_;
      }
      digits();
    }
    double v = 0.0;
    auto [p, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc() || p != text_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return make_constant(v);
  }

  std::string_view text_;
  const std::vector<std::string>& names_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(UnaryOp op) {
  switch (op) {
    case UnaryOp::kExp: return "exp";
    case UnaryOp::kRecip: return "recip";
    case UnaryOp::kSin: return "sin";
    case UnaryOp::kCos: return "cos";
  }
  return "?";
}

std::string_view to_string(BinaryOp op) {
  switch (op) {
    case BinaryOp::kAdd: return "+";
    case BinaryOp::kSub: return "-";
    case BinaryOp::kMul: return "*";
  }
  return "?";
}

ParseError::ParseError(const std::string& message, std::size_t position)
    : std::runtime_error("parse error at position " + std::to_string(position) +
                         ": " + message),
      position_(position) {}

Expression::Expression() : root_(make_constant(0.0)) {}
Expression::Expression(NodePtr root) : root_(std::move(root)) {
  if (!root_) throw std::invalid_argument("Expression: null root");
}

Expression Expression::constant(double value) {
  return Expression(make_constant(value));
}
Expression Expression::variable(int index) {
  if (index < 0) throw ArityError("negative variable index");
  return Expression(make_variable(index));
}
Expression Expression::unary(UnaryOp op, const Expression& child) {
  return Expression(make_unary(op, child.root_));
}
Expression Expression::binary(BinaryOp op, const Expression& lhs,
                              const Expression& rhs) {
  return Expression(make_binary(op, lhs.root_, rhs.root_));
}

int Expression::size() const {
  std::function<int(const NodePtr&)> count = [&](const NodePtr& n) {
    return 1 + (n->lhs ? count(n->lhs) : 0) + (n->rhs ? count(n->rhs) : 0);
  };
  return count(root_);
}

int Expression::depth() const {
  std::function<int(const NodePtr&)> d = [&](const NodePtr& n) {
    return 1 + std::max(n->lhs ? d(n->lhs) : 0, n->rhs ? d(n->rhs) : 0);
  };
  return d(root_);
}

int Expression::max_variable() const {
  std::function<int(const NodePtr&)> m = [&](const NodePtr& n) {
    int v = n->kind == Node::Kind::kVariable ? n->variable : -1;
    if (n->lhs) v = std::max(v, m(n->lhs));
    if (n->rhs) v = std::max(v, m(n->rhs));
    return v;
  };
  return m(root_);
}

Expression Expression::subtree(int index) const {
  std::vector<const NodePtr*> nodes;
  collect_preorder(root_, nodes, &root_);
  if (index < 0 || index >= static_cast<int>(nodes.size())) {
    throw std::out_of_range("subtree index");
  }
  return Expression(*nodes[index]);
}

Expression Expression::replace_subtree(int index,
                                       const Expression& replacement) const {
  int counter = 0;
  return Expression(replace_rec(root_, counter, index, replacement.root_));
}

std::vector<double> Expression::constants() const {
  std::vector<double> out;
  std::function<void(const NodePtr&)> walk = [&](const NodePtr& n) {
    if (n->kind == Node::Kind::kConstant) out.push_back(n->value);
    if (n->lhs) walk(n->lhs);
    if (n->rhs) walk(n->rhs);
  };
  walk(root_);
  return out;
}

Expression Expression::with_constants(std::span<const double> values) const {
  std::size_t pos = 0;
  auto root = with_constants_rec(root_, values, pos);
  if (pos != values.size()) {
    throw std::invalid_argument("with_constants: too many values");
  }
  return Expression(root);
}

Expression operator+(const Expression& a, const Expression& b) {
  return Expression::binary(BinaryOp::kAdd, a, b);
}
Expression operator-(const Expression& a, const Expression& b) {
  return Expression::binary(BinaryOp::kSub, a, b);
}
Expression operator*(const Expression& a, const Expression& b) {
  return Expression::binary(BinaryOp::kMul, a, b);
}
Expression exp(const Expression& a) {
  return Expression::unary(UnaryOp::kExp, a);
}
Expression recip(const Expression& a) {
  return Expression::unary(UnaryOp::kRecip, a);
}

OperatorSet OperatorSet::reaction_default() { return OperatorSet{}; }

OperatorSet OperatorSet::with_trig() {
  OperatorSet ops;
  ops.binary = {{BinaryOp::kAdd, 1}, {BinaryOp::kMul, 1}};
  ops.unary = {{UnaryOp::kExp, 3},
               {UnaryOp::kRecip, 3},
               {UnaryOp::kSin, 3},
               {UnaryOp::kCos, 3}};
  return ops;
}

int OperatorSet::cost(UnaryOp op) const {
  for (const auto& u : unary) {
    if (u.op == op) return u.cost;
  }
  throw std::invalid_argument("operator set lacks unary op " +
                              std::string(to_string(op)));
}

int OperatorSet::cost(BinaryOp op) const {
  for (const auto& b : binary) {
    if (b.op == op) return b.cost;
  }
  throw std::invalid_argument("operator set lacks binary op " +
                              std::string(to_string(op)));
}

bool OperatorSet::has(UnaryOp op) const {
  return std::any_of(unary.begin(), unary.end(),
                     [op](const UnaryEntry& u) { return u.op == op; });
}

bool OperatorSet::has(BinaryOp op) const {
  return std::any_of(binary.begin(), binary.end(),
                     [op](const BinaryEntry& b) { return b.op == op; });
}

void OperatorSet::validate() const {
  if (variable_cost < 1 || constant_cost < 1) {
    throw std::invalid_argument("complexity costs must be positive integers");
  }
  for (const auto& u : unary) {
    if (u.cost < 1) throw std::invalid_argument("unary cost must be >= 1");
  }
  for (const auto& b : binary) {
    if (b.cost < 1) throw std::invalid_argument("binary cost must be >= 1");
  }
  if (binary.empty()) throw std::invalid_argument("no binary operators");
}

double eval(const Expression& e, std::span<const double> x) {
  std::function<double(const Node&)> rec = [&](const Node& n) -> double {
    switch (n.kind) {
      case Node::Kind::kConstant:
        return n.value;
      case Node::Kind::kVariable:
        if (n.variable >= static_cast<int>(x.size())) {
          throw ArityError("variable index " + std::to_string(n.variable) +
                           " out of range for input of size " +
                           std::to_string(x.size()));
        }
        return x[n.variable];
      case Node::Kind::kUnary:
        return apply(n.unary_op, rec(*n.lhs));
      case Node::Kind::kBinary:
        return apply(n.binary_op, rec(*n.lhs), rec(*n.rhs));
    }
    return std::nan("");
  };
  return rec(e.root());
}

Eigen::ArrayXd eval_batch(const Expression& e, const Eigen::MatrixXd& inputs) {
  const Eigen::Index n = inputs.cols();
  std::function<Eigen::ArrayXd(const Node&)> rec =
      [&](const Node& node) -> Eigen::ArrayXd {
    switch (node.kind) {
      case Node::Kind::kConstant:
        return Eigen::ArrayXd::Constant(n, node.value);
      case Node::Kind::kVariable:
        if (node.variable >= inputs.rows()) {
          throw ArityError("variable index " + std::to_string(node.variable) +
                           " out of range");
        }
        return inputs.row(node.variable).transpose().array();
      case Node::Kind::kUnary: {
        Eigen::ArrayXd a = rec(*node.lhs);
        switch (node.unary_op) {
          case UnaryOp::kExp: return a.exp();
          case UnaryOp::kRecip: return a.inverse();
          case UnaryOp::kSin: return a.sin();
          case UnaryOp::kCos: return a.cos();
        }
        return a;
      }
      case Node::Kind::kBinary: {
        Eigen::ArrayXd a = rec(*node.lhs);
        Eigen::ArrayXd b = rec(*node.rhs);
        switch (node.binary_op) {
          case BinaryOp::kAdd: return a + b;
          case BinaryOp::kSub: return a - b;
          case BinaryOp::kMul: return a * b;
        }
        return a;
      }
    }
    return Eigen::ArrayXd::Constant(n, std::nan(""));
  };
  return rec(e.root());
}

int complexity(const Expression& e, const OperatorSet& ops) {
  std::function<int(const Node&)> rec = [&](const Node& n) -> int {
    switch (n.kind) {
      case Node::Kind::kConstant: return ops.constant_cost;
      case Node::Kind::kVariable: return ops.variable_cost;
      case Node::Kind::kUnary: return ops.cost(n.unary_op) + rec(*n.lhs);
      case Node::Kind::kBinary:
        return ops.cost(n.binary_op) + rec(*n.lhs) + rec(*n.rhs);
    }
    return 0;
  };
  return rec(e.root());
}

Expression simplify(const Expression& e) {
  return Expression(simplify_rec(e.root_ptr()));
}

std::vector<std::string> default_names() { return {"c"}; }
std::vector<std::string> ko_names() { return {"t", "u1", "u2", "u3"}; }

std::string format(const Expression& e, const std::vector<std::string>& names) {
  return Formatter(names).run(e.root_ptr()).text;
}

Expression parse(std::string_view text, const std::vector<std::string>& names) {
  return Expression(Parser(text, names).run());
}

bool structurally_equal(const Expression& a, const Expression& b) {
  std::function<bool(const Node&, const Node&)> eq = [&](const Node& x,
                                                         const Node& y) {
    if (x.kind != y.kind) return false;
    switch (x.kind) {
      case Node::Kind::kConstant: return x.value == y.value;
      case Node::Kind::kVariable: return x.variable == y.variable;
      case Node::Kind::kUnary:
        return x.unary_op == y.unary_op && eq(*x.lhs, *y.lhs);
      case Node::Kind::kBinary:
        return x.binary_op == y.binary_op && eq(*x.lhs, *y.lhs) &&
               eq(*x.rhs, *y.rhs);
    }
    return false;
  };
  return eq(a.root(), b.root());
}

}  // namespace rdsym::expr
