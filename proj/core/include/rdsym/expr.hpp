#pragma once

// Immutable operator-tree expressions used as symbolic candidates for
// reaction terms.
//
// Text grammar accepted by parse() and produced by format():
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' INTEGER)?
//   primary := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'
//   FUNC    := exp | sin | cos
//
// NAME is resolved against the variable names supplied to parse()
// (default {"c"}); `x<k>` always names variable k. `a/b` is stored as
// a*recip(b) (`1/b` as recip(b)), `x^k` as repeated multiplication and
// `-x` as (-1)*x, so trees only ever contain the operators of OperatorSet.

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rdsym::expr {

enum class UnaryOp : std::uint8_t { kExp, kRecip, kSin, kCos };
enum class BinaryOp : std::uint8_t { kAdd, kSub, kMul };

std::string_view to_string(UnaryOp op);
std::string_view to_string(BinaryOp op);

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  enum class Kind : std::uint8_t { kConstant, kVariable, kUnary, kBinary };
  Kind kind = Kind::kConstant;
  double value = 0.0;
  int variable = 0;
  UnaryOp unary_op = UnaryOp::kExp;
  BinaryOp binary_op = BinaryOp::kAdd;
  NodePtr lhs;  // child of unary nodes, left child of binary nodes
  NodePtr rhs;
};

class ArityError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t position);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class Expression {
 public:
  Expression();  // Constant(0)
  explicit Expression(NodePtr root);

  static Expression constant(double value);
  static Expression variable(int index);
  static Expression unary(UnaryOp op, const Expression& child);
  static Expression binary(BinaryOp op, const Expression& lhs,
                           const Expression& rhs);

  const Node& root() const { return *root_; }
  const NodePtr& root_ptr() const { return root_; }

  int size() const;       // node count
  int depth() const;
  int max_variable() const;  // -1 when the tree has no variables

  // Preorder-indexed subtree access and replacement.
  Expression subtree(int index) const;
  Expression replace_subtree(int index, const Expression& replacement) const;

  // Constants in preorder.
  std::vector<double> constants() const;
  Expression with_constants(std::span<const double> values) const;

 private:
  NodePtr root_;
};

Expression operator+(const Expression& a, const Expression& b);
Expression operator-(const Expression& a, const Expression& b);
Expression operator*(const Expression& a, const Expression& b);
Expression exp(const Expression& a);
Expression recip(const Expression& a);

struct OperatorSet {
  struct BinaryEntry {
    BinaryOp op;
    int cost;
  };
  struct UnaryEntry {
    UnaryOp op;
    int cost;
  };
  std::vector<BinaryEntry> binary{{BinaryOp::kAdd, 1},
                                  {BinaryOp::kSub, 1},
                                  {BinaryOp::kMul, 1}};
  std::vector<UnaryEntry> unary{{UnaryOp::kExp, 3}, {UnaryOp::kRecip, 3}};
  int variable_cost = 1;
  int constant_cost = 1;

  // Binary {+,-,*}, unary {exp, 1/x} at cost 3.
  static OperatorSet reaction_default();
  // Binary {+,*}, unary {exp, 1/x, sin, cos} at cost 3.
  static OperatorSet with_trig();

  int cost(UnaryOp op) const;   // throws std::invalid_argument if absent
  int cost(BinaryOp op) const;
  bool has(UnaryOp op) const;
  bool has(BinaryOp op) const;
  void validate() const;
};

// Scalar evaluation. Reciprocal of 0 and exp overflow yield non-finite
// values instead of throwing; only an out-of-range variable throws.
double eval(const Expression& e, std::span<const double> x);

// Column-wise evaluation: row r of `inputs` is variable r, one column per
// sample.
Eigen::ArrayXd eval_batch(const Expression& e, const Eigen::MatrixXd& inputs);

int complexity(const Expression& e, const OperatorSet& ops);

Expression simplify(const Expression& e);

std::vector<std::string> default_names();  // {"c"}
std::vector<std::string> ko_names();       // {"t", "u1", "u2", "u3"}

std::string format(const Expression& e,
                   const std::vector<std::string>& names = default_names());
Expression parse(std::string_view text,
                 const std::vector<std::string>& names = default_names());

bool structurally_equal(const Expression& a, const Expression& b);

}  // namespace rdsym::expr
