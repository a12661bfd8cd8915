#pragma once

#include "rdsym/expr.hpp"

#include <random>

namespace rdsym::testing_util {

// Random tree over one variable using the full operator set.
inline expr::Expression random_tree(std::mt19937_64& rng, int depth, int vars = 1) {
  using namespace expr;
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 5);
  switch (pick(rng)) {
    case 0:
      return Expression::constant(std::round(u(rng) * 1000.0) / 1000.0);
    case 1:
      return Expression::variable(std::uniform_int_distribution<int>(0, vars - 1)(rng));
    case 2:
      return Expression::unary(std::uniform_int_distribution<int>(0, 1)(rng) ? UnaryOp::kExp
                                                                             : UnaryOp::kRecip,
                               random_tree(rng, depth - 1, vars));
    default: {
      const BinaryOp ops[] = {BinaryOp::kAdd, BinaryOp::kSub, BinaryOp::kMul};
      const BinaryOp op = ops[std::uniform_int_distribution<int>(0, 2)(rng)];
      auto l = random_tree(rng, depth - 1, vars);
      return Expression::binary(op, l, random_tree(rng, depth - 1, vars));
    }
  }
}

inline bool close_rel(double a, double b, double rel) {
  if (!std::isfinite(a) || !std::isfinite(b)) return true;
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace rdsym::testing_util
