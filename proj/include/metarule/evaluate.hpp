#pragma once

#include <concepts>
#include <cstddef>
#include <utility>

#include "metarule/expression.hpp"
#include "metarule/random.hpp"
#include "metarule/types.hpp"

namespace metarule {

// Operand matrices an update rule reads. All matrices are Ps x D; best and
// worst are single rows broadcast to every individual.
struct OperandView {
  const Matrix& positions;
  const Matrix& personal_best;
  const Matrix& velocities;
  const RowVector& best;
  const RowVector& worst;
};

// Supplies the population index used for one row of one RandomPeer
// occurrence. Draws happen in traversal order, rows ascending.
template <class S>
concept PeerSource = requires(S s, std::size_t n) {
  { s(n) } -> std::convertible_to<std::size_t>;
};

struct RngPeers {
  Rng& rng;
  std::size_t operator()(std::size_t n) const { return uniform_index(rng, n); }
};

namespace detail {

struct Value {
  bool scalar = false;
  double s = 0.0;
  Matrix m;
};

template <PeerSource Peers>
Value eval_node(const UpdateRule& rule, std::size_t i, const OperandView& ops, Peers& peers) {
  const auto n = static_cast<Eigen::Index>(ops.positions.rows());
  switch (rule.tokens()[i]) {
    case Token::Const:
      return {true, rule.constant_at(i).value, {}};
    case Token::X:
      return {false, 0.0, ops.positions};
    case Token::BestGlobal:
      return {false, 0.0, ops.best.replicate(n, 1)};
    case Token::WorstGlobal:
      return {false, 0.0, ops.worst.replicate(n, 1)};
    case Token::BestPersonal:
      return {false, 0.0, ops.personal_best};
    case Token::DeltaX:
      return {false, 0.0, ops.velocities};
    case Token::RandomPeer: {
      Value v{false, 0.0, Matrix(n, ops.positions.cols())};
      for (Eigen::Index r = 0; r < n; ++r) {
        const auto peer = static_cast<Eigen::Index>(peers(static_cast<std::size_t>(n)));
        v.m.row(r) = ops.positions.row(peer);
      }
      return v;
    }
    case Token::Plus:
    case Token::Minus: {
      const bool plus = rule.tokens()[i] == Token::Plus;
      Value a = eval_node(rule, rule.left(i), ops, peers);
      Value b = eval_node(rule, rule.right(i), ops, peers);
      if (a.scalar && b.scalar) return {true, plus ? a.s + b.s : a.s - b.s, {}};
      if (a.scalar) {
        if (plus) {
          b.m.array() = a.s + b.m.array();
        } else {
          b.m.array() = a.s - b.m.array();
        }
        return b;
      }
      if (b.scalar) {
        if (plus) {
          a.m.array() += b.s;
        } else {
          a.m.array() -= b.s;
        }
        return a;
      }
      if (plus) {
        a.m += b.m;
      } else {
        a.m -= b.m;
      }
      return a;
    }
    case Token::Times: {
      Value a = eval_node(rule, rule.left(i), ops, peers);
      Value b = eval_node(rule, rule.right(i), ops, peers);
      if (a.scalar && b.scalar) return {true, a.s * b.s, {}};
      if (a.scalar) {
        b.m *= a.s;
        return b;
      }
      if (b.scalar) {
        a.m *= b.s;
        return a;
      }
      throw GrammarError("product of two non-constant operands");
    }
  }
  throw GrammarError("unknown token");
}

}  // namespace detail

// Displacement matrix tau for every individual. Plus and Minus act
// elementwise; a product scales its non-constant operand.
template <PeerSource Peers>
Matrix evaluate(const UpdateRule& rule, const OperandView& ops, Peers&& peers) {
  if (rule.empty()) throw ContractError("evaluate on an empty rule");
  const auto n = ops.positions.rows();
  const auto d = ops.positions.cols();
  if (ops.personal_best.rows() != n || ops.personal_best.cols() != d || ops.velocities.rows() != n ||
      ops.velocities.cols() != d || ops.best.size() != d || ops.worst.size() != d) {
    throw DimensionError("operand shapes disagree");
  }
  if (n == 0) throw DimensionError("empty population");
  auto& source = peers;
  detail::Value v = detail::eval_node(rule, 0, ops, source);
  if (v.scalar) return Matrix::Constant(n, d, v.s);
  return std::move(v.m);
}

inline Matrix evaluate(const UpdateRule& rule, const OperandView& ops, Rng& rng) {
  return evaluate(rule, ops, RngPeers{rng});
}

}  // namespace metarule
