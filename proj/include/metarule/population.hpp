#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "metarule/errors.hpp"
#include "metarule/evaluate.hpp"
#include "metarule/problems.hpp"
#include "metarule/random.hpp"
#include "metarule/types.hpp"

namespace metarule {

struct PopulationState {
  Matrix positions;
  Matrix velocities;
  Vector values;
  Matrix personal_best_pos;
  Vector personal_best_val;
  RowVector best_so_far_pos;
  double best_so_far_val = 0.0;
  RowVector worst_so_far_pos;
  double worst_so_far_val = 0.0;
  Eigen::Index gen_best_index = 0;
  double gen_best_val = 0.0;
  double initial_best_val = 0.0;  // y*(0)
  double initial_value_std = 0.0;
  int stagnation = 0;
  bool improved = false;  // last step beat the previous best-so-far
  int generation = 0;
  int horizon = 0;
  long evaluations = 0;
  Bounds bounds;

  Eigen::Index size() const { return positions.rows(); }
  Eigen::Index dim() const { return positions.cols(); }

  OperandView operands() const {
    return {positions, personal_best_pos, velocities, best_so_far_pos, worst_so_far_pos};
  }
};

namespace detail {

inline double population_std(const Vector& v) {
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().mean());
}

}  // namespace detail

// Starts a population at the given positions (generation 0).
inline PopulationState make_population(const ProblemInstance& problem, Matrix positions, int horizon) {
  if (positions.rows() < 2) throw ContractError("population size must be at least 2");
  if (positions.cols() != problem.dim) throw DimensionError("population dimension does not match the problem");
  if (horizon < 1) throw ContractError("horizon must be positive");
  PopulationState s;
  s.bounds = problem.bounds;
  s.positions = std::move(positions);
  s.velocities = Matrix::Zero(s.positions.rows(), s.positions.cols());
  s.values = problem.evaluate(s.positions);
  s.evaluations = s.positions.rows();
  s.personal_best_pos = s.positions;
  s.personal_best_val = s.values;
  Eigen::Index best = 0;
  Eigen::Index worst = 0;
  s.gen_best_val = s.values.minCoeff(&best);
  s.worst_so_far_val = s.values.maxCoeff(&worst);
  s.gen_best_index = best;
  s.best_so_far_val = s.gen_best_val;
  s.best_so_far_pos = s.positions.row(best);
  s.worst_so_far_pos = s.positions.row(worst);
  s.initial_best_val = s.best_so_far_val;
  s.initial_value_std = detail::population_std(s.values);
  s.horizon = horizon;
  return s;
}

inline Matrix uniform_positions(Eigen::Index n, Eigen::Index d, Bounds b, Rng& rng) {
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = uniform(rng, b.lower, b.upper);
  }
  return m;
}

inline PopulationState init_population(const ProblemInstance& problem, int ps, int horizon, Rng& rng) {
  if (ps < 2) throw ContractError("population size must be at least 2");
  return make_population(problem, uniform_positions(ps, problem.dim, problem.bounds, rng), horizon);
}

// Moves every individual by the rule's displacement, clamps to the box and
// refreshes the trackers. There is no survivor selection.
template <PeerSource Peers>
PopulationState step(PopulationState pop, const UpdateRule& rule, const ProblemInstance& problem, Peers&& peers) {
  if (pop.generation >= pop.horizon) throw ContractError("horizon exhausted");
  const Matrix tau = evaluate(rule, pop.operands(), peers);
  Matrix next = (pop.positions + tau).cwiseMax(pop.bounds.lower).cwiseMin(pop.bounds.upper);
  pop.velocities = next - pop.positions;
  pop.positions = std::move(next);
  pop.values = problem.evaluate(pop.positions);
  pop.evaluations += pop.positions.rows();

  for (Eigen::Index i = 0; i < pop.size(); ++i) {
    if (pop.values[i] < pop.personal_best_val[i]) {
      pop.personal_best_val[i] = pop.values[i];
      pop.personal_best_pos.row(i) = pop.positions.row(i);
    }
  }
  Eigen::Index best = 0;
  Eigen::Index worst = 0;
  pop.gen_best_val = pop.values.minCoeff(&best);
  pop.gen_best_index = best;
  const double gen_worst = pop.values.maxCoeff(&worst);
  pop.improved = pop.gen_best_val < pop.best_so_far_val;
  if (pop.improved) {
    pop.best_so_far_val = pop.gen_best_val;
    pop.best_so_far_pos = pop.positions.row(best);
    pop.stagnation = 0;
  } else {
    ++pop.stagnation;
  }
  if (gen_worst > pop.worst_so_far_val) {
    pop.worst_so_far_val = gen_worst;
    pop.worst_so_far_pos = pop.positions.row(worst);
  }
  ++pop.generation;
  return pop;
}

inline PopulationState step(PopulationState pop, const UpdateRule& rule, const ProblemInstance& problem, Rng& rng) {
  return step(std::move(pop), rule, problem, RngPeers{rng});
}

inline constexpr int kFlaSize = 9;

// Landscape features s1..s9: dispersion (s1-s3), objective statistics
// (s4-s6) and time stamp (s7-s9).
struct FlaState {
  std::array<double, kFlaSize> s{};

  double operator[](std::size_t i) const { return s[i]; }
  double& operator[](std::size_t i) { return s[i]; }
  bool operator==(const FlaState&) const = default;
};

// Objective scale used for s4-s6 within one episode: the spread of the
// initial population's values.
inline double objective_scale(const PopulationState& pop) { return std::max(pop.initial_value_std, 1e-8); }

inline FlaState compute_fla(const PopulationState& pop, double f_scale) {
  const Eigen::Index n = pop.size();
  const Eigen::Index d = pop.dim();
  if (n < 2) throw ContractError("landscape features need at least 2 individuals");
  if (!(f_scale > 0.0)) throw ContractError("f_scale must be positive");
  if (!(pop.bounds.upper > pop.bounds.lower)) throw ContractError("degenerate search box");
  const double diag = pop.bounds.width() * std::sqrt(static_cast<double>(d));

  double pair_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) pair_sum += (pop.positions.row(i) - pop.positions.row(j)).norm();
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const RowVector gen_best = pop.positions.row(pop.gen_best_index);
  double to_gen_best = 0.0;
  double to_best = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    to_gen_best += (pop.positions.row(i) - gen_best).norm();
    to_best += (pop.positions.row(i) - pop.best_so_far_pos).norm();
  }
  const double nn = static_cast<double>(n);
  const double t = pop.horizon;

  FlaState f;
  f[0] = pair_sum / pairs / diag;
  f[1] = to_gen_best / nn / diag;
  f[2] = to_best / nn / diag;
  f[3] = (pop.values.array() - pop.best_so_far_val).mean() / f_scale;
  f[4] = (pop.values.array() - pop.gen_best_val).mean() / f_scale;
  f[5] = detail::population_std(pop.values) / f_scale;
  f[6] = (t - pop.generation) / t;
  f[7] = pop.stagnation / t;
  f[8] = pop.improved ? 1.0 : 0.0;
  return f;
}

}  // namespace metarule
