#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "metarule/errors.hpp"
#include "metarule/problems.hpp"
#include "metarule/random.hpp"
#include "metarule/types.hpp"

namespace metarule {

enum class TeacherKind { DE, PSO };

inline std::string_view name_of(TeacherKind k) { return k == TeacherKind::DE ? "de" : "pso"; }

struct DeSettings {
  double f = 0.5;
  double cr = 0.9;
};

struct PsoSettings {
  double w = 0.729;
  double c1 = 1.49445;
  double c2 = 1.49445;
};

struct TeacherState {
  TeacherKind kind = TeacherKind::DE;
  Matrix positions;
  Vector values;
  DeSettings de;
  PsoSettings pso;
  Matrix velocities;          // PSO only
  Matrix personal_best_pos;   // PSO only
  Vector personal_best_val;   // PSO only
  RowVector best_pos;
  double best_val = 0.0;
  double worst_val = 0.0;  // largest value ever evaluated, trials included
  Bounds bounds;
  long evaluations = 0;
  int generation = 0;

  Eigen::Index size() const { return positions.rows(); }
};

namespace detail {

inline void refresh_best(TeacherState& s) {
  Eigen::Index i = 0;
  const double v = s.values.minCoeff(&i);
  if (s.generation == 0 || v < s.best_val) {
    s.best_val = v;
    s.best_pos = s.positions.row(i);
  }
}

inline Eigen::Index draw_other(Rng& rng, Eigen::Index n, std::initializer_list<Eigen::Index> taken) {
  for (;;) {
    const auto k = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
    if (std::find(taken.begin(), taken.end(), k) == taken.end()) return k;
  }
}

}  // namespace detail

inline TeacherState make_teacher(TeacherKind kind, const ProblemInstance& problem, Matrix positions,
                                 DeSettings de = {}, PsoSettings pso = {}) {
  if (positions.cols() != problem.dim) throw DimensionError("teacher population dimension does not match the problem");
  if (kind == TeacherKind::DE && positions.rows() < 4) throw ContractError("DE needs at least 4 individuals");
  if (positions.rows() < 1) throw ContractError("empty teacher population");
  TeacherState s;
  s.kind = kind;
  s.de = de;
  s.pso = pso;
  s.bounds = problem.bounds;
  s.positions = std::move(positions);
  s.values = problem.evaluate(s.positions);
  s.evaluations = s.positions.rows();
  s.worst_val = s.values.maxCoeff();
  if (kind == TeacherKind::PSO) {
    s.velocities = Matrix::Zero(s.positions.rows(), s.positions.cols());
    s.personal_best_pos = s.positions;
    s.personal_best_val = s.values;
  }
  detail::refresh_best(s);
  return s;
}

// DE: rand/1/bin with greedy one-to-one selection. PSO: inertia-weight
// velocity update, velocity clamped to half the box width.
inline TeacherState teacher_step(TeacherState s, const ProblemInstance& problem, Rng& rng) {
  const Eigen::Index n = s.size();
  const Eigen::Index d = s.positions.cols();
  const double lo = s.bounds.lower;
  const double hi = s.bounds.upper;
  if (s.kind == TeacherKind::DE) {
    Matrix trial(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index r1 = detail::draw_other(rng, n, {i});
      const Eigen::Index r2 = detail::draw_other(rng, n, {i, r1});
      const Eigen::Index r3 = detail::draw_other(rng, n, {i, r1, r2});
      const auto jrand = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(d)));
      for (Eigen::Index j = 0; j < d; ++j) {
        const bool cross = uniform01(rng) < s.de.cr || j == jrand;
        const double v = s.positions(r1, j) + s.de.f * (s.positions(r2, j) - s.positions(r3, j));
        trial(i, j) = cross ? std::clamp(v, lo, hi) : s.positions(i, j);
      }
    }
    const Vector tv = problem.evaluate(trial);
    s.evaluations += n;
    s.worst_val = std::max(s.worst_val, tv.maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i) {
      if (tv[i] <= s.values[i]) {
        s.positions.row(i) = trial.row(i);
        s.values[i] = tv[i];
      }
    }
  } else {
    const double vmax = 0.5 * s.bounds.width();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) {
        const double r1 = uniform01(rng);
        const double r2 = uniform01(rng);
        const double x = s.positions(i, j);
        double v = s.pso.w * s.velocities(i, j) + s.pso.c1 * r1 * (s.personal_best_pos(i, j) - x) +
                   s.pso.c2 * r2 * (s.best_pos[j] - x);
        v = std::clamp(v, -vmax, vmax);
        s.velocities(i, j) = v;
        s.positions(i, j) = std::clamp(x + v, lo, hi);
      }
    }
    s.values = problem.evaluate(s.positions);
    s.evaluations += n;
    s.worst_val = std::max(s.worst_val, s.values.maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i) {
      if (s.values[i] < s.personal_best_val[i]) {
        s.personal_best_val[i] = s.values[i];
        s.personal_best_pos.row(i) = s.positions.row(i);
      }
    }
  }
  ++s.generation;
  detail::refresh_best(s);
  return s;
}

// Student initial population drawn from the teacher's. Growing copies every
// teacher member and fills the rest uniformly; shrinking sorts by objective
// and takes equally spaced ranks floor(k (n-1) / (m-1)).
inline Matrix align_student_population(const Matrix& teacher_pos, const Vector& teacher_vals, Eigen::Index target,
                                       Bounds bounds, Rng& rng) {
  if (target < 1) throw ContractError("target population size must be positive");
  const Eigen::Index n = teacher_pos.rows();
  if (n < 1 || teacher_vals.size() != n) throw DimensionError("teacher population and values disagree");
  const Eigen::Index d = teacher_pos.cols();
  Matrix out(target, d);
  if (target > n) {
    out.topRows(n) = teacher_pos;
    for (Eigen::Index i = n; i < target; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) out(i, j) = uniform(rng, bounds.lower, bounds.upper);
    }
    return out;
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return teacher_vals[a] < teacher_vals[b]; });
  for (Eigen::Index k = 0; k < target; ++k) {
    const Eigen::Index rank = target == 1 ? 0 : k * (n - 1) / (target - 1);
    out.row(k) = teacher_pos.row(order[static_cast<std::size_t>(rank)]);
  }
  return out;
}

}  // namespace metarule
