#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "metarule/errors.hpp"
#include "metarule/types.hpp"

namespace metarule {

enum class Strategy { Explore, Guided, Synergized };

inline std::string_view name_of(Strategy s) {
  switch (s) {
    case Strategy::Explore:
      return "explore";
    case Strategy::Guided:
      return "guided";
    case Strategy::Synergized:
      return "synergized";
  }
  return "?";
}

// Progress from best_0 toward opt, in [-1, 0]. A start already at the
// optimum scores 0.
inline double r_explore(double best_t, double best_0, double opt) {
  const double gap = best_0 - opt;
  if (gap == 0.0) return 0.0;
  return -(best_t - opt) / gap;
}

// Negated directed Hausdorff distance from the student rows to the teacher
// rows, scaled by the box width.
inline double r_guided(const Matrix& student, const Matrix& teacher, double x_min, double x_max) {
  if (student.rows() == 0 || teacher.rows() == 0) throw ContractError("guided reward needs non-empty populations");
  if (student.cols() != teacher.cols()) throw DimensionError("student and teacher dimensions differ");
  if (!(x_max > x_min)) throw ContractError("degenerate search box");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < student.rows(); ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < teacher.rows(); ++j) {
      nearest = std::min(nearest, (student.row(i) - teacher.row(j)).squaredNorm());
    }
    worst = std::max(worst, nearest);
  }
  return -std::sqrt(worst) / (x_max - x_min);
}

inline double r_synergized(double explore_part, double guided_part, double lambda) {
  return explore_part + lambda * guided_part;
}

inline double update_surrogate(double surrogate, double student_best, double teacher_best) {
  return std::min({surrogate, student_best, teacher_best});
}

}  // namespace metarule
