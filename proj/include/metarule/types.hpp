#pragma once

#include <Eigen/Core>

namespace metarule {

// Populations are stored one individual per row, rows contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

struct Bounds {
  double lower = -100.0;
  double upper = 100.0;

  double width() const { return upper - lower; }
};

}  // namespace metarule
