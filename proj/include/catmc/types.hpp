#pragma once

#include <Eigen/Dense>

namespace catmc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace catmc
