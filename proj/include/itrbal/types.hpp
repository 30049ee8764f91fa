#pragma once

#include <Eigen/Dense>

namespace itrbal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace itrbal
