#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace intrafair {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Binary {0,1} vector (labels, protected attribute, hard predictions).
using BinaryVector = std::vector<int>;

using Rng = std::mt19937_64;

}  // namespace intrafair
