#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace ehrd3pm {

// All numerics run in binary64; checkpoint tensors are serialized as such.
using Scalar = double;

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;
using Index = Eigen::Index;

// Token categories, one int per (record, token); values in [0, K).
// Category 0 is the one-hot basis vector e_1 (code present), category 1 is e_2 (absent).
using TokenMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using TokenRow = Eigen::RowVectorXi;

// Dense 0/1 storage, one byte per cell, row per record.
using BitMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

} // namespace ehrd3pm
