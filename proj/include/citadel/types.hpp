#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

namespace citadel {

// d-dimensional binary feature vector; every entry is 0 or 1.
using FeatureVector = std::vector<std::uint8_t>;

// Class probabilities for the binary task: [benign, malware].
using Probabilities = std::array<double, 2>;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
// Row-per-sample matrix (embeddings, feature batches).
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kBenign = 0;
inline constexpr int kMalware = 1;

}  // namespace citadel
