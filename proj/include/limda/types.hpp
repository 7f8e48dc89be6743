#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <vector>

namespace limda {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Row-major storage matches the on-disk layout of datasets (one sample per row).
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Grid point (i, j): i indexes x1, j indexes x2.
struct GridPoint {
    int i = 0;
    int j = 0;
    friend auto operator<=>(const GridPoint&, const GridPoint&) = default;
};

inline GridPoint operator+(GridPoint a, GridPoint b) { return {a.i + b.i, a.j + b.j}; }
inline GridPoint operator-(GridPoint a, GridPoint b) { return {a.i - b.i, a.j - b.j}; }

}  // namespace limda
