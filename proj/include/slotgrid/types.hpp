#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace slotgrid {

using Index = Eigen::Index;

// Feature matrices are row-major: one row per voxel, gathers by row are contiguous.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatrixXd = Matrix<double>;
using RowVectorXd = RowVector<double>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw Error(what);
}

}  // namespace slotgrid
