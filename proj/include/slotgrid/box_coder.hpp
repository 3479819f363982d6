#pragma once

#include "slotgrid/geometry.hpp"
#include "slotgrid/sparse_tensor.hpp"

#include <cmath>
#include <vector>

namespace slotgrid {

// Regression channels: dx, dy (offset from voxel center), dz, log l, log w, log h, sin, cos.
inline constexpr Index kBoxCodeSize = 8;

struct BoxPrediction {
    BoxLabel box;  // box.class_id is the arg-max class
    double score = 0.0;
    std::vector<double> scores;
};

template <typename Scalar>
using BoxCode = Eigen::Matrix<Scalar, 1, kBoxCodeSize>;

inline BoxCode<double> encode_box(const BoxLabel& b, double voxel_x, double voxel_y) {
    BoxCode<double> e;
    e << b.cx - voxel_x, b.cy - voxel_y, b.cz, std::log(b.l), std::log(b.w), std::log(b.h), std::sin(b.yaw),
        std::cos(b.yaw);
    return e;
}

// Inverse of encode_box; atan2(0, 0) is taken as 0.
template <typename Scalar, typename Derived>
BoxT<Scalar> decode_box(const Eigen::MatrixBase<Derived>& e, double voxel_x, double voxel_y) {
    using std::atan2;
    using std::exp;
    BoxT<Scalar> b;
    b.cx = e(0) + voxel_x;
    b.cy = e(1) + voxel_y;
    b.cz = e(2);
    b.l = exp(e(3));
    b.w = exp(e(4));
    b.h = exp(e(5));
    b.yaw = atan2(e(6), e(7));
    return b;
}

/// Row-aligned decode of head outputs into predictions at the voxel centers.
std::vector<BoxPrediction> decode_boxes(const MatrixXd& encodings, const MatrixXd& scores,
                                        const SparseLayout& voxels);

}  // namespace slotgrid
