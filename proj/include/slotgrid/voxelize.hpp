#pragma once

#include "slotgrid/sparse_tensor.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace slotgrid {

/// Row-wise affine map: y = x * weights + bias.
template <typename Scalar>
struct LinearMap {
    Matrix<Scalar> weights;
    RowVector<Scalar> bias;

    Matrix<Scalar> apply(const Matrix<Scalar>& x) const {
        if (x.cols() != weights.rows()) throw DimensionMismatch("linear map input width mismatch");
        Matrix<Scalar> y = x * weights;
        y.rowwise() += bias;
        return y;
    }
};

// Number of raw per-voxel features: (x_rel, y_rel, z, intensity).
inline constexpr Index kRawVoxelFeatures = 4;

struct VoxelizeStats {
    std::size_t kept = 0;
    std::size_t dropped = 0;
};

/// Buckets points into grid cells and mean-pools (x_rel, y_rel, z, intensity), where the
/// offsets are measured from the cell center. Points outside the extent are dropped.
SparseTensor<double> voxelize_raw(std::span<const Point> points, const GridSpec& grid,
                                  VoxelizeStats* stats = nullptr);

SparseTensor<double> voxelize(std::span<const Point> points, const GridSpec& grid,
                              const LinearMap<double>& embed, VoxelizeStats* stats = nullptr);

// Plain-text points: `x y z intensity` per line, `#` comment lines and blank lines ignored.
std::vector<Point> parse_points(std::istream& in);
std::vector<Point> read_points(const std::filesystem::path& path);
void write_points(std::ostream& out, std::span<const Point> points);
void write_points(const std::filesystem::path& path, std::span<const Point> points);

}  // namespace slotgrid
