#pragma once

#include "slotgrid/types.hpp"

#include <cmath>
#include <cstdint>
#include <functional>

namespace slotgrid {

struct Point {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double intensity = 0.0;
};

// Integer cell index on a grid at some stride. Canonical order is (iy, ix) lexicographic.
struct Coord {
    std::int32_t ix = 0;
    std::int32_t iy = 0;

    friend bool operator==(const Coord&, const Coord&) = default;
    friend bool operator<(const Coord& a, const Coord& b) {
        return a.iy != b.iy ? a.iy < b.iy : a.ix < b.ix;
    }

    // Order-preserving packing: key(a) < key(b) iff a < b for non-negative indices.
    std::uint64_t key() const {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(iy)) << 32) |
               static_cast<std::uint32_t>(ix);
    }
};

/// Bird's-eye-view grid. `voxel_x`/`voxel_y` are the base (stride 1) cell sizes in
/// meters; `width`/`height` count cells at the current stride.
struct GridSpec {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double voxel_x = 0.16;
    double voxel_y = 0.16;
    std::int32_t width = 1;
    std::int32_t height = 1;
    std::int32_t stride = 1;

    double cell_x() const { return voxel_x * stride; }
    double cell_y() const { return voxel_y * stride; }

    double center_x(std::int32_t ix) const { return origin_x + (ix + 0.5) * cell_x(); }
    double center_y(std::int32_t iy) const { return origin_y + (iy + 0.5) * cell_y(); }

    bool contains(const Coord& c) const {
        return c.ix >= 0 && c.iy >= 0 && c.ix < width && c.iy < height;
    }

    // Cell holding the metric point (x, y); may be outside the extent.
    Coord cell_of(double x, double y) const {
        return {static_cast<std::int32_t>(std::floor((x - origin_x) / cell_x())),
                static_cast<std::int32_t>(std::floor((y - origin_y) / cell_y()))};
    }

    GridSpec downsampled() const {
        GridSpec g = *this;
        g.stride = stride * 2;
        g.width = (width + 1) / 2;
        g.height = (height + 1) / 2;
        return g;
    }

    GridSpec upsampled() const {
        require(stride >= 2, "cannot upsample a stride-1 grid");
        GridSpec g = *this;
        g.stride = stride / 2;
        g.width = width * 2;
        g.height = height * 2;
        return g;
    }

    void validate() const {
        require(std::isfinite(voxel_x) && std::isfinite(voxel_y) && voxel_x > 0.0 && voxel_y > 0.0,
                "grid voxel size must be positive");
        require(std::isfinite(origin_x) && std::isfinite(origin_y), "grid origin must be finite");
        require(width > 0 && height > 0, "grid extent must be positive");
        require(stride >= 1 && (stride & (stride - 1)) == 0, "grid stride must be a power of two");
    }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

}  // namespace slotgrid

template <>
struct std::hash<slotgrid::Coord> {
    std::size_t operator()(const slotgrid::Coord& c) const noexcept {
        return std::hash<std::uint64_t>{}(c.key());
    }
};
