#pragma once

#include "slotgrid/conv.hpp"

#include <utility>
#include <vector>

namespace slotgrid {

enum class UpsampleStrategy { SpSu, SmSu };

// (x, y) -> (2x, 2y) on the grid with half the stride. Row order is preserved.
inline SparseLayout double_coords(const SparseLayout& coarse) {
    std::vector<Coord> fine;
    fine.reserve(coarse.coords().size());
    for (const Coord& c : coarse.coords()) fine.push_back({2 * c.ix, 2 * c.iy});
    return SparseLayout(coarse.grid().upsampled(), std::move(fine));
}

// Every coarse voxel spawns its 2x2 block of fine cells. Returns the fine layout and, for
// each fine row, the coarse row it copies.
inline std::pair<SparseLayout, std::vector<Index>> repeat_coords(const SparseLayout& coarse) {
    std::vector<Coord> fine;
    std::vector<Index> source;
    fine.reserve(4 * coarse.coords().size());
    for (Index r = 0; r < coarse.size(); ++r) {
        const Coord& c = coarse.coords()[r];
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                fine.push_back({2 * c.ix + dx, 2 * c.iy + dy});
                source.push_back(r);
            }
    }
    auto [layout, order] = SparseLayout::canonicalize(coarse.grid().upsampled(), fine);
    std::vector<Index> sorted_source(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) sorted_source[i] = source[order[i]];
    return {std::move(layout), std::move(sorted_source)};
}

// Coordinate doubling followed by a 3x3 stride-1 regular sparse conv that diffuses the voxels.
template <typename Scalar>
SparseTensor<Scalar> upsample_sp(const SparseTensor<Scalar>& input, const ConvKernel<Scalar>& kernel) {
    require(kernel.mode == ConvMode::Regular && kernel.size == 3 && kernel.stride == 1,
            "SP-SU needs a regular 3x3 stride-1 kernel");
    return sparse_conv(SparseTensor<Scalar>(double_coords(input.layout()), input.features()), kernel);
}

// Feature repetition into 2x2 fine blocks followed by a submanifold conv.
template <typename Scalar>
SparseTensor<Scalar> upsample_sm(const SparseTensor<Scalar>& input, const ConvKernel<Scalar>& kernel) {
    require(kernel.mode == ConvMode::Submanifold && kernel.size == 3, "SM-SU needs a submanifold 3x3 kernel");
    auto [layout, source] = repeat_coords(input.layout());
    Matrix<Scalar> repeated = input.features()(source, Eigen::all);
    return submanifold_conv(SparseTensor<Scalar>(std::move(layout), std::move(repeated)), kernel);
}

template <typename Scalar>
SparseTensor<Scalar> upsample(const SparseTensor<Scalar>& input, const ConvKernel<Scalar>& kernel,
                              UpsampleStrategy strategy) {
    return strategy == UpsampleStrategy::SpSu ? upsample_sp(input, kernel) : upsample_sm(input, kernel);
}

}  // namespace slotgrid
