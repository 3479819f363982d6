#pragma once

#include "slotgrid/grid.hpp"
#include "slotgrid/types.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace slotgrid {

/// Occupied cells of a grid in canonical (iy, ix) order with a coordinate -> row map.
/// Carries no features, so coordinate bookkeeping can run outside the autodiff tape.
class SparseLayout {
public:
    SparseLayout() = default;

    // `coords` must be canonical (strictly increasing) and inside the grid extent.
    SparseLayout(GridSpec grid, std::vector<Coord> coords) : grid_(grid), coords_(std::move(coords)) {
        grid_.validate();
        lookup_.reserve(coords_.size());
        for (std::size_t i = 0; i < coords_.size(); ++i) {
            require(grid_.contains(coords_[i]), "coordinate outside grid extent");
            require(i == 0 || coords_[i - 1] < coords_[i], "coordinates must be canonical and distinct");
            lookup_.emplace(coords_[i].key(), static_cast<Index>(i));
        }
    }

    // Sorts `coords` into canonical order. Returns the layout and, for each canonical row,
    // the index of the source entry it came from. Duplicates are rejected.
    static std::pair<SparseLayout, std::vector<Index>> canonicalize(GridSpec grid,
                                                                    std::span<const Coord> coords) {
        std::vector<Index> order(coords.size());
        std::iota(order.begin(), order.end(), Index{0});
        std::sort(order.begin(), order.end(),
                  [&](Index a, Index b) { return coords[a] < coords[b]; });
        std::vector<Coord> sorted;
        sorted.reserve(coords.size());
        for (Index i : order) sorted.push_back(coords[i]);
        return {SparseLayout(grid, std::move(sorted)), std::move(order)};
    }

    const GridSpec& grid() const { return grid_; }
    const std::vector<Coord>& coords() const { return coords_; }
    Index size() const { return static_cast<Index>(coords_.size()); }
    bool empty() const { return coords_.empty(); }

    std::optional<Index> find(const Coord& c) const {
        auto it = lookup_.find(c.key());
        if (it == lookup_.end()) return std::nullopt;
        return it->second;
    }

    // Metric BEV center of row i.
    double center_x(Index i) const { return grid_.center_x(coords_[i].ix); }
    double center_y(Index i) const { return grid_.center_y(coords_[i].iy); }

    friend bool operator==(const SparseLayout& a, const SparseLayout& b) {
        return a.grid_ == b.grid_ && a.coords_ == b.coords_;
    }

private:
    GridSpec grid_;
    std::vector<Coord> coords_;
    std::unordered_map<std::uint64_t, Index> lookup_;
};

template <typename Scalar>
class SparseTensor {
public:
    using MatrixType = Matrix<Scalar>;

    SparseTensor() = default;

    SparseTensor(SparseLayout layout, MatrixType features)
        : layout_(std::move(layout)), features_(std::move(features)) {
        if (features_.rows() != layout_.size())
            throw DimensionMismatch("feature rows do not match voxel count");
        require(features_.allFinite(), "sparse tensor features must be finite");
    }

    // Builds a tensor from coordinates in any order; rows are permuted to canonical order.
    static SparseTensor from_unsorted(GridSpec grid, std::span<const Coord> coords,
                                      const MatrixType& features) {
        if (features.rows() != static_cast<Index>(coords.size()))
            throw DimensionMismatch("feature rows do not match coordinate count");
        auto [layout, order] = SparseLayout::canonicalize(grid, coords);
        MatrixType sorted(features.rows(), features.cols());
        for (Index r = 0; r < static_cast<Index>(order.size()); ++r) sorted.row(r) = features.row(order[r]);
        return SparseTensor(std::move(layout), std::move(sorted));
    }

    const SparseLayout& layout() const { return layout_; }
    const GridSpec& grid() const { return layout_.grid(); }
    const std::vector<Coord>& coords() const { return layout_.coords(); }
    const MatrixType& features() const { return features_; }
    Index size() const { return layout_.size(); }
    Index channels() const { return features_.cols(); }
    std::optional<Index> find(const Coord& c) const { return layout_.find(c); }

private:
    SparseLayout layout_;
    MatrixType features_;
};

/// Dense W x H x C grid, used by the dense oracles.
template <typename Scalar>
struct DenseGrid {
    std::int32_t width = 0;
    std::int32_t height = 0;
    Index channels = 0;
    std::vector<Scalar> data;

    DenseGrid() = default;
    DenseGrid(std::int32_t w, std::int32_t h, Index c)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, Scalar(0)) {}

    Scalar& at(std::int32_t ix, std::int32_t iy, Index c) {
        return data[(static_cast<std::size_t>(iy) * width + ix) * channels + c];
    }
    const Scalar& at(std::int32_t ix, std::int32_t iy, Index c) const {
        return data[(static_cast<std::size_t>(iy) * width + ix) * channels + c];
    }
};

template <typename Scalar>
DenseGrid<Scalar> densify(const SparseTensor<Scalar>& input) {
    DenseGrid<Scalar> dense(input.grid().width, input.grid().height, input.channels());
    for (Index r = 0; r < input.size(); ++r) {
        const Coord& c = input.coords()[r];
        for (Index ch = 0; ch < input.channels(); ++ch) dense.at(c.ix, c.iy, ch) = input.features()(r, ch);
    }
    return dense;
}

// Keeps every cell with at least one nonzero channel.
template <typename Scalar>
SparseTensor<Scalar> sparsify(const DenseGrid<Scalar>& dense, const GridSpec& grid) {
    require(dense.width == grid.width && dense.height == grid.height, "dense grid does not match grid spec");
    std::vector<Coord> coords;
    for (std::int32_t iy = 0; iy < dense.height; ++iy)
        for (std::int32_t ix = 0; ix < dense.width; ++ix)
            for (Index ch = 0; ch < dense.channels; ++ch)
                if (dense.at(ix, iy, ch) != Scalar(0)) {
                    coords.push_back({ix, iy});
                    break;
                }
    Matrix<Scalar> features(static_cast<Index>(coords.size()), dense.channels);
    for (Index r = 0; r < features.rows(); ++r)
        for (Index ch = 0; ch < dense.channels; ++ch)
            features(r, ch) = dense.at(coords[r].ix, coords[r].iy, ch);
    return SparseTensor<Scalar>(SparseLayout(grid, std::move(coords)), std::move(features));
}

}  // namespace slotgrid
