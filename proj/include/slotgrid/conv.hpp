#pragma once

#include "slotgrid/parallel.hpp"
#include "slotgrid/sparse_tensor.hpp"

#include <set>
#include <vector>

namespace slotgrid {

enum class ConvMode { Submanifold, Regular };

/// k x k sparse convolution. `weights` stacks the k*k taps vertically: tap t = dy * k + dx
/// occupies rows [t * C_in, (t + 1) * C_in) and maps an input row (1 x C_in) to 1 x C_out.
/// Output cell o reads input cell o * stride + (dx - k/2, dy - k/2).
template <typename Scalar>
struct ConvKernel {
    int size = 3;
    int stride = 1;
    ConvMode mode = ConvMode::Submanifold;
    Matrix<Scalar> weights;
    RowVector<Scalar> bias;

    Index in_channels() const { return weights.rows() / (static_cast<Index>(size) * size); }
    Index out_channels() const { return weights.cols(); }
    int taps() const { return size * size; }

    auto tap(int t) const { return weights.middleRows(static_cast<Index>(t) * in_channels(), in_channels()); }

    void validate() const {
        require(size >= 1 && size % 2 == 1, "kernel size must be odd");
        require(stride == 1 || stride == 2, "kernel stride must be 1 or 2");
        require(mode == ConvMode::Regular || stride == 1, "submanifold convolution requires stride 1");
        require(weights.rows() % (static_cast<Index>(size) * size) == 0, "kernel weight rows must be k*k*C_in");
        require(bias.size() == weights.cols(), "kernel bias must have C_out entries");
        require(weights.allFinite() && bias.allFinite(), "kernel parameters must be finite");
    }

    static ConvKernel zeros(int k, Index c_in, Index c_out, ConvMode mode, int stride = 1) {
        ConvKernel kernel;
        kernel.size = k;
        kernel.stride = stride;
        kernel.mode = mode;
        kernel.weights = Matrix<Scalar>::Zero(static_cast<Index>(k) * k * c_in, c_out);
        kernel.bias = RowVector<Scalar>::Zero(c_out);
        return kernel;
    }
};

/// Gather/scatter pairs per kernel tap. For tap t, input row in_rows[t][j] contributes to
/// output row out_rows[t][j]; within one tap every output row appears at most once.
struct Rulebook {
    SparseLayout output;
    int kernel_size = 1;
    std::vector<std::vector<Index>> in_rows;
    std::vector<std::vector<Index>> out_rows;

    std::size_t pair_count() const {
        std::size_t n = 0;
        for (const auto& r : in_rows) n += r.size();
        return n;
    }
};

namespace detail {

inline void fill_pairs(Rulebook& book, const SparseLayout& input, int k, int stride) {
    const int half = k / 2;
    book.kernel_size = k;
    book.in_rows.assign(static_cast<std::size_t>(k) * k, {});
    book.out_rows.assign(static_cast<std::size_t>(k) * k, {});
    const auto& out_coords = book.output.coords();
    for (Index o = 0; o < book.output.size(); ++o) {
        const Coord& oc = out_coords[o];
        for (int dy = 0; dy < k; ++dy) {
            for (int dx = 0; dx < k; ++dx) {
                Coord ic{oc.ix * stride + dx - half, oc.iy * stride + dy - half};
                if (auto row = input.find(ic)) {
                    const int t = dy * k + dx;
                    book.in_rows[t].push_back(*row);
                    book.out_rows[t].push_back(o);
                }
            }
        }
    }
}

inline std::int32_t floor_div(std::int32_t a, std::int32_t b) {
    std::int32_t q = a / b;
    return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

}  // namespace detail

inline Rulebook submanifold_rulebook(const SparseLayout& input, int k) {
    Rulebook book;
    book.output = input;
    detail::fill_pairs(book, input, k, 1);
    return book;
}

// Output: every cell at the output resolution whose receptive field holds an input voxel.
inline Rulebook regular_rulebook(const SparseLayout& input, int k, int stride) {
    const GridSpec out_grid = stride == 2 ? input.grid().downsampled() : input.grid();
    const int half = k / 2;
    std::set<Coord> reached;
    for (const Coord& c : input.coords()) {
        for (int dy = 0; dy < k; ++dy) {
            for (int dx = 0; dx < k; ++dx) {
                const std::int32_t nx = c.ix - (dx - half);
                const std::int32_t ny = c.iy - (dy - half);
                if (nx % stride != 0 || ny % stride != 0) continue;
                Coord o{detail::floor_div(nx, stride), detail::floor_div(ny, stride)};
                if (out_grid.contains(o)) reached.insert(o);
            }
        }
    }
    Rulebook book;
    book.output = SparseLayout(out_grid, std::vector<Coord>(reached.begin(), reached.end()));
    detail::fill_pairs(book, input, k, stride);
    return book;
}

/// Y = bias + sum_t X[in_rows[t]] * W_t scattered to out_rows[t]. Tap products run in
/// parallel; the scatter-add is sequential in tap order, so the result is bit-identical
/// for any worker count.
template <typename Scalar, typename WeightsDerived>
Matrix<Scalar> apply_rulebook(const Rulebook& book, const Matrix<Scalar>& x,
                              const Eigen::MatrixBase<WeightsDerived>& weights,
                              const RowVector<Scalar>& bias) {
    const int taps = book.kernel_size * book.kernel_size;
    const Index c_in = weights.rows() / taps;
    if (c_in != x.cols()) throw DimensionMismatch("kernel input channels do not match features");
    Matrix<Scalar> y = bias.replicate(book.output.size(), 1);
    std::vector<Matrix<Scalar>> partial(static_cast<std::size_t>(taps));
    parallel_for(static_cast<std::size_t>(taps), [&](std::size_t t) {
        if (book.in_rows[t].empty()) return;
        partial[t].noalias() = x(book.in_rows[t], Eigen::all) *
                               weights.middleRows(static_cast<Index>(t) * c_in, c_in);
    });
    for (int t = 0; t < taps; ++t) {
        if (book.in_rows[t].empty()) continue;
        y(book.out_rows[t], Eigen::all) += partial[t];
    }
    return y;
}

template <typename Scalar>
SparseTensor<Scalar> submanifold_conv(const SparseTensor<Scalar>& input, const ConvKernel<Scalar>& kernel) {
    kernel.validate();
    require(kernel.mode == ConvMode::Submanifold, "submanifold_conv needs a submanifold kernel");
    if (kernel.in_channels() != input.channels())
        throw DimensionMismatch("kernel input channels do not match features");
    Rulebook book = submanifold_rulebook(input.layout(), kernel.size);
    auto y = apply_rulebook(book, input.features(), kernel.weights, kernel.bias);
    return SparseTensor<Scalar>(std::move(book.output), std::move(y));
}

template <typename Scalar>
SparseTensor<Scalar> sparse_conv(const SparseTensor<Scalar>& input, const ConvKernel<Scalar>& kernel) {
    kernel.validate();
    require(kernel.mode == ConvMode::Regular, "sparse_conv needs a regular kernel");
    if (kernel.in_channels() != input.channels())
        throw DimensionMismatch("kernel input channels do not match features");
    Rulebook book = regular_rulebook(input.layout(), kernel.size, kernel.stride);
    auto y = apply_rulebook(book, input.features(), kernel.weights, kernel.bias);
    return SparseTensor<Scalar>(std::move(book.output), std::move(y));
}

}  // namespace slotgrid
