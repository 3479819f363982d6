#pragma once

#include "slotgrid/parallel.hpp"
#include "slotgrid/sparse_tensor.hpp"

#include <cmath>
#include <random>
#include <span>
#include <vector>

namespace slotgrid {

enum class SlotAxis { X, Y };

/// Voxel -> group labels consumed by the attention kernel. Slots, windows and
/// window-sets all reduce to this.
struct Grouping {
    std::vector<Index> group_of;
    Index group_count = 0;

    // Members of each group in ascending row order.
    std::vector<std::vector<Index>> members() const {
        std::vector<std::vector<Index>> out(static_cast<std::size_t>(group_count));
        for (Index i = 0; i < static_cast<Index>(group_of.size()); ++i) out[group_of[i]].push_back(i);
        return out;
    }
};

/// X-axis slots stack along y: slot = floor(iy / w). Y-axis slots stack along x.
struct SlotPartition {
    SlotAxis axis = SlotAxis::X;
    int width = 12;
    std::vector<Index> slot_index;
    Index slot_count = 0;

    Grouping grouping() const { return {slot_index, slot_count}; }
};

SlotPartition slot_partition(const SparseLayout& layout, SlotAxis axis, int width);

// Square windows labelled (floor(ix / window), floor(iy / window)), flattened row-major.
Grouping window_partition(const SparseLayout& layout, int window);

// Windows further split into consecutive canonical-order chunks of `set_size` voxels.
Grouping window_set_partition(const SparseLayout& layout, int window, int set_size);

enum class PartitionKind { Slot, Window, WindowSet };

struct SlotFormerConfig {
    int num_layers = 4;
    int width = 12;
    int ffn_hidden = 0;  // 0 selects 2 * C
    double eps = 1e-6;
    double norm_eps = 1e-5;
    bool pre_norm = true;
    PartitionKind partition = PartitionKind::Slot;
    int window = 12;
    int set_size = 36;

    void validate() const {
        require(num_layers >= 0 && num_layers % 2 == 0, "slotformer layer count must be even");
        require(width >= 1, "slot width must be >= 1");
        require(ffn_hidden >= 0, "ffn hidden width must be non-negative");
        require(eps > 0.0, "attention eps must be positive");
        require(window >= 1 && set_size >= 1, "window and set size must be >= 1");
    }
};

// Grouping used by a layer for the given axis under the configured partition kind.
Grouping layer_grouping(const SparseLayout& layout, SlotAxis axis, const SlotFormerConfig& cfg);

inline SlotAxis layer_axis(int layer) { return layer % 2 == 0 ? SlotAxis::X : SlotAxis::Y; }

template <typename Scalar>
struct AttentionParams {
    Matrix<Scalar> w_q, w_k, w_v, w_out;
    Matrix<Scalar> ffn_w1;
    RowVector<Scalar> ffn_b1;
    Matrix<Scalar> ffn_w2;
    RowVector<Scalar> ffn_b2;
    RowVector<Scalar> norm1_gamma, norm1_beta, norm2_gamma, norm2_beta;

    Index channels() const { return w_q.rows(); }

    void validate() const {
        const Index c = channels();
        const Index h = ffn_w1.cols();
        auto square = [c](const Matrix<Scalar>& m) { return m.rows() == c && m.cols() == c; };
        if (!(square(w_q) && square(w_k) && square(w_v) && square(w_out) && ffn_w1.rows() == c &&
              ffn_b1.size() == h && ffn_w2.rows() == h && ffn_w2.cols() == c && ffn_b2.size() == c &&
              norm1_gamma.size() == c && norm1_beta.size() == c && norm2_gamma.size() == c &&
              norm2_beta.size() == c))
            throw DimensionMismatch("attention parameter shapes are inconsistent");
    }

    template <typename Rng>
    static AttentionParams random(Index c, Index hidden, Rng& rng, Scalar scale = Scalar(1)) {
        std::normal_distribution<double> normal(0.0, 1.0);
        auto gauss = [&](Index r, Index k) {
            Matrix<Scalar> m(r, k);
            const double s = scale / std::sqrt(static_cast<double>(r));
            for (Index i = 0; i < m.size(); ++i) m.data()[i] = Scalar(normal(rng) * s);
            return m;
        };
        AttentionParams p;
        p.w_q = gauss(c, c);
        p.w_k = gauss(c, c);
        p.w_v = gauss(c, c);
        p.w_out = gauss(c, c);
        p.ffn_w1 = gauss(c, hidden);
        p.ffn_b1 = RowVector<Scalar>::Zero(hidden);
        p.ffn_w2 = gauss(hidden, c);
        p.ffn_b2 = RowVector<Scalar>::Zero(c);
        p.norm1_gamma = RowVector<Scalar>::Ones(c);
        p.norm1_beta = RowVector<Scalar>::Zero(c);
        p.norm2_gamma = RowVector<Scalar>::Ones(c);
        p.norm2_beta = RowVector<Scalar>::Zero(c);
        return p;
    }
};

template <typename Scalar>
Matrix<Scalar> relu(const Matrix<Scalar>& x) {
    return x.cwiseMax(Scalar(0));
}

// Per-row mean/variance normalization over channels.
template <typename Scalar>
Matrix<Scalar> layer_norm(const Matrix<Scalar>& x, const RowVector<Scalar>& gamma, const RowVector<Scalar>& beta,
                          double eps) {
    Matrix<Scalar> y(x.rows(), x.cols());
    const Scalar n = Scalar(x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        const Scalar mean = x.row(i).sum() / n;
        const RowVector<Scalar> centered = x.row(i).array() - mean;
        const Scalar var = centered.squaredNorm() / n;
        y.row(i) = (centered / std::sqrt(var + Scalar(eps))).cwiseProduct(gamma) + beta;
    }
    return y;
}

/// Linear attention within groups:
///   kv_g = sum_{i in g} k_i^T v_i,  ksum_g = sum_{i in g} k_i,
///   out_i = (q_i kv_g) / (q_i . ksum_g + eps).
/// Each group's sums accumulate in ascending row order; groups run in parallel.
template <typename Scalar>
Matrix<Scalar> kernelized_attention(const Matrix<Scalar>& q, const Matrix<Scalar>& k, const Matrix<Scalar>& v,
                                    const Grouping& groups, double eps) {
    if (q.rows() != k.rows() || q.rows() != v.rows() || q.cols() != k.cols() ||
        static_cast<Index>(groups.group_of.size()) != q.rows())
        throw DimensionMismatch("attention inputs are not row-aligned");
    const auto members = groups.members();
    Matrix<Scalar> out(v.rows(), v.cols());
    parallel_for(members.size(), [&](std::size_t g) {
        const auto& rows = members[g];
        if (rows.empty()) return;
        Matrix<Scalar> kv = Matrix<Scalar>::Zero(k.cols(), v.cols());
        RowVector<Scalar> ksum = RowVector<Scalar>::Zero(k.cols());
        for (Index i : rows) {
            kv.noalias() += k.row(i).transpose() * v.row(i);
            ksum += k.row(i);
        }
        for (Index i : rows) {
            const Scalar denom = q.row(i).dot(ksum) + Scalar(eps);
            out.row(i) = (q.row(i) * kv) / denom;
        }
    });
    return out;
}

// Projected attention update proj(v') for (already normalized) features f.
template <typename Scalar>
Matrix<Scalar> attention_update(const Matrix<Scalar>& f, const Grouping& groups, const AttentionParams<Scalar>& p,
                                double eps) {
    if (f.cols() != p.channels()) throw DimensionMismatch("feature width does not match attention params");
    const Matrix<Scalar> q = relu<Scalar>(f * p.w_q);
    const Matrix<Scalar> k = relu<Scalar>(f * p.w_k);
    const Matrix<Scalar> v = f * p.w_v;
    return kernelized_attention<Scalar>(q, k, v, groups, eps) * p.w_out;
}

/// f_i + proj(v'_i) with v' from the per-slot linear attention.
template <typename Scalar>
SparseTensor<Scalar> linear_attention(const SparseTensor<Scalar>& input, const Grouping& groups,
                                      const AttentionParams<Scalar>& params, double eps) {
    params.validate();
    require(eps > 0.0, "attention eps must be positive");
    Matrix<Scalar> out = input.features() + attention_update(input.features(), groups, params, eps);
    return SparseTensor<Scalar>(input.layout(), std::move(out));
}

template <typename Scalar>
SparseTensor<Scalar> linear_attention(const SparseTensor<Scalar>& input, const SlotPartition& partition,
                                      const AttentionParams<Scalar>& params, double eps) {
    return linear_attention(input, partition.grouping(), params, eps);
}

template <typename Scalar>
Matrix<Scalar> feed_forward(const Matrix<Scalar>& x, const AttentionParams<Scalar>& p) {
    Matrix<Scalar> h = x * p.ffn_w1;
    h.rowwise() += p.ffn_b1;
    Matrix<Scalar> y = relu<Scalar>(h) * p.ffn_w2;
    y.rowwise() += p.ffn_b2;
    return y;
}

/// One block: x + proj(attn(norm(x))), then + ffn(norm(.)). Coordinates are unchanged.
template <typename Scalar>
Matrix<Scalar> slotformer_block(const Matrix<Scalar>& x, const Grouping& groups, const AttentionParams<Scalar>& p,
                                const SlotFormerConfig& cfg) {
    auto norm = [&](const Matrix<Scalar>& m, const RowVector<Scalar>& g, const RowVector<Scalar>& b) {
        return cfg.pre_norm ? layer_norm<Scalar>(m, g, b, cfg.norm_eps) : m;
    };
    Matrix<Scalar> h = x + attention_update<Scalar>(norm(x, p.norm1_gamma, p.norm1_beta), groups, p, cfg.eps);
    return h + feed_forward<Scalar>(norm(h, p.norm2_gamma, p.norm2_beta), p);
}

template <typename Scalar>
SparseTensor<Scalar> slotformer_layer(const SparseTensor<Scalar>& input, SlotAxis axis,
                                      const AttentionParams<Scalar>& params, const SlotFormerConfig& cfg) {
    cfg.validate();
    params.validate();
    const Grouping groups = layer_grouping(input.layout(), axis, cfg);
    return SparseTensor<Scalar>(input.layout(), slotformer_block<Scalar>(input.features(), groups, params, cfg));
}

// Layers alternate X, Y, X, Y, ...
template <typename Scalar>
SparseTensor<Scalar> slotformer_stack(const SparseTensor<Scalar>& input,
                                      std::span<const AttentionParams<Scalar>> layers, const SlotFormerConfig& cfg) {
    require(layers.size() % 2 == 0, "slotformer stack needs an even number of layers");
    SparseTensor<Scalar> x = input;
    for (std::size_t l = 0; l < layers.size(); ++l) x = slotformer_layer(x, layer_axis(static_cast<int>(l)), layers[l], cfg);
    return x;
}

}  // namespace slotgrid
