#pragma once

#include "slotgrid/box_coder.hpp"
#include "slotgrid/conv.hpp"

namespace slotgrid {

/// Two parallel branches of 1x1 submanifold convs: conv -> ReLU -> conv.
template <typename Scalar>
struct HeadParams {
    ConvKernel<Scalar> cls_hidden, cls_out;
    ConvKernel<Scalar> reg_hidden, reg_out;

    static HeadParams zeros(Index channels, Index num_classes) {
        auto k1 = [](Index in, Index out) { return ConvKernel<Scalar>::zeros(1, in, out, ConvMode::Submanifold); };
        return {k1(channels, channels), k1(channels, num_classes), k1(channels, channels), k1(channels, kBoxCodeSize)};
    }
};

template <typename Scalar>
struct HeadOutput {
    Matrix<Scalar> scores;     // N x K, logistic
    Matrix<Scalar> encodings;  // N x 8
};

template <typename Scalar>
HeadOutput<Scalar> prediction_head(const SparseTensor<Scalar>& voxels, const HeadParams<Scalar>& head) {
    auto branch = [&](const ConvKernel<Scalar>& hidden, const ConvKernel<Scalar>& out) {
        const auto h = submanifold_conv(voxels, hidden);
        return submanifold_conv(SparseTensor<Scalar>(h.layout(), h.features().cwiseMax(Scalar(0))), out).features();
    };
    HeadOutput<Scalar> result;
    const Matrix<Scalar> logits = branch(head.cls_hidden, head.cls_out);
    result.scores = logits.unaryExpr([](Scalar x) { return Scalar(1) / (Scalar(1) + std::exp(-x)); });
    result.encodings = branch(head.reg_hidden, head.reg_out);
    return result;
}

}  // namespace slotgrid
