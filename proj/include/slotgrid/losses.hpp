#pragma once

#include "slotgrid/box_coder.hpp"
#include "slotgrid/geometry.hpp"

#include <cmath>

namespace slotgrid {

inline constexpr double kFocalGamma = 2.0;
inline constexpr double kScoreClamp = 1e-12;

/// Quality focal term for one score/target pair:
///   -|t - s|^gamma * (t log s + (1 - t) log(1 - s)).
/// Log arguments are clamped away from 0; a zero-weight log term is skipped.
template <typename Scalar>
Scalar focal_term(const Scalar& score, double target, double gamma = kFocalGamma) {
    using std::abs;
    using std::log;
    using std::pow;
    const Scalar residual = Scalar(target) - score;
    const Scalar weight = gamma == 2.0 ? Scalar(residual * residual) : Scalar(pow(abs(residual), gamma));
    Scalar bce(0.0);
    if (target > 0.0) {
        const Scalar s = score < kScoreClamp ? Scalar(kScoreClamp) : score;
        bce = bce - log(s) * target;
    }
    if (target < 1.0) {
        const Scalar one_minus = Scalar(1.0) - score;
        const Scalar q = one_minus < kScoreClamp ? Scalar(kScoreClamp) : one_minus;
        bce = bce - log(q) * (1.0 - target);
    }
    return weight * bce;
}

// Sum of focal terms divided by max(1, number of targets equal to 1).
double focal_loss(const MatrixXd& scores, const MatrixXd& targets, double gamma = kFocalGamma);

/// Assignment cost of one prediction for one ground truth:
///   focal(score of gt class, 1) + lambda * rw_iou_loss(pred, gt).
double selection_cost(const BoxPrediction& pred, const BoxLabel& gt, double lambda);

}  // namespace slotgrid
