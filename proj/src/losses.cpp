#include "slotgrid/losses.hpp"

namespace slotgrid {

double focal_loss(const MatrixXd& scores, const MatrixXd& targets, double gamma) {
    if (scores.rows() != targets.rows() || scores.cols() != targets.cols())
        throw DimensionMismatch("focal loss shapes differ");
    double total = 0.0;
    Index positives = 0;
    for (Index i = 0; i < scores.rows(); ++i)
        for (Index j = 0; j < scores.cols(); ++j) {
            total += focal_term<double>(scores(i, j), targets(i, j), gamma);
            if (targets(i, j) == 1.0) ++positives;
        }
    return total / static_cast<double>(std::max<Index>(1, positives));
}

double selection_cost(const BoxPrediction& pred, const BoxLabel& gt, double lambda) {
    require(lambda >= 0.0, "lambda must be non-negative");
    require(gt.class_id >= 0 && static_cast<std::size_t>(gt.class_id) < pred.scores.size(),
            "ground-truth class has no score channel");
    const double cls = focal_term<double>(pred.scores[static_cast<std::size_t>(gt.class_id)], 1.0);
    return cls + lambda * rw_iou_loss<double>(pred.box, gt);
}

}  // namespace slotgrid
