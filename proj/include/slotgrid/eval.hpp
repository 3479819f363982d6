#pragma once

#include "slotgrid/box_coder.hpp"

#include <span>
#include <vector>

namespace slotgrid {

/// Greedy BEV non-maximum suppression within each class. Candidates below score_thresh are
/// dropped; the rest are visited by descending score (ties: lower cx, then lower cy) and a
/// candidate is suppressed when its rotated IoU with a kept box exceeds iou_thresh.
std::vector<BoxPrediction> nms_bev(std::vector<BoxPrediction> preds, double iou_thresh, double score_thresh);

struct ClassEval {
    int class_id = 0;
    double iou_threshold = 0.5;
    double ap = 0.0;
    int num_gt = 0;
    int num_pred = 0;
    int true_positives = 0;
    std::vector<double> recall;              // raw curve, one entry per ranked prediction
    std::vector<double> precision;
    std::vector<double> interpolated;        // 101 points at recall 0, 0.01, ..., 1
};

struct EvalResult {
    std::vector<ClassEval> classes;

    // AP for (class, threshold); classes without ground truth are not reported.
    const ClassEval* find(int class_id, double iou_threshold) const;
};

/// 101-point interpolated AP with BEV rotated IoU. Predictions are matched by descending
/// score to the unmatched same-class ground truth of highest IoU >= threshold.
EvalResult evaluate(std::span<const std::vector<BoxPrediction>> preds, std::span<const std::vector<BoxLabel>> gts,
                    std::span<const double> iou_thresholds, int num_classes);

}  // namespace slotgrid
