#include "slotgrid/eval.hpp"

#include "slotgrid/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace slotgrid {

namespace {

bool ranks_before(const BoxPrediction& a, const BoxPrediction& b) {
    return std::make_tuple(-a.score, a.box.cx, a.box.cy) < std::make_tuple(-b.score, b.box.cx, b.box.cy);
}

}  // namespace

std::vector<BoxPrediction> nms_bev(std::vector<BoxPrediction> preds, double iou_thresh, double score_thresh) {
    require(iou_thresh >= 0.0 && iou_thresh <= 1.0 && score_thresh >= 0.0 && score_thresh <= 1.0,
            "NMS thresholds must lie in [0, 1]");
    std::erase_if(preds, [&](const BoxPrediction& p) { return p.score < score_thresh; });
    std::stable_sort(preds.begin(), preds.end(), ranks_before);
    std::vector<BoxPrediction> kept;
    for (auto& p : preds) {
        bool suppressed = false;
        for (const auto& k : kept)
            if (k.box.class_id == p.box.class_id && rotated_iou_bev(k.box, p.box) > iou_thresh) {
                suppressed = true;
                break;
            }
        if (!suppressed) kept.push_back(std::move(p));
    }
    return kept;
}

const ClassEval* EvalResult::find(int class_id, double iou_threshold) const {
    for (const auto& c : classes)
        if (c.class_id == class_id && std::abs(c.iou_threshold - iou_threshold) < 1e-12) return &c;
    return nullptr;
}

EvalResult evaluate(std::span<const std::vector<BoxPrediction>> preds, std::span<const std::vector<BoxLabel>> gts,
                    std::span<const double> iou_thresholds, int num_classes) {
    require(preds.size() == gts.size(), "prediction and ground-truth scene lists differ in length");
    EvalResult result;
    for (double thr : iou_thresholds) {
        for (int cls = 0; cls < num_classes; ++cls) {
            ClassEval ce;
            ce.class_id = cls;
            ce.iou_threshold = thr;
            struct Ranked {
                std::size_t scene;
                const BoxPrediction* pred;
            };
            std::vector<Ranked> ranked;
            std::vector<std::vector<bool>> matched(gts.size());
            for (std::size_t s = 0; s < gts.size(); ++s) {
                matched[s].assign(gts[s].size(), false);
                for (const auto& g : gts[s]) ce.num_gt += g.class_id == cls ? 1 : 0;
                for (const auto& p : preds[s])
                    if (p.box.class_id == cls) ranked.push_back({s, &p});
            }
            if (ce.num_gt == 0) continue;
            ce.num_pred = static_cast<int>(ranked.size());
            std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
                if (a.pred->score != b.pred->score) return a.pred->score > b.pred->score;
                return a.scene < b.scene;
            });
            int tp = 0;
            for (std::size_t i = 0; i < ranked.size(); ++i) {
                const auto& scene_gts = gts[ranked[i].scene];
                int best = -1;
                double best_iou = thr;
                for (std::size_t g = 0; g < scene_gts.size(); ++g) {
                    if (scene_gts[g].class_id != cls || matched[ranked[i].scene][g]) continue;
                    const double iou = rotated_iou_bev(ranked[i].pred->box, scene_gts[g]);
                    if (iou >= best_iou && (best < 0 || iou > best_iou)) {
                        best = static_cast<int>(g);
                        best_iou = iou;
                    }
                }
                if (best >= 0) {
                    matched[ranked[i].scene][static_cast<std::size_t>(best)] = true;
                    ++tp;
                }
                ce.recall.push_back(static_cast<double>(tp) / ce.num_gt);
                ce.precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
            }
            ce.true_positives = tp;
            ce.interpolated.assign(101, 0.0);
            for (int r = 0; r <= 100; ++r) {
                const double level = r / 100.0;
                double best = 0.0;
                for (std::size_t i = 0; i < ce.recall.size(); ++i)
                    if (ce.recall[i] >= level - 1e-12) best = std::max(best, ce.precision[i]);
                ce.interpolated[static_cast<std::size_t>(r)] = best;
            }
            double sum = 0.0;
            for (double p : ce.interpolated) sum += p;
            ce.ap = sum / 101.0;
            result.classes.push_back(std::move(ce));
        }
    }
    return result;
}

}  // namespace slotgrid
