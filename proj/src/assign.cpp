#include "slotgrid/assign.hpp"

#include "slotgrid/losses.hpp"
#include "slotgrid/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <tuple>

namespace slotgrid {

std::vector<Index> nearest_candidates(const SparseLayout& voxels, const BoxLabel& gt, int n) {
    require(n >= 1, "candidate count must be >= 1");
    if (voxels.empty()) throw EmptyInput("no voxels to assign");
    std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(voxels.size()));
    for (Index i = 0; i < voxels.size(); ++i) {
        const double dx = voxels.center_x(i) - gt.cx;
        const double dy = voxels.center_y(i) - gt.cy;
        dist[i] = {dx * dx + dy * dy, i};
    }
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(n), dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
    std::vector<Index> rows(take);
    for (std::size_t i = 0; i < take; ++i) rows[i] = dist[i].second;
    return rows;
}

int adaptive_k(std::span<const double> ious) {
    if (ious.empty()) return 0;
    double sum = 0.0;
    for (double v : ious) {
        require(v >= 0.0 && v <= 1.0, "IoU outside [0, 1]");
        sum += v;
    }
    const int k = std::max(static_cast<int>(std::floor(sum)), 1);
    return std::min(k, static_cast<int>(ious.size()));
}

AssignmentResult dynamic_assign(const SparseLayout& voxels, std::span<const BoxPrediction> preds,
                                std::span<const BoxLabel> gts, const AssignConfig& cfg, int num_classes) {
    if (static_cast<Index>(preds.size()) != voxels.size())
        throw DimensionMismatch("predictions are not row-aligned with voxels");
    require(cfg.lambda >= 0.0, "lambda must be non-negative");
    AssignmentResult result;
    result.cls_target = MatrixXd::Zero(voxels.size(), num_classes);
    result.positive_gt.assign(static_cast<std::size_t>(voxels.size()), -1);
    if (gts.empty()) return result;
    for (const BoxLabel& gt : gts)
        require(gt.class_id >= 0 && gt.class_id < num_classes, "ground-truth class out of range");

    // Per ground truth: candidates, costs, IoUs, k and cost ranking. Independent per gt.
    result.per_gt.resize(gts.size());
    std::vector<std::vector<std::size_t>> ranking(gts.size());
    parallel_for(gts.size(), [&](std::size_t g) {
        GtAssignment& a = result.per_gt[g];
        a.candidate_rows = nearest_candidates(voxels, gts[g], cfg.candidates);
        for (Index row : a.candidate_rows) {
            a.selection_costs.push_back(selection_cost(preds[row], gts[g], cfg.lambda));
            a.ious.push_back(rotated_iou_bev(preds[row].box, gts[g]));
        }
        a.k = adaptive_k(a.ious);
        auto& order = ranking[g];
        order.resize(a.candidate_rows.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            return std::tie(a.selection_costs[x], a.candidate_rows[x]) <
                   std::tie(a.selection_costs[y], a.candidate_rows[y]);
        });
    });

    // Sequential epilogue in gt order: each gt claims its ranked candidates up to k; a row
    // already owned by a cheaper (or equal-cost, earlier) claim is skipped, and a gt that
    // loses a row to a cheaper claim continues down its ranking.
    struct Claim {
        double cost;
        std::size_t gt;
    };
    std::vector<std::optional<Claim>> owner(static_cast<std::size_t>(voxels.size()));
    std::vector<std::size_t> next(gts.size(), 0);
    std::vector<int> held(gts.size(), 0);
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            const GtAssignment& a = result.per_gt[g];
            while (held[g] < a.k && next[g] < ranking[g].size()) {
                const std::size_t c = ranking[g][next[g]++];
                const auto row = static_cast<std::size_t>(a.candidate_rows[c]);
                const double cost = a.selection_costs[c];
                auto& cur = owner[row];
                if (cur && std::tie(cur->cost, cur->gt) < std::tie(cost, g)) continue;
                if (cur) {
                    --held[cur->gt];  // evicted gt resumes on the next sweep
                }
                cur = Claim{cost, g};
                ++held[g];
                changed = true;
            }
        }
    }

    for (std::size_t row = 0; row < owner.size(); ++row)
        if (owner[row]) result.positive_gt[row] = static_cast<int>(owner[row]->gt);
    for (std::size_t g = 0; g < gts.size(); ++g) {
        GtAssignment& a = result.per_gt[g];
        for (std::size_t c : ranking[g]) {
            const Index row = a.candidate_rows[c];
            if (result.positive_gt[static_cast<std::size_t>(row)] == static_cast<int>(g)) a.positive_rows.push_back(row);
        }
    }

    // Heatmap targets: 1 at positives for their gt's class; IoU at the other candidates
    // (max over ground truths of that class); 0 elsewhere.
    for (std::size_t g = 0; g < gts.size(); ++g) {
        const GtAssignment& a = result.per_gt[g];
        const int cls = gts[g].class_id;
        for (std::size_t c = 0; c < a.candidate_rows.size(); ++c) {
            const Index row = a.candidate_rows[c];
            const int owner_gt = result.positive_gt[static_cast<std::size_t>(row)];
            if (owner_gt >= 0 && gts[static_cast<std::size_t>(owner_gt)].class_id == cls) continue;
            result.cls_target(row, cls) = std::max(result.cls_target(row, cls), a.ious[c]);
        }
    }
    for (std::size_t row = 0; row < owner.size(); ++row) {
        const int g = result.positive_gt[row];
        if (g >= 0) result.cls_target(static_cast<Index>(row), gts[static_cast<std::size_t>(g)].class_id) = 1.0;
    }
    return result;
}

}  // namespace slotgrid
