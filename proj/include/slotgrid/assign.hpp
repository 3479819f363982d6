#pragma once

#include "slotgrid/box_coder.hpp"
#include "slotgrid/sparse_tensor.hpp"

#include <span>
#include <vector>

namespace slotgrid {

struct AssignConfig {
    int candidates = 5;   // n
    double lambda = 2.0;  // regression weight in the selection cost
};

/// The n voxels nearest (BEV meters, voxel center to box center) to gt's center;
/// ties go to the lower row. Returns all rows when fewer than n exist.
std::vector<Index> nearest_candidates(const SparseLayout& voxels, const BoxLabel& gt, int n);

/// max(floor(sum of IoUs), 1), clamped to the number of candidates.
int adaptive_k(std::span<const double> ious);

struct GtAssignment {
    std::vector<Index> candidate_rows;
    std::vector<double> selection_costs;  // aligned with candidate_rows
    std::vector<double> ious;             // aligned with candidate_rows
    int k = 0;
    std::vector<Index> positive_rows;     // ascending cost, after conflict resolution
};

struct AssignmentResult {
    std::vector<GtAssignment> per_gt;
    MatrixXd cls_target;               // N x num_classes
    std::vector<int> positive_gt;      // per row: owning gt index or -1
};

/// Dynamic sparse label assignment. Per ground truth: n nearest candidates, selection
/// costs, adaptive k from the candidate IoUs, and the k cheapest candidates as positives.
/// A voxel claimed by several ground truths goes to the lowest cost (then lowest gt index);
/// the others fall back to their next-cheapest free candidate.
AssignmentResult dynamic_assign(const SparseLayout& voxels, std::span<const BoxPrediction> preds,
                                std::span<const BoxLabel> gts, const AssignConfig& cfg, int num_classes);

}  // namespace slotgrid
