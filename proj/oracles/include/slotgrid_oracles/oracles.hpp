#pragma once

// Reference implementations used to check the library. They favour obviousness over speed
// and share no code paths with the kernels they check.

#include "slotgrid/assign.hpp"
#include "slotgrid/conv.hpp"
#include "slotgrid/model.hpp"
#include "slotgrid/slotformer.hpp"
#include "slotgrid/voxelize.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace slotgrid::oracle {

// Zero-padded dense k x k convolution with the given stride; output size ceil(W / stride).
DenseGrid<double> dense_conv(const DenseGrid<double>& in, const ConvKernel<double>& kernel, int stride);

// True where the stride-s receptive field of an output cell touches an occupied input cell.
std::vector<bool> dense_reachable(const std::vector<bool>& occupied, int width, int height, int k, int stride);

// Max relative error |a - b| / max(1, |b|) between a sparse tensor and dense values at its coords.
double max_error_at_coords(const SparseTensor<double>& sparse, const DenseGrid<double>& dense);

// Dense routes for both conv modes and both upsampling strategies. Each returns the expected
// sparse output (coordinates and features) built from dense grids.
SparseTensor<double> dense_submanifold(const SparseTensor<double>& in, const ConvKernel<double>& kernel);
SparseTensor<double> dense_regular(const SparseTensor<double>& in, const ConvKernel<double>& kernel);
SparseTensor<double> dense_upsample_sp(const SparseTensor<double>& in, const ConvKernel<double>& kernel);
SparseTensor<double> dense_upsample_sm(const SparseTensor<double>& in, const ConvKernel<double>& kernel);

// Max over entries of |a - b| / max(1, |b|); +inf when coordinate sets differ.
double compare_sparse(const SparseTensor<double>& actual, const SparseTensor<double>& expected);

// v'_i = sum_j (q_i . k_j) v_j / (sum_j q_i . k_j + eps) over j in i's group, O(N^2).
MatrixXd explicit_attention(const MatrixXd& q, const MatrixXd& k, const MatrixXd& v,
                            std::span<const Index> group_of, double eps);

// Max relative error |a - b| / max(|b|, floor) over entries.
double max_relative_error(const MatrixXd& actual, const MatrixXd& expected, double floor = 1e-300);

struct BucketMean {
    int count = 0;
    Eigen::Vector4d mean = Eigen::Vector4d::Zero();
};
std::map<std::pair<int, int>, BucketMean> bucket_points(std::span<const Point> points, const GridSpec& grid);

std::vector<Index> brute_force_nearest(const SparseLayout& voxels, const BoxLabel& gt, int n);

// Full reassignment: enumerate every (gt, candidate) pair, then hand voxels out in global
// (cost, gt, row) order subject to the per-gt quota k.
AssignmentResult brute_force_assign(const SparseLayout& voxels, std::span<const BoxPrediction> preds,
                                    std::span<const BoxLabel> gts, const AssignConfig& cfg, int num_classes);

// Uniform samples inside the smaller rectangle estimate the intersection area.
double monte_carlo_iou(const BoxLabel& a, const BoxLabel& b, std::size_t samples, std::mt19937_64& rng);

// Repeatedly take the best remaining box and discard everything overlapping it.
std::vector<BoxPrediction> brute_force_nms(std::vector<BoxPrediction> preds, double iou_thresh, double score_thresh);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t entries = 0;
    std::string worst_param;
    Index worst_entry = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    // Perturbations that flipped the sign of some ReLU input; their entries are not scored.
    std::size_t kink_crossings = 0;
};

// Central differences over every parameter entry against the reverse-mode gradients, with the
// assignment of the unperturbed forward held fixed. Relative error uses max(|a|, |n|, floor).
// Entries whose perturbation moves any ReLU input across zero are counted, not scored.
GradCheckReport finite_difference_check(Model& model, const SceneInput& scene, const AssignConfig& assign,
                                        double step = 1e-5, double floor = 1e-6);

// Smallest |pre-activation| over every ReLU in the forward graph.
double min_relu_margin(const Model& model, const SceneInput& scene);

}  // namespace slotgrid::oracle
