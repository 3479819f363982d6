#pragma once

#include "slotgrid/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace slotgrid::oracle {

struct CheckResult {
    std::string name;
    double max_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    double seconds = 0.0;
    std::string detail;
};

struct CheckOptions {
    std::uint64_t seed = 0;
    int attention_trials = 1000;
    int conv_trials = 500;
    int grad_scenes = 20;
    int assign_trials = 1000;
    int iou_pairs = 200;
    std::size_t iou_samples = 1000000;
    int reach_patterns = 100;
    // Perturbs one query weight on the library side of the attention comparison.
    bool inject_attention_fault = false;
};

CheckResult check_attention(const CheckOptions& options);
CheckResult check_conv(const CheckOptions& options);
CheckResult check_voxelize(const CheckOptions& options);
CheckResult check_gradients(const CheckOptions& options);
CheckResult check_assignment(const CheckOptions& options);
CheckResult check_adaptive_k_edges();
CheckResult check_iou_analytic();
CheckResult check_iou_monte_carlo(const CheckOptions& options);
CheckResult check_nms(const CheckOptions& options);
CheckResult check_global_reach(const CheckOptions& options);

// Every check above, in a fixed order.
std::vector<CheckResult> run_all_checks(const CheckOptions& options);

// Narrow default model used for gradient checks.
ModelConfig gradient_check_config();

// Random scene with exactly `voxels` occupied base cells and one to three boxes among them.
SceneInput random_small_scene(const ModelConfig& config, int voxels, std::uint64_t seed);

}  // namespace slotgrid::oracle
