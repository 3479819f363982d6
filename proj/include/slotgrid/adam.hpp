#pragma once

#include "slotgrid/types.hpp"

#include <span>
#include <vector>

namespace slotgrid {

struct AdamConfig {
    double lr = 0.003;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct OptimizerState {
    AdamConfig config;
    long step = 0;
    std::vector<MatrixXd> first_moment;
    std::vector<MatrixXd> second_moment;
};

// Bias-corrected Adam update in place. Moments are allocated on the first call.
// weight_decay adds an L2 term to the gradient.
void adam_step(std::span<MatrixXd> params, std::span<const MatrixXd> grads, OptimizerState& state);

}  // namespace slotgrid
