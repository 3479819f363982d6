#include "slotgrid/adam.hpp"

#include <cmath>

namespace slotgrid {

void adam_step(std::span<MatrixXd> params, std::span<const MatrixXd> grads, OptimizerState& state) {
    if (params.size() != grads.size()) throw DimensionMismatch("parameter and gradient counts differ");
    if (state.first_moment.empty()) {
        for (const MatrixXd& p : params) {
            state.first_moment.push_back(MatrixXd::Zero(p.rows(), p.cols()));
            state.second_moment.push_back(MatrixXd::Zero(p.rows(), p.cols()));
        }
    }
    if (state.first_moment.size() != params.size()) throw DimensionMismatch("optimizer state does not match parameters");
    const AdamConfig& c = state.config;
    ++state.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        MatrixXd& p = params[i];
        if (grads[i].rows() != p.rows() || grads[i].cols() != p.cols() ||
            state.first_moment[i].rows() != p.rows() || state.first_moment[i].cols() != p.cols())
            throw DimensionMismatch("gradient shape does not match parameter");
        MatrixXd g = grads[i];
        if (c.weight_decay != 0.0) g += c.weight_decay * p;
        MatrixXd& m = state.first_moment[i];
        MatrixXd& v = state.second_moment[i];
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseAbs2();
        p.array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
    }
}

}  // namespace slotgrid
