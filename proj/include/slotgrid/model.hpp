#pragma once

#include "slotgrid/adam.hpp"
#include "slotgrid/assign.hpp"
#include "slotgrid/autodiff.hpp"
#include "slotgrid/head.hpp"
#include "slotgrid/scene.hpp"
#include "slotgrid/slotformer.hpp"
#include "slotgrid/upsample.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace slotgrid {

/// Voxelizer -> [subm3, subm3, sparse3 s2] x depth -> SlotFormer stack -> sparse upsample -> head.
struct ModelConfig {
    GridSpec grid{0.0, 0.0, 0.16, 0.16, 160, 160, 1};
    int vfe_channels = 16;
    int encoder_depth = 2;
    SlotFormerConfig slotformer;
    UpsampleStrategy upsample = UpsampleStrategy::SpSu;
    int num_classes = 2;

    int encoder_channels() const { return vfe_channels << encoder_depth; }
    int ffn_hidden() const { return slotformer.ffn_hidden > 0 ? slotformer.ffn_hidden : 2 * encoder_channels(); }
    void validate() const;
};

/// Named, ordered parameter tensors.
class ParameterSet {
public:
    std::size_t add(std::string name, MatrixXd value);
    std::size_t size() const { return values_.size(); }
    const std::string& name(std::size_t i) const { return names_[i]; }
    MatrixXd& operator[](std::size_t i) { return values_[i]; }
    const MatrixXd& operator[](std::size_t i) const { return values_[i]; }
    std::size_t index_of(const std::string& name) const;
    std::span<MatrixXd> values() { return values_; }
    std::span<const MatrixXd> values() const { return values_; }
    std::size_t scalar_count() const;

private:
    std::vector<std::string> names_;
    std::vector<MatrixXd> values_;
    std::map<std::string, std::size_t> index_;
};

struct LossBreakdown {
    double cls = 0.0;
    double reg = 0.0;
    double total = 0.0;
};

/// A scene prepared for the network: mean-pooled raw voxels plus its boxes.
struct SceneInput {
    SparseTensor<double> raw;
    std::vector<BoxLabel> boxes;
};

SceneInput prepare_scene(const Scene& scene, const GridSpec& grid);

class Model {
public:
    Model(ModelConfig config, std::uint64_t seed);
    Model(ModelConfig config, ParameterSet params);

    const ModelConfig& config() const { return config_; }
    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }

    struct Graph {
        std::vector<ad::Var> params;  // aligned with ParameterSet
        ad::Var scores;               // N x K, logistic
        ad::Var encodings;            // N x 8
        SparseLayout layout;          // head voxels
    };

    // Records the forward pass on `tape`. Parameters become variables when `trainable`.
    Graph forward(ad::Tape& tape, const SparseTensor<double>& raw, bool trainable) const;

    struct Output {
        MatrixXd scores;
        MatrixXd encodings;
        SparseLayout layout;
    };
    Output infer(const SparseTensor<double>& raw) const;

    // Decoded per-voxel predictions after score filtering and NMS.
    std::vector<BoxPrediction> detect(const SparseTensor<double>& raw, double nms_iou, double score_thresh) const;

private:
    ModelConfig config_;
    ParameterSet params_;
};

struct SceneLoss {
    LossBreakdown losses;
    AssignmentResult assignment;
    std::vector<MatrixXd> grads;  // empty unless requested
};

/// Loss of one scene: focal classification against the heatmap targets plus
/// lambda * mean rotation-weighted IoU loss over positives. The assignment runs on detached
/// predictions, or is taken from `fixed` when given.
SceneLoss scene_loss(const Model& model, const SceneInput& scene, const AssignConfig& assign,
                     const AssignmentResult* fixed, bool want_grads);
// Same, recording onto a caller-owned tape so the intermediate values stay inspectable.
SceneLoss scene_loss(ad::Tape& tape, const Model& model, const SceneInput& scene, const AssignConfig& assign,
                     const AssignmentResult* fixed, bool want_grads);

struct TrainStepOptions {
    bool grad_check = false;   // read-only finite-difference probe of a few parameter entries
    int grad_check_samples = 8;
    std::uint64_t grad_check_seed = 0;
};

struct TrainStepResult {
    LossBreakdown losses;        // mean over the batch
    double grad_check_error = 0.0;
};

/// Forward + assignment + backward over a batch, then one Adam step.
TrainStepResult train_step(Model& model, std::span<const SceneInput* const> batch, const AssignConfig& assign,
                           OptimizerState& opt, const TrainStepOptions& options = {});

}  // namespace slotgrid
