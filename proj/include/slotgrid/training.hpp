#pragma once

#include "slotgrid/config.hpp"
#include "slotgrid/eval.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace slotgrid {

/// Model, optimizer and batch sampler: everything needed to continue a run bit-exactly.
struct TrainState {
    RunConfig config;
    Model model;
    OptimizerState optimizer;
    std::mt19937_64 rng;
    long step = 0;  // completed steps

    explicit TrainState(const RunConfig& config);
    TrainState(RunConfig config, Model model, OptimizerState optimizer, std::mt19937_64 rng, long step);
};

struct StepRecord {
    long step = 0;
    LossBreakdown losses;
    double seconds = 0.0;
};

// Draws a batch uniformly with replacement and runs one optimizer step.
StepRecord train_one_step(TrainState& state, std::span<const SceneInput> scenes);

// Loads every scene directory under `root`; throws when there is none.
std::vector<SceneInput> load_scene_inputs(const std::filesystem::path& root, const GridSpec& grid);

// Drops scenes without boxes, which a training step rejects; throws if none remain.
std::vector<SceneInput> with_boxes(std::vector<SceneInput> scenes);

inline constexpr const char* kMetricsHeader = "step,cls_loss,reg_loss,total_loss,seconds";
std::string format_metrics_row(const StepRecord& record);

// Runs state.config.train.steps - state.step further steps. Each step's row goes to `metrics`
// when given.
void train_to_completion(TrainState& state, std::span<const SceneInput> scenes, std::ostream* metrics);

// Detections on every scene scored against their boxes.
EvalResult evaluate_model(const Model& model, std::span<const SceneInput> scenes, const EvalConfig& eval);

// Mean AP over classes with ground truth at one IoU threshold; 0 when no class has any.
double mean_ap(const EvalResult& result, double iou_threshold);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const TrainState& state);
TrainState read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace slotgrid
