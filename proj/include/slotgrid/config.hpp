#pragma once

#include "slotgrid/adam.hpp"
#include "slotgrid/assign.hpp"
#include "slotgrid/model.hpp"
#include "slotgrid/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace slotgrid {

class ConfigError : public Error {
public:
    using Error::Error;
};

struct TrainConfig {
    int steps = 2000;
    int batch_size = 1;
    std::uint64_t seed = 0;  // parameter init and batch order
};

struct EvalConfig {
    std::vector<double> iou_thresholds{0.5, 0.7};
    double nms_iou = 0.1;
    double score_thresh = 0.1;
};

struct PathsConfig {
    std::string scene_dir = "scenes";
    std::string checkpoint = "model.ckpt";
    std::string metrics = "metrics.csv";
    std::string eval_out = "eval.csv";
};

/// Everything a run needs. The scene generator shares the model grid's origin and extent.
struct RunConfig {
    ModelConfig model;
    AssignConfig assign;
    AdamConfig adam;
    TrainConfig train;
    EvalConfig eval;
    SceneSpec scene;
    PathsConfig paths;

    void validate() const;

    // Scene spec for the i-th generated scene.
    SceneSpec scene_spec(std::uint64_t index) const;
};

/// Flat `section.key = value` lines; `#` starts a comment. Keys not listed in the file keep
/// their defaults. Unknown keys, duplicates and malformed values throw ConfigError naming
/// the key.
RunConfig parse_config(std::istream& in);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its current value; parse_config_text(to_text(c)) reproduces c exactly.
std::string to_text(const RunConfig& config);

std::vector<std::string> config_keys();

// Stateless 64-bit mixer for deriving independent seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace slotgrid
