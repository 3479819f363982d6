#include "slotgrid/config.hpp"
#include "slotgrid/parallel.hpp"
#include "slotgrid/training.hpp"
#include "slotgrid_oracles/checks.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace slotgrid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitCheckFailed = 2;

RunConfig config_from(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

void apply_thread_env() {
    const char* env = std::getenv("SLOTGRID_THREADS");
    if (!env) return;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*env == '\0' || *end != '\0' || n < 1 || n > 1024)
        throw ConfigError("SLOTGRID_THREADS must be an integer in [1, 1024], got '" + std::string(env) + "'");
    set_thread_count(static_cast<int>(n));
}

int cmd_gen(const RunConfig& cfg, fs::path out, int count, bool force) {
    if (count < 0) throw ConfigError("--count must be >= 0");
    if (fs::exists(out)) {
        if (!fs::is_directory(out)) throw Error(out.string() + " exists and is not a directory");
        if (!fs::is_empty(out)) {
            if (!force) throw Error(out.string() + " is not empty; pass --force to overwrite");
            fs::remove_all(out);
        }
    }
    fs::create_directories(out);
    const int digits = std::max<int>(4, static_cast<int>(std::to_string(std::max(count - 1, 0)).size()));
    for (int i = 0; i < count; ++i) {
        std::string name = std::to_string(i);
        name = "scene_" + std::string(static_cast<std::size_t>(digits) - name.size(), '0') + name;
        write_scene(out / name, generate_scene(cfg.scene_spec(static_cast<std::uint64_t>(i))));
    }
    std::printf("wrote %d scenes to %s\n", count, out.string().c_str());
    return kExitOk;
}

// Everything except the step budget and file locations must agree for a resume.
bool resumable(RunConfig a, RunConfig b) {
    a.train.steps = b.train.steps = 0;
    a.paths = b.paths = PathsConfig{};
    return to_text(a) == to_text(b);
}

int cmd_train(const RunConfig& cfg, const std::string& resume) {
    const std::vector<SceneInput> scenes = with_boxes(load_scene_inputs(cfg.paths.scene_dir, cfg.model.grid));
    std::optional<TrainState> state;
    if (resume.empty()) {
        state.emplace(cfg);
    } else {
        state.emplace(load_checkpoint(resume));
        if (!resumable(state->config, cfg))
            throw ConfigError("checkpoint " + resume + " was written with a different configuration");
        if (state->step > cfg.train.steps)
            throw ConfigError("checkpoint is at step " + std::to_string(state->step) + ", beyond train.steps");
        state->config = cfg;
    }

    std::ofstream metrics;
    if (resume.empty() || !fs::exists(cfg.paths.metrics)) {
        metrics.open(cfg.paths.metrics, std::ios::trunc);
        metrics << kMetricsHeader << '\n';
    } else {
        metrics.open(cfg.paths.metrics, std::ios::app);
    }
    if (!metrics) throw Error("cannot write metrics log " + cfg.paths.metrics);

    const long first = state->step;
    train_to_completion(*state, scenes, &metrics);
    metrics.flush();
    save_checkpoint(cfg.paths.checkpoint, *state);
    std::printf("trained steps %ld..%ld on %zu scenes; checkpoint %s\n", first + 1, state->step, scenes.size(),
                cfg.paths.checkpoint.c_str());
    return kExitOk;
}

void write_eval(const fs::path& path, const EvalResult& result) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << "class,iou_threshold,ap,num_gt,num_pred,true_positives\n";
    char line[160];
    for (const ClassEval& c : result.classes) {
        std::snprintf(line, sizeof line, "%d,%.2f,%.6f,%d,%d,%d\n", c.class_id, c.iou_threshold, c.ap, c.num_gt,
                      c.num_pred, c.true_positives);
        out << line;
    }
}

void print_eval(const EvalResult& result, const std::string& tag) {
    std::printf("variant %s\n%-6s %-8s %-8s %-7s %-8s %s\n", tag.c_str(), "class", "iou", "AP", "gt", "pred", "tp");
    for (const ClassEval& c : result.classes)
        std::printf("%-6d %-8.2f %-8.4f %-7d %-8d %d\n", c.class_id, c.iou_threshold, c.ap, c.num_gt, c.num_pred,
                    c.true_positives);
}

int cmd_eval(RunConfig cfg, const std::string& checkpoint, const std::string& scene_dir, const std::string& out,
             const std::string& ablate_assign, const std::string& ablate_partition) {
    const std::vector<SceneInput> scenes = load_scene_inputs(scene_dir, cfg.model.grid);
    fs::path out_path = out.empty() ? fs::path(cfg.paths.eval_out) : fs::path(out);

    if (ablate_assign.empty() && ablate_partition.empty()) {
        const TrainState state = load_checkpoint(checkpoint);
        const Model model(cfg.model, state.model.params());
        const EvalResult result = evaluate_model(model, scenes, cfg.eval);
        write_eval(out_path, result);
        print_eval(result, "checkpoint");
        return kExitOk;
    }

    std::string tag;
    if (!ablate_assign.empty()) {
        if (ablate_assign == "nearest") cfg.assign.candidates = 1;
        tag += "assign-" + ablate_assign;
    }
    if (!ablate_partition.empty()) {
        cfg.model.slotformer.partition = ablate_partition == "slot"     ? PartitionKind::Slot
                                         : ablate_partition == "window" ? PartitionKind::Window
                                                                        : PartitionKind::WindowSet;
        tag += (tag.empty() ? "" : "_") + std::string("partition-") + ablate_partition;
    }
    cfg.validate();
    // Variants are retrained from the same seed on the configured training scenes.
    const std::vector<SceneInput> train_scenes = with_boxes(load_scene_inputs(cfg.paths.scene_dir, cfg.model.grid));
    TrainState state(cfg);
    train_to_completion(state, train_scenes, nullptr);
    const EvalResult result = evaluate_model(state.model, scenes, cfg.eval);
    out_path.replace_filename(out_path.stem().string() + "_" + tag + out_path.extension().string());
    write_eval(out_path, result);
    print_eval(result, tag);
    std::printf("wrote %s\n", out_path.string().c_str());
    return kExitOk;
}

int cmd_check(std::uint64_t seed, bool quick, const std::string& fault) {
    oracle::CheckOptions options;
    options.seed = seed;
    options.inject_attention_fault = fault == "attention";
    if (quick) {
        options.attention_trials = 100;
        options.conv_trials = 50;
        options.grad_scenes = 2;
        options.assign_trials = 100;
        options.iou_pairs = 20;
        options.reach_patterns = 10;
    }
    bool ok = true;
    for (const auto& r : oracle::run_all_checks(options)) {
        std::printf("%-24s %s max_error=%.3e tolerance=%.1e time=%.2fs  %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL",
                    r.max_error, r.tolerance, r.seconds, r.detail.c_str());
        std::fflush(stdout);
        ok = ok && r.passed;
    }
    std::printf("%s\n", ok ? "all checks passed" : "some checks FAILED");
    return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse voxel detector: scene generation, training, evaluation and self-checks"};
    app.require_subcommand(1);
    std::string config_path;

    auto* gen = app.add_subcommand("gen", "Generate synthetic scenes");
    std::string gen_out;
    int gen_count = 20;
    bool gen_force = false;
    gen->add_option("--config", config_path, "Config file");
    gen->add_option("--out", gen_out, "Output directory (default paths.scene_dir)");
    gen->add_option("--count", gen_count, "Number of scenes");
    gen->add_flag("--force", gen_force, "Replace a non-empty output directory");

    auto* train = app.add_subcommand("train", "Train and write a checkpoint and metrics CSV");
    std::string resume;
    train->add_option("--config", config_path, "Config file");
    train->add_option("--resume", resume, "Continue from this checkpoint");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint or an ablation variant");
    std::string eval_ckpt, eval_scenes, eval_out, ablate_assign, ablate_partition;
    eval->add_option("--config", config_path, "Config file");
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint (default paths.checkpoint)");
    eval->add_option("--scenes", eval_scenes, "Scene directory (default paths.scene_dir)");
    eval->add_option("--out", eval_out, "Result CSV (default paths.eval_out)");
    eval->add_option("--ablate-assign", ablate_assign, "Retrain with this assignment")
        ->check(CLI::IsMember({"dsla", "nearest"}));
    eval->add_option("--ablate-partition", ablate_partition, "Retrain with this attention partition")
        ->check(CLI::IsMember({"slot", "window", "winset"}));

    auto* check = app.add_subcommand("check", "Run the oracle suite");
    std::uint64_t check_seed = 0;
    bool check_quick = false;
    std::string check_fault;
    check->add_option("--config", config_path, "Config file (unused beyond validation)");
    check->add_option("--seed", check_seed, "Seed for the random trials");
    check->add_flag("--quick", check_quick, "Run reduced trial counts");
    check->add_option("--inject-fault", check_fault, "Test mode: corrupt one comparison")
        ->check(CLI::IsMember({"attention"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        apply_thread_env();
        const RunConfig cfg = config_from(config_path);
        if (*gen) return cmd_gen(cfg, gen_out.empty() ? cfg.paths.scene_dir : gen_out, gen_count, gen_force);
        if (*train) return cmd_train(cfg, resume);
        if (*eval)
            return cmd_eval(cfg, eval_ckpt.empty() ? cfg.paths.checkpoint : eval_ckpt,
                            eval_scenes.empty() ? cfg.paths.scene_dir : eval_scenes, eval_out, ablate_assign,
                            ablate_partition);
        if (*check) return cmd_check(check_seed, check_quick, check_fault);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInvalid;
    }
    return kExitInvalid;
}
