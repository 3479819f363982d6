#include "slotgrid/training.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace slotgrid {

TrainState::TrainState(const RunConfig& cfg)
    : config(cfg), model(cfg.model, cfg.train.seed), rng(mix_seed(cfg.train.seed, 1)) {
    optimizer.config = cfg.adam;
}

TrainState::TrainState(RunConfig cfg, Model m, OptimizerState opt, std::mt19937_64 r, long s)
    : config(std::move(cfg)), model(std::move(m)), optimizer(std::move(opt)), rng(r), step(s) {}

StepRecord train_one_step(TrainState& state, std::span<const SceneInput> scenes) {
    if (scenes.empty()) throw EmptyInput("no training scenes");
    const auto start = std::chrono::steady_clock::now();
    std::vector<const SceneInput*> batch;
    for (int b = 0; b < state.config.train.batch_size; ++b)
        batch.push_back(&scenes[static_cast<std::size_t>(state.rng() % scenes.size())]);
    const TrainStepResult r = train_step(state.model, batch, state.config.assign, state.optimizer);
    ++state.step;
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {state.step, r.losses, seconds};
}

std::vector<SceneInput> load_scene_inputs(const std::filesystem::path& root, const GridSpec& grid) {
    if (!std::filesystem::is_directory(root)) throw Error("scene directory " + root.string() + " does not exist");
    std::vector<SceneInput> scenes;
    for (const auto& dir : list_scene_dirs(root)) scenes.push_back(prepare_scene(read_scene(dir), grid));
    if (scenes.empty()) throw EmptyInput("no scenes found in " + root.string());
    return scenes;
}

std::vector<SceneInput> with_boxes(std::vector<SceneInput> scenes) {
    std::erase_if(scenes, [](const SceneInput& s) { return s.boxes.empty(); });
    if (scenes.empty()) throw EmptyInput("no scene has ground-truth boxes");
    return scenes;
}

std::string format_metrics_row(const StepRecord& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.6f", r.step, r.losses.cls, r.losses.reg, r.losses.total,
                  r.seconds);
    return buf;
}

void train_to_completion(TrainState& state, std::span<const SceneInput> scenes, std::ostream* metrics) {
    while (state.step < state.config.train.steps) {
        const StepRecord record = train_one_step(state, scenes);
        if (metrics) *metrics << format_metrics_row(record) << '\n';
    }
}

EvalResult evaluate_model(const Model& model, std::span<const SceneInput> scenes, const EvalConfig& eval) {
    std::vector<std::vector<BoxPrediction>> preds;
    std::vector<std::vector<BoxLabel>> gts;
    for (const SceneInput& scene : scenes) {
        preds.push_back(model.detect(scene.raw, eval.nms_iou, eval.score_thresh));
        gts.push_back(scene.boxes);
    }
    return evaluate(preds, gts, eval.iou_thresholds, model.config().num_classes);
}

double mean_ap(const EvalResult& result, double iou_threshold) {
    double sum = 0.0;
    int n = 0;
    for (const ClassEval& c : result.classes)
        if (c.iou_threshold == iou_threshold) {
            sum += c.ap;
            ++n;
        }
    return n ? sum / n : 0.0;
}

namespace {

constexpr char kMagic[8] = {'S', 'G', 'C', 'K', 'P', 'T', '\0', '\0'};
constexpr char kTrailer[4] = {'E', 'N', 'D', '\0'};

template <typename T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof value);
    if (!in) throw Error("checkpoint is truncated");
    return value;
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    const auto n = get<std::uint64_t>(in);
    if (n > (1ULL << 32)) throw Error("checkpoint string length is implausible");
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw Error("checkpoint is truncated");
    return s;
}

void put_matrix(std::ostream& out, const MatrixXd& m) {
    put<std::int64_t>(out, m.rows());
    put<std::int64_t>(out, m.cols());
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

MatrixXd get_matrix(std::istream& in) {
    const auto rows = get<std::int64_t>(in);
    const auto cols = get<std::int64_t>(in);
    if (rows < 0 || cols < 0 || rows * cols > (1LL << 32)) throw Error("checkpoint tensor shape is implausible");
    MatrixXd m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw Error("checkpoint is truncated");
    return m;
}

}  // namespace

void write_checkpoint(std::ostream& out, const TrainState& state) {
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put_string(out, to_text(state.config));
    put<std::int64_t>(out, state.step);

    const ParameterSet& params = state.model.params();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        put_string(out, params.name(i));
        put_matrix(out, params[i]);
    }

    const OptimizerState& opt = state.optimizer;
    put<std::int64_t>(out, opt.step);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(opt.first_moment.size()));
    for (const auto& m : opt.first_moment) put_matrix(out, m);
    for (const auto& m : opt.second_moment) put_matrix(out, m);

    std::ostringstream rng;
    rng << state.rng;
    put_string(out, rng.str());
    out.write(kTrailer, sizeof kTrailer);
    if (!out) throw Error("failed to write checkpoint");
}

TrainState read_checkpoint(std::istream& in) {
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw Error("not a slotgrid checkpoint");
    const auto version = get<std::uint32_t>(in);
    if (version != kCheckpointVersion)
        throw Error("unsupported checkpoint version " + std::to_string(version));
    RunConfig config = parse_config_text(get_string(in));
    const auto step = get<std::int64_t>(in);

    ParameterSet params;
    const auto count = get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = get_string(in);
        params.add(std::move(name), get_matrix(in));
    }
    Model model(config.model, std::move(params));

    OptimizerState opt;
    opt.config = config.adam;
    opt.step = get<std::int64_t>(in);
    const auto moments = get<std::uint32_t>(in);
    if (moments != 0 && moments != count) throw Error("checkpoint optimizer state does not match the parameters");
    for (std::uint32_t i = 0; i < moments; ++i) opt.first_moment.push_back(get_matrix(in));
    for (std::uint32_t i = 0; i < moments; ++i) opt.second_moment.push_back(get_matrix(in));
    for (std::uint32_t i = 0; i < moments; ++i)
        if (opt.first_moment[i].rows() != model.params()[i].rows() ||
            opt.first_moment[i].cols() != model.params()[i].cols() ||
            opt.second_moment[i].rows() != model.params()[i].rows() ||
            opt.second_moment[i].cols() != model.params()[i].cols())
            throw DimensionMismatch("checkpoint optimizer moment shape mismatch for " + model.params().name(i));

    std::mt19937_64 rng;
    std::istringstream rng_text(get_string(in));
    rng_text >> rng;
    if (!rng_text) throw Error("checkpoint RNG state is malformed");
    char trailer[sizeof kTrailer];
    in.read(trailer, sizeof trailer);
    if (!in || std::memcmp(trailer, kTrailer, sizeof kTrailer) != 0) throw Error("checkpoint trailer missing");
    return TrainState(std::move(config), std::move(model), std::move(opt), rng, step);
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write checkpoint " + path.string());
        write_checkpoint(out, state);
    }
    std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

}  // namespace slotgrid
