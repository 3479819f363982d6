// Acceptance run: one PASS/FAIL line per criterion.
#include "slotgrid/parallel.hpp"
#include "slotgrid/training.hpp"
#include "slotgrid_oracles/checks.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace slotgrid;

namespace {

struct Line {
    int id = 0;
    bool passed = false;
    std::string summary;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

// Folds oracle checks into one criterion with a wall-clock budget.
Line from_checks(int id, const std::vector<oracle::CheckResult>& checks, double budget) {
    Line line{id, true, ""};
    double total = 0.0;
    for (const auto& c : checks) {
        line.passed = line.passed && c.passed;
        total += c.seconds;
        line.summary += fmt("%s err=%.2e tol=%.0e%s; ", c.name.c_str(), c.max_error, c.tolerance, c.passed ? "" : " FAILED");
    }
    line.passed = line.passed && total <= budget;
    line.summary += fmt("%.1fs (budget %.0fs)", total, budget);
    return line;
}

std::vector<SceneInput> make_scenes(const RunConfig& cfg, int first, int count) {
    std::vector<SceneInput> out;
    for (int i = first; i < first + count; ++i)
        out.push_back(prepare_scene(generate_scene(cfg.scene_spec(static_cast<std::uint64_t>(i))), cfg.model.grid));
    return out;
}

double ap50(const EvalResult& r, int cls) {
    const ClassEval* c = r.find(cls, 0.5);
    return c ? c->ap : 0.0;
}

Line criterion_overfit() {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg;
    cfg.adam.lr = 0.001;
    cfg.train.steps = 2000;
    const auto scenes = with_boxes(make_scenes(cfg, 0, 20));
    TrainState state(cfg);
    train_to_completion(state, scenes, nullptr);
    const EvalResult r = evaluate_model(state.model, scenes, cfg.eval);
    const double car = ap50(r, 0), ped = ap50(r, 1), secs = seconds_since(t0);
    return {6, car >= 0.8 && ped >= 0.8 && secs <= 900.0,
            fmt("AP@0.5 car=%.3f pedestrian=%.3f (min 0.8) after 2000 steps on %zu scenes, %.0fs (budget 900s)", car, ped,
                scenes.size(), secs)};
}

struct AblationSeed {
    double dsla = 0.0, nearest = 0.0, encoder_only = 0.0;
};

constexpr int kBenchmarkScenes = 200;
constexpr int kBenchmarkTrain = 160;
constexpr long kAblationSteps = 3000;
constexpr double kAblationLr = 0.001;

AblationSeed run_ablation_seed(int seed) {
    RunConfig base;
    base.scene.seed = 500 + static_cast<std::uint64_t>(seed);
    base.train.seed = static_cast<std::uint64_t>(seed);
    base.train.steps = kAblationSteps;
    base.adam.lr = kAblationLr;
    const auto all = make_scenes(base, 0, kBenchmarkScenes);
    const std::vector<SceneInput> train = with_boxes({all.begin(), all.begin() + kBenchmarkTrain});
    const std::vector<SceneInput> test(all.begin() + kBenchmarkTrain, all.end());

    auto score = [&](const RunConfig& cfg) {
        TrainState state(cfg);
        train_to_completion(state, train, nullptr);
        return mean_ap(evaluate_model(state.model, test, cfg.eval), 0.5);
    };
    AblationSeed out;
    out.dsla = score(base);
    RunConfig nearest = base;
    nearest.assign.candidates = 1;
    out.nearest = score(nearest);
    RunConfig encoder_only = base;
    encoder_only.model.slotformer.num_layers = 0;
    out.encoder_only = score(encoder_only);
    return out;
}

Line criterion_ablations(int seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    double dsla_sum = 0.0, nearest_sum = 0.0;
    int dsla_wins = 0, former_wins = 0;
    std::string per_seed;
    for (int s = 0; s < seeds; ++s) {
        const AblationSeed r = run_ablation_seed(s);
        dsla_sum += r.dsla;
        nearest_sum += r.nearest;
        dsla_wins += r.dsla > r.nearest ? 1 : 0;
        former_wins += r.dsla > r.encoder_only ? 1 : 0;
        per_seed += fmt(" [%d: %.3f/%.3f/%.3f]", s, r.dsla, r.nearest, r.encoder_only);
        std::fprintf(stderr, "ablation seed %d: dsla %.4f nearest %.4f encoder-only %.4f\n", s, r.dsla, r.nearest,
                     r.encoder_only);
    }
    const int need = (7 * seeds + 9) / 10;
    const double dsla_mean = dsla_sum / seeds, nearest_mean = nearest_sum / seeds;
    const double secs = seconds_since(t0);
    const bool a = dsla_mean >= nearest_mean - 0.01 && dsla_wins >= need;
    const bool b = former_wins >= need;
    return {7, a && b,
            fmt("(a) %s mean AP@0.5 DSLA=%.4f nearest=%.4f, DSLA higher in %d/%d seeds (need %d); "
                "(b) %s SlotFormer higher than encoder-only in %d/%d seeds; %.0fs; dsla/nearest/encoder-only:%s",
                a ? "pass" : "FAIL", dsla_mean, nearest_mean, dsla_wins, seeds, need, b ? "pass" : "FAIL", former_wins,
                seeds, secs, per_seed.c_str())};
}

std::string loss_columns(const fs::path& csv) {
    std::ifstream in(csv);
    std::ostringstream out;
    std::string row;
    while (std::getline(in, row)) out << row.substr(0, row.rfind(',')) << '\n';
    return out.str();
}

Line criterion_determinism(const std::string& cli) {
    const fs::path work = fs::temp_directory_path() / "slotgrid_acceptance_determinism";
    fs::remove_all(work);
    fs::create_directories(work);
    {
        std::ofstream cfg(work / "run.cfg");
        cfg << "train.steps = 100\n"
            << "paths.scene_dir = " << (work / "scenes").string() << '\n'
            << "paths.checkpoint = " << (work / "model.ckpt").string() << '\n'
            << "paths.metrics = " << (work / "metrics.csv").string() << '\n';
    }
    auto run = [&](const std::string& command) { return std::system(command.c_str()) == 0; };
    const std::string base = "\"" + cli + "\" ";
    const std::string config = " --config \"" + (work / "run.cfg").string() + "\"";
    bool ok = run(base + "gen" + config + " --count 8 --out \"" + (work / "scenes").string() + "\" > /dev/null");
    std::vector<std::string> logs;
    std::vector<std::string> checkpoints;
    for (const char* threads : {"1", "1", "4"}) {
        ok = ok && run(std::string("SLOTGRID_THREADS=") + threads + " " + base + "train" + config + " > /dev/null");
        logs.push_back(loss_columns(work / "metrics.csv"));
        std::ifstream ck(work / "model.ckpt", std::ios::binary);
        checkpoints.emplace_back(std::istreambuf_iterator<char>(ck), std::istreambuf_iterator<char>());
    }
    const bool same = ok && logs[0] == logs[1] && logs[0] == logs[2] && checkpoints[0] == checkpoints[1] &&
                      checkpoints[0] == checkpoints[2] && std::count(logs[0].begin(), logs[0].end(), '\n') == 101;
    fs::remove_all(work);
    return {9, same,
            fmt("100-step train runs at SLOTGRID_THREADS 1, 1, 4: loss columns %s, checkpoints %s",
                same ? "bit-identical" : "DIFFER", same ? "bit-identical" : "DIFFER")};
}

void print(const Line& line) {
    std::printf("criterion %d: %s  %s\n", line.id, line.passed ? "PASS" : "FAIL", line.summary.c_str());
    std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string cli;
    std::vector<int> only;
    int seeds = 10;
    std::uint64_t seed = 20261016;
    app.add_option("--cli", cli, "Path to the slotgrid executable")->required();
    app.add_option("--only", only, "Run only these criteria");
    app.add_option("--ablation-seeds", seeds, "Seeds for the ablation benchmark")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "Seed for the oracle checks");
    CLI11_PARSE(app, argc, argv);

    const std::set<int> selected(only.begin(), only.end());
    auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };
    oracle::CheckOptions options;
    options.seed = seed;

    std::vector<std::pair<int, std::function<std::vector<Line>()>>> criteria{
        {1, [&] { return std::vector<Line>{from_checks(1, {oracle::check_attention(options)}, 10.0)}; }},
        {2, [&] { return std::vector<Line>{from_checks(2, {oracle::check_conv(options)}, 30.0)}; }},
        {3, [&] { return std::vector<Line>{from_checks(3, {oracle::check_gradients(options)}, 300.0)}; }},
        {4, [&] {
             return std::vector<Line>{
                 from_checks(4, {oracle::check_assignment(options), oracle::check_adaptive_k_edges()}, 30.0)};
         }},
        {5, [&] {
             return std::vector<Line>{
                 from_checks(5, {oracle::check_iou_analytic(), oracle::check_iou_monte_carlo(options)}, 60.0)};
         }},
        {6, [&] { return std::vector<Line>{criterion_overfit()}; }},
        {7, [&] { return std::vector<Line>{criterion_ablations(seeds)}; }},
        {8, [&] { return std::vector<Line>{from_checks(8, {oracle::check_global_reach(options)}, 60.0)}; }},
        {9, [&] { return std::vector<Line>{criterion_determinism(cli)}; }},
    };

    bool all = true;
    for (auto& [id, run] : criteria) {
        if (!wanted(id)) continue;
        try {
            for (const Line& line : run()) {
                print(line);
                all = all && line.passed;
            }
        } catch (const std::exception& e) {
            print({id, false, std::string("error: ") + e.what()});
            all = false;
        }
    }
    std::printf("%s\n", all ? "acceptance: all selected criteria passed" : "acceptance: FAILED");
    return all ? 0 : 1;
}
