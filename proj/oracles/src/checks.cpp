#include "slotgrid_oracles/checks.hpp"

#include "slotgrid_oracles/oracles.hpp"

#include "slotgrid/config.hpp"
#include "slotgrid/eval.hpp"
#include "slotgrid/upsample.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace slotgrid::oracle {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

MatrixXd gaussian(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    MatrixXd m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
}

// `count` distinct cells of a width x height grid, in canonical order.
std::vector<Coord> random_cells(std::mt19937_64& rng, int width, int height, int count) {
    std::set<Coord> cells;
    while (static_cast<int>(cells.size()) < count)
        cells.insert({uniform_int(rng, 0, width - 1), uniform_int(rng, 0, height - 1)});
    return {cells.begin(), cells.end()};
}

SparseTensor<double> random_tensor(std::mt19937_64& rng, const GridSpec& grid, int count, Index channels) {
    std::vector<Coord> coords = random_cells(rng, grid.width, grid.height, count);
    const Index n = static_cast<Index>(coords.size());
    return SparseTensor<double>(SparseLayout(grid, std::move(coords)), gaussian(rng, n, channels));
}

ConvKernel<double> random_kernel(std::mt19937_64& rng, int k, Index cin, Index cout, ConvMode mode, int stride) {
    ConvKernel<double> kernel = ConvKernel<double>::zeros(k, cin, cout, mode, stride);
    kernel.weights = gaussian(rng, kernel.weights.rows(), cout, 1.0 / std::sqrt(static_cast<double>(k * k * cin)));
    kernel.bias = gaussian(rng, 1, cout);
    return kernel;
}

MatrixXd plain_matmul(const MatrixXd& a, const MatrixXd& b) {
    MatrixXd out = MatrixXd::Zero(a.rows(), b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index k = 0; k < a.cols(); ++k)
            for (Index j = 0; j < b.cols(); ++j) out(i, j) += a(i, k) * b(k, j);
    return out;
}

MatrixXd plain_relu(MatrixXd m) {
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = m.data()[i] > 0.0 ? m.data()[i] : 0.0;
    return m;
}

CheckResult finish(std::string name, double error, double tolerance, Clock::time_point start, std::string detail = {}) {
    CheckResult r;
    r.name = std::move(name);
    r.max_error = error;
    r.tolerance = tolerance;
    r.passed = std::isfinite(error) && error <= tolerance;
    r.seconds = elapsed(start);
    r.detail = std::move(detail);
    return r;
}

BoxLabel random_box(std::mt19937_64& rng, double cx, double cy, int cls) {
    const auto classes = SceneSpec::default_classes();
    const ObjectClassSpec& c = classes[static_cast<std::size_t>(cls)];
    BoxLabel b;
    b.cx = cx;
    b.cy = cy;
    b.l = uniform(rng, c.l_min, c.l_max);
    b.w = uniform(rng, c.w_min, c.w_max);
    b.h = uniform(rng, c.h_min, c.h_max);
    b.cz = 0.5 * b.h;
    b.yaw = uniform(rng, -std::numbers::pi, std::numbers::pi);
    b.class_id = cls;
    return b;
}

}  // namespace

CheckResult check_attention(const CheckOptions& options) {
    const auto start = Clock::now();
    std::mt19937_64 rng(mix_seed(options.seed, 101));
    const double eps = 1e-6;
    double worst = 0.0;
    for (int trial = 0; trial < options.attention_trials; ++trial) {
        const int width = uniform_int(rng, 1, 64), height = uniform_int(rng, 1, 64);
        const int n = uniform_int(rng, 1, std::min(200, width * height));
        const Index c = uniform_int(rng, 1, 32);
        const int slot_width = uniform_int(rng, 1, 16);
        const SlotAxis axis = uniform_int(rng, 0, 1) == 0 ? SlotAxis::X : SlotAxis::Y;
        const GridSpec grid{0.0, 0.0, 0.16, 0.16, width, height, 1};
        const SparseTensor<double> x = random_tensor(rng, grid, n, c);
        const auto params = AttentionParams<double>::random(c, 2 * c, rng);

        AttentionParams<double> tested = params;
        if (options.inject_attention_fault) tested.w_q(0, 0) += 1e-3;
        const MatrixXd actual =
            attention_update(x.features(), slot_partition(x.layout(), axis, slot_width).grouping(), tested, eps);

        std::vector<Index> slot_of;
        for (const Coord& cell : x.coords()) slot_of.push_back(axis == SlotAxis::X ? cell.iy / slot_width : cell.ix / slot_width);
        const MatrixXd q = plain_relu(plain_matmul(x.features(), params.w_q));
        const MatrixXd k = plain_relu(plain_matmul(x.features(), params.w_k));
        const MatrixXd v = plain_matmul(x.features(), params.w_v);
        const MatrixXd expected = plain_matmul(explicit_attention(q, k, v, slot_of, eps), params.w_out);
        const double scale = expected.size() ? expected.cwiseAbs().maxCoeff() : 0.0;
        worst = std::max(worst, max_relative_error(actual, expected, std::max(1e-4 * scale, 1e-300)));
    }
    return finish("attention_oracle", worst, 1e-10, start,
                  std::to_string(options.attention_trials) + " random slots" +
                      (options.inject_attention_fault ? ", fault injected" : ""));
}

CheckResult check_conv(const CheckOptions& options) {
    const auto start = Clock::now();
    std::mt19937_64 rng(mix_seed(options.seed, 102));
    double worst = 0.0;
    for (int trial = 0; trial < options.conv_trials; ++trial) {
        const int width = uniform_int(rng, 1, 16), height = uniform_int(rng, 1, 16);
        const GridSpec grid{0.0, 0.0, 0.16, 0.16, width, height, 1};
        const Index cin = uniform_int(rng, 1, 6), cout = uniform_int(rng, 1, 6);
        const int k = 2 * uniform_int(rng, 0, 2) + 1;
        const SparseTensor<double> x = random_tensor(rng, grid, uniform_int(rng, 1, width * height), cin);

        const auto subm = random_kernel(rng, k, cin, cout, ConvMode::Submanifold, 1);
        worst = std::max(worst, compare_sparse(submanifold_conv(x, subm), dense_submanifold(x, subm)));
        for (int stride : {1, 2}) {
            const auto reg = random_kernel(rng, k, cin, cout, ConvMode::Regular, stride);
            worst = std::max(worst, compare_sparse(sparse_conv(x, reg), dense_regular(x, reg)));
        }

        const int cw = uniform_int(rng, 1, 8), ch = uniform_int(rng, 1, 8);
        const GridSpec coarse{0.0, 0.0, 0.16, 0.16, cw, ch, 2};
        const SparseTensor<double> y = random_tensor(rng, coarse, uniform_int(rng, 1, cw * ch), cin);
        const auto up = random_kernel(rng, 3, cin, cout, ConvMode::Regular, 1);
        worst = std::max(worst, compare_sparse(upsample(y, up, UpsampleStrategy::SpSu), dense_upsample_sp(y, up)));
        auto sm = up;
        sm.mode = ConvMode::Submanifold;
        worst = std::max(worst, compare_sparse(upsample(y, sm, UpsampleStrategy::SmSu), dense_upsample_sm(y, sm)));
    }
    return finish("conv_dense_oracle", worst, 1e-6, start,
                  std::to_string(options.conv_trials) + " patterns x (submanifold, regular s1/s2, SP-SU, SM-SU)");
}

CheckResult check_voxelize(const CheckOptions& options) {
    const auto start = Clock::now();
    std::mt19937_64 rng(mix_seed(options.seed, 103));
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const GridSpec grid{uniform(rng, -2, 2), uniform(rng, -2, 2), 0.16, 0.16, uniform_int(rng, 1, 20),
                            uniform_int(rng, 1, 20), 1};
        std::vector<Point> points;
        const int n = uniform_int(rng, 1, 300);
        for (int i = 0; i < n; ++i)
            points.push_back({uniform(rng, grid.origin_x - 0.5, grid.origin_x + grid.width * 0.16 + 0.5),
                              uniform(rng, grid.origin_y - 0.5, grid.origin_y + grid.height * 0.16 + 0.5),
                              uniform(rng, -1, 3), uniform(rng, 0, 1)});
        const auto buckets = bucket_points(points, grid);
        if (buckets.empty()) continue;
        const SparseTensor<double> t = voxelize_raw(points, grid);
        if (static_cast<std::size_t>(t.size()) != buckets.size()) {
            worst = std::numeric_limits<double>::infinity();
            continue;
        }
        for (Index r = 0; r < t.size(); ++r) {
            auto it = buckets.find({t.coords()[r].ix, t.coords()[r].iy});
            if (it == buckets.end()) {
                worst = std::numeric_limits<double>::infinity();
                break;
            }
            for (Index c = 0; c < 4; ++c)
                worst = std::max(worst, std::abs(t.features()(r, c) - it->second.mean(c)));
        }
    }
    return finish("voxelize_oracle", worst, 1e-12, start, "100 random point clouds");
}

ModelConfig gradient_check_config() {
    ModelConfig cfg;
    cfg.vfe_channels = 4;
    return cfg;
}

SceneInput random_small_scene(const ModelConfig& config, int voxels, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const GridSpec& grid = config.grid;
    const int span = 12;
    const int x0 = uniform_int(rng, 0, std::max(0, grid.width - span));
    const int y0 = uniform_int(rng, 0, std::max(0, grid.height - span));
    std::vector<Coord> cells = random_cells(rng, std::min(span, grid.width), std::min(span, grid.height), voxels);
    MatrixXd f(static_cast<Index>(cells.size()), kRawVoxelFeatures);
    for (Index r = 0; r < f.rows(); ++r) {
        cells[static_cast<std::size_t>(r)].ix += x0;
        cells[static_cast<std::size_t>(r)].iy += y0;
        f.row(r) << uniform(rng, -0.08, 0.08), uniform(rng, -0.08, 0.08), uniform(rng, 0.0, 1.8), uniform(rng, 0.0, 1.0);
    }
    SceneInput scene{SparseTensor<double>(SparseLayout(grid, cells), std::move(f)), {}};
    const int boxes = uniform_int(rng, 1, 3);
    for (int b = 0; b < boxes; ++b) {
        const Coord& at = cells[static_cast<std::size_t>(uniform_int(rng, 0, voxels - 1))];
        scene.boxes.push_back(random_box(rng, grid.center_x(at.ix) + uniform(rng, -0.3, 0.3),
                                         grid.center_y(at.iy) + uniform(rng, -0.3, 0.3),
                                         uniform_int(rng, 0, config.num_classes - 1)));
    }
    return scene;
}

CheckResult check_gradients(const CheckOptions& options) {
    const auto start = Clock::now();
    const ModelConfig cfg = gradient_check_config();
    const double kMarginFloor = 1e-4;
    const double kStep = 1e-6, kFloor = 1e-4;
    double worst = 0.0;
    int resamples = 0;
    std::size_t entries = 0;
    std::string worst_param;
    for (int s = 0; s < options.grad_scenes; ++s) {
        for (int attempt = 0;; ++attempt) {
            const std::uint64_t seed = mix_seed(options.seed, 1000000 + 1000 * static_cast<std::uint64_t>(s) + attempt);
            SceneInput scene = random_small_scene(cfg, 10, seed);
            Model model(cfg, mix_seed(seed, 7));
            if (min_relu_margin(model, scene) < kMarginFloor && attempt < 500) {
                ++resamples;
                continue;
            }
            const GradCheckReport report = finite_difference_check(model, scene, AssignConfig{}, kStep, kFloor);
            if (report.kink_crossings > 0 && attempt < 500) {
                ++resamples;
                continue;
            }
            entries += report.entries;
            if (report.max_rel_error > worst) {
                worst = report.max_rel_error;
                worst_param = report.worst_param;
            }
            break;
        }
    }
    return finish("gradient_check", worst, 1e-4, start,
                  std::to_string(options.grad_scenes) + " scenes, " + std::to_string(entries) + " entries, " +
                      std::to_string(resamples) + " kink resamples" +
                      (worst_param.empty() ? "" : ", worst " + worst_param));
}

CheckResult check_assignment(const CheckOptions& options) {
    const auto start = Clock::now();
    std::mt19937_64 rng(mix_seed(options.seed, 104));
    int mismatches = 0;
    const int num_classes = 2;
    for (int trial = 0; trial < options.assign_trials; ++trial) {
        const GridSpec grid{0.0, 0.0, 0.16, 0.16, 40, 40, 1};
        const int n = uniform_int(rng, 1, 100);
        std::vector<Coord> cells = random_cells(rng, grid.width, grid.height, n);
        const SparseLayout layout(grid, cells);
        std::vector<BoxPrediction> preds;
        for (Index r = 0; r < layout.size(); ++r) {
            BoxPrediction p;
            p.box = random_box(rng, layout.center_x(r) + uniform(rng, -0.4, 0.4),
                               layout.center_y(r) + uniform(rng, -0.4, 0.4), uniform_int(rng, 0, num_classes - 1));
            p.scores = {uniform(rng, 0.01, 0.99), uniform(rng, 0.01, 0.99)};
            p.box.class_id = p.scores[1] > p.scores[0] ? 1 : 0;
            p.score = p.scores[static_cast<std::size_t>(p.box.class_id)];
            preds.push_back(std::move(p));
        }
        std::vector<BoxLabel> gts;
        const int g = uniform_int(rng, 0, 5);
        for (int i = 0; i < g; ++i) {
            const Index r = uniform_int(rng, 0, n - 1);
            gts.push_back(random_box(rng, layout.center_x(r) + uniform(rng, -0.5, 0.5),
                                     layout.center_y(r) + uniform(rng, -0.5, 0.5), uniform_int(rng, 0, num_classes - 1)));
        }
        AssignConfig cfg;
        cfg.candidates = uniform_int(rng, 1, 7);
        cfg.lambda = std::array{0.5, 2.0, 4.0}[static_cast<std::size_t>(uniform_int(rng, 0, 2))];

        const AssignmentResult lib = dynamic_assign(layout, preds, gts, cfg, num_classes);
        const AssignmentResult ref = brute_force_assign(layout, preds, gts, cfg, num_classes);
        bool same = lib.positive_gt == ref.positive_gt && lib.per_gt.size() == ref.per_gt.size() &&
                    lib.cls_target.rows() == ref.cls_target.rows() && lib.cls_target.cols() == ref.cls_target.cols() &&
                    lib.cls_target == ref.cls_target;
        for (std::size_t i = 0; same && i < lib.per_gt.size(); ++i) {
            auto a = lib.per_gt[i].positive_rows, b = ref.per_gt[i].positive_rows;
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            same = a == b && lib.per_gt[i].k == ref.per_gt[i].k &&
                   lib.per_gt[i].candidate_rows == ref.per_gt[i].candidate_rows;
        }
        mismatches += same ? 0 : 1;
    }
    return finish("assignment_brute_force", mismatches, 0.0, start,
                  std::to_string(options.assign_trials) + " scenes, mismatching scenes counted");
}

CheckResult check_adaptive_k_edges() {
    const auto start = Clock::now();
    int failures = 0;
    struct Case {
        std::vector<double> ious;
        int k;
    };
    const std::vector<Case> cases{
        {{0.0, 0.0, 0.0, 0.0, 0.0}, 1}, {{0.1, 0.2, 0.3}, 1},         {{0.5, 0.49}, 1},
        {{0.5, 0.5}, 1},                {{0.6, 0.7, 0.8}, 2},         {{1.0, 1.0, 1.0, 1.0, 1.0}, 5},
        {{0.99, 0.99, 0.99, 0.99, 0.99}, 4}, {{1.0, 1.0, 1.0}, 3},   {{0.9}, 1},
    };
    for (const Case& c : cases) failures += adaptive_k(c.ious) == c.k ? 0 : 1;

    // Three voxels, five requested candidates, predictions equal to the ground truth: k = 3.
    const GridSpec grid{0.0, 0.0, 0.16, 0.16, 10, 10, 1};
    const SparseLayout layout(grid, {{4, 4}, {5, 4}, {4, 5}});
    BoxLabel gt{0.8, 0.8, 0.8, 4.0, 1.8, 1.6, 0.3, 0};
    std::vector<BoxPrediction> exact(3, BoxPrediction{gt, 0.9, {0.9, 0.1}});
    AssignConfig cfg;
    const auto full = dynamic_assign(layout, exact, std::span<const BoxLabel>(&gt, 1), cfg, 2);
    failures += full.per_gt[0].k == 3 && full.per_gt[0].positive_rows.size() == 3 ? 0 : 1;

    // Predictions far from the ground truth: summed IoU 0, still one positive.
    std::vector<BoxPrediction> far = exact;
    for (auto& p : far) p.box.cx += 50.0;
    const auto none = dynamic_assign(layout, far, std::span<const BoxLabel>(&gt, 1), cfg, 2);
    failures += none.per_gt[0].k == 1 && none.per_gt[0].positive_rows.size() == 1 ? 0 : 1;
    return finish("adaptive_k_edges", failures, 0.0, start, std::to_string(cases.size() + 2) + " cases");
}

CheckResult check_iou_analytic() {
    const auto start = Clock::now();
    const double pi = std::numbers::pi;
    const double octagon = 2.0 * (std::sqrt(2.0) - 1.0);
    struct Case {
        BoxLabel a, b;
        double iou;
    };
    auto box = [](double cx, double cy, double l, double w, double yaw) { return BoxLabel{cx, cy, 0.0, l, w, 1.0, yaw, 0}; };
    const double t = 0.5236;
    const std::vector<Case> cases{
        {box(0, 0, 2, 1, 0.3), box(0, 0, 2, 1, 0.3), 1.0},
        {box(0, 0, 2, 2, 0), box(5, 0, 2, 2, 0), 0.0},
        {box(0, 0, 2, 2, 0), box(2, 0, 2, 2, 0), 0.0},
        {box(0, 0, 2, 2, 0), box(1, 0, 2, 2, 0), 1.0 / 3.0},
        {box(0, 0, 1, 1, 0), box(0, 0, 1, 1, pi / 4), octagon / (2.0 - octagon)},
        {box(0, 0, 4, 2, 0), box(0, 0, 4, 2, pi / 2), 1.0 / 3.0},
        {box(0, 0, 3, 3, 0.2), box(0, 0, 1, 1, 0.2), 1.0 / 9.0},
        {box(1, 2, 3, 1, 0.4), box(1, 2, 3, 1, 0.4 + pi), 1.0},
        {box(0, 0, 2, 2, t), box(std::cos(t), std::sin(t), 2, 2, t), 1.0 / 3.0},
        {box(0, 0, 2, 2, 0), box(1, 1, 2, 2, 0), 1.0 / 7.0},
    };
    double worst = 0.0;
    for (const Case& c : cases) {
        worst = std::max(worst, std::abs(rotated_iou_bev(c.a, c.b) - c.iou));
        worst = std::max(worst, std::abs(rotated_iou_bev(c.b, c.a) - c.iou));
    }
    return finish("iou_analytic", worst, 1e-9, start, std::to_string(cases.size()) + " cases, both argument orders");
}

CheckResult check_iou_monte_carlo(const CheckOptions& options) {
    const auto start = Clock::now();
    std::mt19937_64 rng(mix_seed(options.seed, 105));
    double worst = 0.0;
    for (int i = 0; i < options.iou_pairs; ++i) {
        BoxLabel a{uniform(rng, -5, 5), uniform(rng, -5, 5), 0.0, uniform(rng, 0.5, 5), uniform(rng, 0.5, 3), 1.0,
                   uniform(rng, -std::numbers::pi, std::numbers::pi), 0};
        BoxLabel b{a.cx + uniform(rng, -2, 2), a.cy + uniform(rng, -2, 2), 0.0, uniform(rng, 0.5, 5), uniform(rng, 0.5, 3),
                   1.0, uniform(rng, -std::numbers::pi, std::numbers::pi), 0};
        worst = std::max(worst, std::abs(rotated_iou_bev(a, b) - monte_carlo_iou(a, b, options.iou_samples, rng)));
    }
    return finish("iou_monte_carlo", worst, 2e-3, start,
                  std::to_string(options.iou_pairs) + " pairs x " + std::to_string(options.iou_samples) + " samples");
}

CheckResult check_nms(const CheckOptions& options) {
    const auto start = Clock::now();
    std::mt19937_64 rng(mix_seed(options.seed, 106));
    int mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<BoxPrediction> preds;
        const int n = uniform_int(rng, 0, 40);
        for (int i = 0; i < n; ++i) {
            BoxPrediction p;
            p.box = random_box(rng, uniform(rng, 0, 8), uniform(rng, 0, 8), uniform_int(rng, 0, 1));
            // Coarse scores force ties.
            p.score = std::round(uniform(rng, 0, 1) * 10.0) / 10.0;
            p.scores = {p.score, p.score};
            preds.push_back(std::move(p));
        }
        const double iou = uniform(rng, 0.05, 0.7), thresh = uniform(rng, 0.0, 0.5);
        const auto a = nms_bev(preds, iou, thresh);
        const auto b = brute_force_nms(preds, iou, thresh);
        bool same = a.size() == b.size();
        for (std::size_t i = 0; same && i < a.size(); ++i)
            same = a[i].score == b[i].score && a[i].box.cx == b[i].box.cx && a[i].box.cy == b[i].box.cy &&
                   a[i].box.class_id == b[i].box.class_id;
        mismatches += same ? 0 : 1;
    }
    return finish("nms_brute_force", mismatches, 0.0, start, "200 random detection sets");
}

CheckResult check_global_reach(const CheckOptions& options) {
    const auto start = Clock::now();
    std::mt19937_64 rng(mix_seed(options.seed, 107));
    SlotFormerConfig cfg;
    cfg.num_layers = 2;
    const int w = cfg.width;
    const Index c = 32;
    int violations = 0;
    std::size_t pairs = 0;
    for (int trial = 0; trial < options.reach_patterns; ++trial) {
        const int width = uniform_int(rng, w, 4 * w), height = uniform_int(rng, w, 4 * w);
        const GridSpec grid{0.0, 0.0, 0.16, 0.16, width, height, 4};
        std::set<Coord> cells;
        for (const Coord& cell : random_cells(rng, width, height, uniform_int(rng, 2, 12))) cells.insert(cell);
        // Intermediaries: one voxel in every (row stripe, column stripe) crossing that is in use.
        std::set<int> rows, cols;
        for (const Coord& cell : cells) {
            rows.insert(cell.iy / w);
            cols.insert(cell.ix / w);
        }
        for (int r : rows)
            for (int col : cols) {
                bool present = false;
                for (const Coord& cell : cells) present = present || (cell.iy / w == r && cell.ix / w == col);
                if (present) continue;
                const int ix = std::min(width - 1, col * w + uniform_int(rng, 0, w - 1));
                const int iy = std::min(height - 1, r * w + uniform_int(rng, 0, w - 1));
                cells.insert({ix, iy});
            }
        const std::vector<Coord> coords(cells.begin(), cells.end());
        const Index n = static_cast<Index>(coords.size());
        const SparseTensor<double> x(SparseLayout(grid, coords), gaussian(rng, n, c));
        std::vector<AttentionParams<double>> layers;
        for (int l = 0; l < 2; ++l) layers.push_back(AttentionParams<double>::random(c, 2 * c, rng));

        const MatrixXd pair_base = slotformer_stack<double>(x, layers, cfg).features();
        const MatrixXd single_base = slotformer_layer(x, SlotAxis::X, layers[0], cfg).features();
        for (Index i = 0; i < n; ++i) {
            MatrixXd f = x.features();
            f.row(i) += 1e-3 * gaussian(rng, 1, c);
            const SparseTensor<double> xp(x.layout(), f);
            const MatrixXd pair_out = slotformer_stack<double>(xp, layers, cfg).features();
            const MatrixXd single_out = slotformer_layer(xp, SlotAxis::X, layers[0], cfg).features();
            for (Index j = 0; j < n; ++j) {
                if (j == i) continue;
                ++pairs;
                if ((pair_out.row(j) - pair_base.row(j)).cwiseAbs().maxCoeff() == 0.0) ++violations;
                const bool same_slot = coords[i].iy / w == coords[j].iy / w;
                const double moved = (single_out.row(j) - single_base.row(j)).cwiseAbs().maxCoeff();
                if (same_slot != (moved != 0.0)) ++violations;
            }
        }
    }
    return finish("global_reach", violations, 0.0, start,
                  std::to_string(options.reach_patterns) + " patterns, " + std::to_string(pairs) + " ordered pairs");
}

std::vector<CheckResult> run_all_checks(const CheckOptions& options) {
    return {check_attention(options),   check_conv(options),       check_voxelize(options),
            check_assignment(options),  check_adaptive_k_edges(),  check_iou_analytic(),
            check_iou_monte_carlo(options), check_nms(options),    check_global_reach(options),
            check_gradients(options)};
}

}  // namespace slotgrid::oracle
