#include "helpers.hpp"

#include "slotgrid/assign.hpp"
#include "slotgrid/eval.hpp"
#include "slotgrid/losses.hpp"
#include "slotgrid_oracles/oracles.hpp"

#include <doctest.h>

#include <numbers>

using namespace slotgrid;
using namespace testing;

namespace {

BoxLabel box(double cx, double cy, double l, double w, double yaw = 0.0, int cls = 0) {
    return {cx, cy, 0.0, l, w, 1.0, yaw, cls};
}

BoxPrediction pred(const BoxLabel& b, double score) {
    BoxPrediction p;
    p.box = b;
    p.score = score;
    p.scores.assign(2, 0.0);
    p.scores[static_cast<std::size_t>(b.class_id)] = score;
    return p;
}

}  // namespace

TEST_CASE("angle wrapping") {
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
    CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
    CHECK(wrap_angle(3.0 * std::numbers::pi / 2.0) == doctest::Approx(-std::numbers::pi / 2.0));
}

TEST_CASE("rotated BEV IoU") {
    const BoxLabel a = box(0, 0, 4, 2);
    CHECK(rotated_iou_bev(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rotated_iou_bev(a, box(10, 0, 4, 2)) == 0.0);
    CHECK(rotated_iou_bev(a, box(2, 0, 4, 2)) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(rotated_iou_bev(a, box(0, 0, 4, 2, std::numbers::pi)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rotated_iou_bev(a, box(0, 0, 4, 2, std::numbers::pi / 2)) == doctest::Approx(4.0 / 12.0).epsilon(1e-12));
    CHECK(rotated_iou_bev(box(0, 0, 2, 2), box(0, 0, 1, 1)) == doctest::Approx(0.25).epsilon(1e-12));
    SUBCASE("symmetric and agrees with Monte Carlo") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-1.0, 1.0), d(0.5, 3.0), yaw(-3.0, 3.0);
        for (int i = 0; i < 10; ++i) {
            const BoxLabel x = box(u(rng), u(rng), d(rng), d(rng), yaw(rng));
            const BoxLabel y = box(u(rng), u(rng), d(rng), d(rng), yaw(rng));
            const double iou = rotated_iou_bev(x, y);
            CHECK(iou == doctest::Approx(rotated_iou_bev(y, x)).epsilon(1e-12));
            CHECK(std::abs(iou - oracle::monte_carlo_iou(x, y, 200000, rng)) < 1e-2);
        }
    }
}

TEST_CASE("rotation-weighted IoU loss") {
    const BoxLabel gt{0, 0, 0, 4, 2, 1.5, 0.4, 0};
    CHECK(rw_iou_loss(gt, gt) == doctest::Approx(0.0).epsilon(1e-14));
    BoxLabel flipped = gt;
    flipped.yaw += std::numbers::pi;
    CHECK(rw_iou_loss(flipped, gt) == doctest::Approx(0.0).epsilon(1e-12));
    BoxLabel perpendicular = gt;
    perpendicular.yaw += std::numbers::pi / 2;
    CHECK(rw_iou_loss(perpendicular, gt) == doctest::Approx(1.0).epsilon(1e-12));
    BoxLabel far = gt;
    far.cx = 50.0;
    CHECK(rw_iou_loss(far, gt) == 1.0);
    BoxLabel half = gt;
    half.l = 2.0;
    CHECK(rw_iou_loss(half, gt) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("box encoding round trip") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-5.0, 5.0), d(0.3, 6.0), yaw(-3.1, 3.1);
    for (int i = 0; i < 100; ++i) {
        const BoxLabel b{u(rng), u(rng), u(rng), d(rng), d(rng), d(rng), yaw(rng), 0};
        const double vx = u(rng), vy = u(rng);
        const BoxLabel r = decode_box<double>(encode_box(b, vx, vy), vx, vy);
        CHECK(r.cx == doctest::Approx(b.cx).epsilon(1e-12));
        CHECK(r.cy == doctest::Approx(b.cy).epsilon(1e-12));
        CHECK(r.l == doctest::Approx(b.l).epsilon(1e-12));
        CHECK(r.w == doctest::Approx(b.w).epsilon(1e-12));
        CHECK(r.h == doctest::Approx(b.h).epsilon(1e-12));
        CHECK(r.yaw == doctest::Approx(b.yaw).epsilon(1e-12));
    }
}

TEST_CASE("adaptive k") {
    CHECK(adaptive_k(std::vector<double>{}) == 0);
    CHECK(adaptive_k(std::vector<double>{0.0, 0.0, 0.0}) == 1);
    CHECK(adaptive_k(std::vector<double>{0.9, 0.9, 0.9}) == 2);
    CHECK(adaptive_k(std::vector<double>{1.0, 1.0}) == 2);
    CHECK(adaptive_k(std::vector<double>{0.999999}) == 1);
    CHECK_THROWS(adaptive_k(std::vector<double>{1.5}));
}

TEST_CASE("nearest candidates") {
    const SparseLayout voxels(grid_of(10, 10), {{0, 0}, {1, 0}, {4, 5}, {5, 5}, {9, 9}});
    const BoxLabel gt = box(voxels.center_x(3), voxels.center_y(3), 1, 1);
    const auto rows = nearest_candidates(voxels, gt, 2);
    REQUIRE(rows.size() == 2);
    CHECK(voxels.coords()[rows[0]] == Coord{5, 5});
    CHECK(voxels.coords()[rows[1]] == Coord{4, 5});
    CHECK(nearest_candidates(voxels, gt, 50).size() == 5);
    SUBCASE("brute-force oracle") {
        std::mt19937_64 rng(5);
        for (int t = 0; t < 50; ++t) {
            const SparseLayout layout(grid_of(20, 20), random_coords(rng, 20, 20, 1 + t));
            std::uniform_real_distribution<double> u(0.0, 3.2);
            const BoxLabel g = box(u(rng), u(rng), 1, 1);
            for (int n : {1, 3, 5, 9})
                CHECK(nearest_candidates(layout, g, n) == oracle::brute_force_nearest(layout, g, n));
        }
    }
}

TEST_CASE("dynamic assignment") {
    SUBCASE("no ground truth gives all-zero targets") {
        const SparseLayout voxels(grid_of(4, 4), {{0, 0}, {1, 1}});
        std::vector<BoxPrediction> preds{pred(box(0.08, 0.08, 1, 1), 0.5), pred(box(0.24, 0.24, 1, 1), 0.5)};
        const auto r = dynamic_assign(voxels, preds, {}, {}, 2);
        CHECK(r.cls_target.isZero());
        CHECK(r.positive_gt == std::vector<int>{-1, -1});
    }
    SUBCASE("shared voxel goes to the cheaper ground truth") {
        const SparseLayout voxels(grid_of(4, 4), {{1, 1}});
        const BoxLabel gt = box(voxels.center_x(0), voxels.center_y(0), 2, 1);
        BoxLabel other = gt;
        other.cx += 0.05;
        std::vector<BoxPrediction> preds{pred(gt, 0.9)};
        const auto r = dynamic_assign(voxels, preds, std::vector<BoxLabel>{other, gt}, {}, 2);
        CHECK(r.positive_gt[0] == 1);
        CHECK(r.per_gt[0].positive_rows.empty());
        CHECK(r.cls_target(0, 0) == 1.0);
    }
    SUBCASE("matches the brute-force oracle") {
        std::mt19937_64 rng(6);
        std::uniform_real_distribution<double> u(0.3, 2.9), d(0.4, 3.0), yaw(-3.0, 3.0), s(0.02, 0.98);
        for (int t = 0; t < 100; ++t) {
            const SparseLayout voxels(grid_of(20, 20), random_coords(rng, 20, 20, 5 + t % 60));
            std::vector<BoxPrediction> preds;
            for (Index r = 0; r < voxels.size(); ++r) {
                BoxPrediction p = pred(box(u(rng), u(rng), d(rng), d(rng), yaw(rng)), s(rng));
                p.scores = {s(rng), s(rng)};
                preds.push_back(p);
            }
            std::vector<BoxLabel> gts;
            for (int g = 0; g < 1 + t % 5; ++g) gts.push_back(box(u(rng), u(rng), d(rng), d(rng), yaw(rng), g % 2));
            const AssignConfig cfg{1 + t % 7, 2.0};
            const auto fast = dynamic_assign(voxels, preds, gts, cfg, 2);
            const auto slow = oracle::brute_force_assign(voxels, preds, gts, cfg, 2);
            CHECK(fast.positive_gt == slow.positive_gt);
            CHECK(fast.cls_target == slow.cls_target);
        }
    }
    SUBCASE("selection cost is focal plus weighted RW-IoU") {
        const BoxLabel gt = box(0, 0, 4, 2);
        const BoxPrediction p = pred(box(0.5, 0, 4, 2), 0.6);
        const double focal = 0.16 * -std::log(0.6);
        CHECK(selection_cost(p, gt, 2.0) == doctest::Approx(focal + 2.0 * rw_iou_loss(p.box, gt)).epsilon(1e-12));
    }
}

TEST_CASE("NMS") {
    SUBCASE("overlapping same-class boxes keep the higher score") {
        std::vector<BoxPrediction> preds{pred(box(0, 0, 4, 2), 0.6), pred(box(0.2, 0, 4, 2), 0.9),
                                         pred(box(0.2, 0, 4, 2, 0, 1), 0.5), pred(box(10, 0, 4, 2), 0.05)};
        const auto kept = nms_bev(preds, 0.1, 0.1);
        REQUIRE(kept.size() == 2);
        CHECK(kept[0].score == 0.9);
        CHECK(kept[1].box.class_id == 1);
    }
    SUBCASE("brute-force oracle") {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(0.0, 6.0), d(0.5, 3.0), s(0.0, 1.0);
        for (int t = 0; t < 50; ++t) {
            std::vector<BoxPrediction> preds;
            for (int i = 0; i < 30; ++i) preds.push_back(pred(box(u(rng), u(rng), d(rng), d(rng), s(rng), i % 2), s(rng)));
            const auto a = nms_bev(preds, 0.1, 0.1);
            const auto b = oracle::brute_force_nms(preds, 0.1, 0.1);
            REQUIRE(a.size() == b.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(a[i].score == b[i].score);
                CHECK(a[i].box.cx == b[i].box.cx);
            }
        }
    }
}

TEST_CASE("average precision") {
    const std::vector<double> thr{0.5};
    const std::vector<std::vector<BoxLabel>> gts{{box(0, 0, 4, 2), box(10, 0, 4, 2)}};
    SUBCASE("perfect detections") {
        const std::vector<std::vector<BoxPrediction>> preds{{pred(gts[0][0], 0.9), pred(gts[0][1], 0.8)}};
        const auto r = evaluate(preds, gts, thr, 2);
        REQUIRE(r.find(0, 0.5));
        CHECK(r.find(0, 0.5)->ap == doctest::Approx(1.0));
        CHECK(r.find(1, 0.5) == nullptr);
    }
    SUBCASE("half recall") {
        const std::vector<std::vector<BoxPrediction>> preds{{pred(gts[0][0], 0.9)}};
        CHECK(evaluate(preds, gts, thr, 2).find(0, 0.5)->ap == doctest::Approx(51.0 / 101.0));
    }
    SUBCASE("false positive ranked first") {
        const std::vector<std::vector<BoxPrediction>> preds{
            {pred(box(50, 50, 1, 1), 0.95), pred(gts[0][0], 0.9), pred(gts[0][1], 0.8)}};
        const auto* ce = evaluate(preds, gts, thr, 2).find(0, 0.5);
        CHECK(ce->ap == doctest::Approx(2.0 / 3.0));
        CHECK(ce->true_positives == 2);
        CHECK(ce->num_pred == 3);
    }
    SUBCASE("a duplicate cannot match twice") {
        const std::vector<std::vector<BoxPrediction>> preds{{pred(gts[0][0], 0.9), pred(gts[0][0], 0.8)}};
        CHECK(evaluate(preds, gts, thr, 2).find(0, 0.5)->true_positives == 1);
    }
    SUBCASE("no predictions") {
        const std::vector<std::vector<BoxPrediction>> preds{{}};
        CHECK(evaluate(preds, gts, thr, 2).find(0, 0.5)->ap == 0.0);
    }
}
