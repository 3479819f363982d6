#include "helpers.hpp"

#include "slotgrid/eval.hpp"
#include "slotgrid/scene.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace slotgrid;
using namespace testing;

namespace {

bool same_points(const std::vector<Point>& a, const std::vector<Point>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].x != b[i].x || a[i].y != b[i].y || a[i].z != b[i].z || a[i].intensity != b[i].intensity)
            return false;
    return true;
}

bool inside_bev(const BoxLabel& b, double x, double y, double slack) {
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    const double u = c * (x - b.cx) + s * (y - b.cy);
    const double v = -s * (x - b.cx) + c * (y - b.cy);
    return std::abs(u) <= 0.5 * b.l + slack && std::abs(v) <= 0.5 * b.w + slack;
}

}  // namespace

TEST_CASE("scene generation is deterministic per seed") {
    SceneSpec spec;
    spec.seed = 42;
    const Scene a = generate_scene(spec), b = generate_scene(spec);
    CHECK(same_points(a.points, b.points));
    REQUIRE(a.boxes.size() == b.boxes.size());
    for (std::size_t i = 0; i < a.boxes.size(); ++i) CHECK(a.boxes[i].cx == b.boxes[i].cx);
    spec.seed = 43;
    CHECK_FALSE(same_points(a.points, generate_scene(spec).points));
}

TEST_CASE("zero objects gives clutter only") {
    SceneSpec spec;
    spec.min_objects = spec.max_objects = 0;
    spec.clutter_density = 0.1;
    const Scene s = generate_scene(spec);
    CHECK(s.boxes.empty());
    CHECK_FALSE(s.points.empty());
}

TEST_CASE("infeasible specs are rejected") {
    SceneSpec spec;
    spec.extent_x = spec.extent_y = 6.0;
    spec.min_objects = spec.max_objects = 30;
    spec.max_attempts = 200;
    CHECK_THROWS(generate_scene(spec));
    SceneSpec bad;
    bad.min_objects = 5;
    bad.max_objects = 2;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("invariants hold over 1000 seeds") {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        SceneSpec spec;
        spec.seed = seed;
        spec.sampling = static_cast<SurfaceSampling>(seed % 3);
        const Scene s = generate_scene(spec);
        REQUIRE(static_cast<int>(s.boxes.size()) >= spec.min_objects);
        REQUIRE(static_cast<int>(s.boxes.size()) <= spec.max_objects);
        for (std::size_t i = 0; i < s.boxes.size(); ++i) {
            const BoxLabel& b = s.boxes[i];
            for (const auto& c : geom::corners(b)) {
                REQUIRE(c.x >= spec.origin_x);
                REQUIRE(c.x <= spec.origin_x + spec.extent_x);
                REQUIRE(c.y >= spec.origin_y);
                REQUIRE(c.y <= spec.origin_y + spec.extent_y);
            }
            for (std::size_t j = i + 1; j < s.boxes.size(); ++j) REQUIRE(intersection_area_bev(b, s.boxes[j]) == 0.0);
            const auto in_box = std::count_if(s.points.begin(), s.points.end(), [&](const Point& p) {
                return inside_bev(b, p.x, p.y, spec.point_noise + 1e-9) && p.z >= -spec.point_noise - 1e-9 &&
                       p.z <= b.h + spec.point_noise + 1e-9;
            });
            REQUIRE(in_box >= 1);
        }
    }
}

TEST_CASE("L-shape sampling leaves most car centers empty") {
    const GridSpec coarse{0.0, 0.0, 0.32, 0.32, 80, 80, 1};
    int cars = 0, empty = 0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        SceneSpec spec;
        spec.seed = seed;
        spec.clutter_density = 0.0;
        const Scene s = generate_scene(spec);
        std::set<Coord> occupied;
        for (const Point& p : s.points)
            occupied.insert(coarse.cell_of(p.x, p.y));
        for (const BoxLabel& b : s.boxes) {
            if (b.class_id != 0) continue;
            ++cars;
            if (!occupied.count(coarse.cell_of(b.cx, b.cy))) ++empty;
        }
    }
    REQUIRE(cars > 0);
    CHECK(static_cast<double>(empty) / cars > 0.5);
}

TEST_CASE("scene files round trip") {
    SceneSpec spec;
    spec.seed = 9;
    const Scene s = generate_scene(spec);
    const auto dir = std::filesystem::temp_directory_path() / "slotgrid_scene_roundtrip";
    std::filesystem::remove_all(dir);
    write_scene(dir, s);
    const Scene r = read_scene(dir);
    CHECK(same_points(s.points, r.points));
    REQUIRE(r.boxes.size() == s.boxes.size());
    for (std::size_t i = 0; i < s.boxes.size(); ++i) {
        CHECK(r.boxes[i].cx == s.boxes[i].cx);
        CHECK(r.boxes[i].yaw == s.boxes[i].yaw);
        CHECK(r.boxes[i].class_id == s.boxes[i].class_id);
    }
    std::ofstream(dir / "boxes.txt") << "1 2 3 4\n";
    CHECK_THROWS(read_scene(dir));
    std::filesystem::remove_all(dir);
}

TEST_CASE("AP properties") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 40.0), score(0.2, 0.9);
    const std::vector<double> thr{0.5};
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<BoxLabel>> gts(3);
        std::vector<std::vector<BoxPrediction>> preds(3);
        for (int s = 0; s < 3; ++s)
            for (int g = 0; g < 3; ++g) {
                const BoxLabel b{u(rng), u(rng), 0, 4, 2, 1.5, 0, 0};
                gts[s].push_back(b);
                if (g < 2) {
                    BoxPrediction p;
                    p.box = b;
                    p.box.cx += 0.3 * (score(rng) - 0.5);
                    p.score = score(rng);
                    preds[s].push_back(p);
                }
            }
        const double base = evaluate(preds, gts, thr, 1).find(0, 0.5)->ap;
        CHECK(base >= 0.0);
        CHECK(base <= 1.0);

        auto more = preds;
        BoxPrediction hit;
        hit.box = gts[1][2];
        hit.score = 0.5;
        more[1].push_back(hit);
        CHECK(evaluate(more, gts, thr, 1).find(0, 0.5)->ap >= base);

        auto noisy = preds;
        BoxPrediction miss;
        miss.box = {500, 500, 0, 1, 1, 1, 0, 0};
        miss.score = 0.01;
        noisy[0].push_back(miss);
        CHECK(evaluate(noisy, gts, thr, 1).find(0, 0.5)->true_positives ==
              evaluate(preds, gts, thr, 1).find(0, 0.5)->true_positives);
    }
}

TEST_CASE("NMS ignores input order") {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(0.0, 6.0), s(0.0, 1.0);
    std::vector<BoxPrediction> preds;
    for (int i = 0; i < 40; ++i) {
        BoxPrediction p;
        p.box = {u(rng), u(rng), 0, 2, 1, 1, s(rng), 0};
        p.score = s(rng);
        preds.push_back(p);
    }
    const auto a = nms_bev(preds, 0.2, 0.1);
    std::shuffle(preds.begin(), preds.end(), rng);
    const auto b = nms_bev(preds, 0.2, 0.1);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].box.cx == b[i].box.cx);
}
