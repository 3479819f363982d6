#include "slotgrid/scene.hpp"

#include "slotgrid/voxelize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace slotgrid {

void SceneSpec::validate() const {
    require(extent_x > 0.0 && extent_y > 0.0, "scene extent must be positive");
    require(min_objects >= 0 && max_objects >= min_objects, "invalid object count range");
    require(!classes.empty(), "scene needs at least one object class");
    for (const auto& c : classes)
        require(c.l_min > 0.0 && c.l_max >= c.l_min && c.w_min > 0.0 && c.w_max >= c.w_min && c.h_min > 0.0 &&
                    c.h_max >= c.h_min,
                "invalid dimension range for class " + c.name);
    require(min_points >= 1 && max_points >= min_points, "objects need at least one point");
    require(clutter_density >= 0.0 && point_noise >= 0.0 && min_gap >= 0.0, "negative scene density or noise");
    require(max_attempts >= 1, "max_attempts must be >= 1");
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

bool inside_extent(const BoxLabel& b, const SceneSpec& spec) {
    for (const auto& p : geom::corners(b))
        if (p.x < spec.origin_x || p.y < spec.origin_y || p.x > spec.origin_x + spec.extent_x ||
            p.y > spec.origin_y + spec.extent_y)
            return false;
    return true;
}

BoxLabel inflated(BoxLabel b, double gap) {
    b.l += gap;
    b.w += gap;
    return b;
}

struct Face {
    geom::Vec2 a, b;
};

// Faces in the box's CCW corner order; face i runs from corner i to corner i+1.
std::vector<Face> visible_faces(const BoxLabel& box, double sensor_x, double sensor_y, bool all) {
    const auto c = geom::corners(box);
    std::vector<Face> faces;
    for (int i = 0; i < 4; ++i) {
        const geom::Vec2& a = c[i];
        const geom::Vec2& b = c[(i + 1) % 4];
        // Outward normal of a CCW edge is (dy, -dx).
        const double nx = b.y - a.y, ny = -(b.x - a.x);
        const double mx = 0.5 * (a.x + b.x), my = 0.5 * (a.y + b.y);
        if (all || nx * (sensor_x - mx) + ny * (sensor_y - my) > 0.0) faces.push_back({a, b});
    }
    if (faces.empty()) {
        for (int i = 0; i < 4; ++i) faces.push_back({c[i], c[(i + 1) % 4]});
    }
    return faces;
}

}  // namespace

Scene generate_scene(const SceneSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    Scene scene;
    const int count = std::uniform_int_distribution<int>(spec.min_objects, spec.max_objects)(rng);
    int attempts = 0;
    while (static_cast<int>(scene.boxes.size()) < count) {
        if (++attempts > spec.max_attempts)
            throw Error("scene spec infeasible: could not place " + std::to_string(count) + " objects");
        BoxLabel b;
        b.class_id = std::uniform_int_distribution<int>(0, static_cast<int>(spec.classes.size()) - 1)(rng);
        const ObjectClassSpec& cls = spec.classes[static_cast<std::size_t>(b.class_id)];
        b.l = uniform(rng, cls.l_min, cls.l_max);
        b.w = uniform(rng, cls.w_min, cls.w_max);
        b.h = uniform(rng, cls.h_min, cls.h_max);
        b.yaw = wrap_angle(uniform(rng, -std::numbers::pi, std::numbers::pi));
        b.cx = uniform(rng, spec.origin_x, spec.origin_x + spec.extent_x);
        b.cy = uniform(rng, spec.origin_y, spec.origin_y + spec.extent_y);
        b.cz = 0.5 * b.h;
        if (!inside_extent(b, spec)) continue;
        bool overlaps = false;
        for (const BoxLabel& other : scene.boxes)
            if (intersection_area_bev(inflated(b, spec.min_gap), inflated(other, spec.min_gap)) > 0.0) {
                overlaps = true;
                break;
            }
        if (!overlaps) scene.boxes.push_back(b);
    }

    const double sensor_x = spec.origin_x + 0.5 * spec.extent_x;
    const double sensor_y = spec.origin_y + 0.5 * spec.extent_y;
    auto jitter = [&] { return uniform(rng, -spec.point_noise, spec.point_noise); };
    auto clamp_x = [&](double x) { return std::clamp(x, spec.origin_x, std::nextafter(spec.origin_x + spec.extent_x, spec.origin_x)); };
    auto clamp_y = [&](double y) { return std::clamp(y, spec.origin_y, std::nextafter(spec.origin_y + spec.extent_y, spec.origin_y)); };

    for (const BoxLabel& b : scene.boxes) {
        const int n = std::uniform_int_distribution<int>(spec.min_points, spec.max_points)(rng);
        if (spec.sampling == SurfaceSampling::Uniform) {
            const double c = std::cos(b.yaw), s = std::sin(b.yaw);
            for (int i = 0; i < n; ++i) {
                const double u = uniform(rng, -0.5, 0.5) * b.l, v = uniform(rng, -0.5, 0.5) * b.w;
                scene.points.push_back({clamp_x(b.cx + c * u - s * v), clamp_y(b.cy + s * u + c * v),
                                        uniform(rng, 0.0, b.h), uniform(rng, 0.0, 1.0)});
            }
            continue;
        }
        const auto faces = visible_faces(b, sensor_x, sensor_y, spec.sampling == SurfaceSampling::Ring);
        std::vector<double> lengths;
        for (const Face& f : faces) lengths.push_back(std::hypot(f.b.x - f.a.x, f.b.y - f.a.y));
        std::discrete_distribution<std::size_t> pick(lengths.begin(), lengths.end());
        for (int i = 0; i < n; ++i) {
            const Face& f = faces[pick(rng)];
            const double t = uniform(rng, 0.0, 1.0);
            const double x = f.a.x + t * (f.b.x - f.a.x) + jitter();
            const double y = f.a.y + t * (f.b.y - f.a.y) + jitter();
            scene.points.push_back({clamp_x(x), clamp_y(y), uniform(rng, 0.0, b.h), uniform(rng, 0.0, 1.0)});
        }
    }

    const auto clutter = static_cast<int>(std::lround(spec.clutter_density * spec.extent_x * spec.extent_y));
    for (int i = 0; i < clutter; ++i)
        scene.points.push_back({uniform(rng, spec.origin_x, spec.origin_x + spec.extent_x),
                                uniform(rng, spec.origin_y, spec.origin_y + spec.extent_y), uniform(rng, 0.0, 0.2),
                                uniform(rng, 0.0, 1.0)});
    return scene;
}

void write_scene(const std::filesystem::path& dir, const Scene& scene) {
    std::filesystem::create_directories(dir);
    write_points(dir / "points.txt", scene.points);
    std::ofstream out(dir / "boxes.txt");
    if (!out) throw Error("cannot write " + (dir / "boxes.txt").string());
    char buf[256];
    for (const BoxLabel& b : scene.boxes) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %d\n", b.cx, b.cy, b.cz, b.l, b.w,
                      b.h, b.yaw, b.class_id);
        out << buf;
    }
}

std::vector<BoxLabel> read_boxes(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open boxes file " + path.string());
    std::vector<BoxLabel> boxes;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        BoxLabel b;
        std::string extra;
        if (!(fields >> b.cx >> b.cy >> b.cz >> b.l >> b.w >> b.h >> b.yaw >> b.class_id) || (fields >> extra))
            throw Error("malformed box on line " + std::to_string(line_no) + " of " + path.string());
        if (!(b.l > 0.0 && b.w > 0.0 && b.h > 0.0) || b.class_id < 0)
            throw Error("invalid box on line " + std::to_string(line_no) + " of " + path.string());
        boxes.push_back(b);
    }
    return boxes;
}

Scene read_scene(const std::filesystem::path& dir) {
    return {read_points(dir / "points.txt"), read_boxes(dir / "boxes.txt")};
}

std::vector<std::filesystem::path> list_scene_dirs(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root)) throw Error("scene directory not found: " + root.string());
    std::vector<std::filesystem::path> dirs;
    for (const auto& entry : std::filesystem::directory_iterator(root))
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "points.txt")) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

}  // namespace slotgrid
