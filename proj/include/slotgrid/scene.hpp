#pragma once

#include "slotgrid/geometry.hpp"
#include "slotgrid/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace slotgrid {

struct ObjectClassSpec {
    std::string name;
    double l_min, l_max;
    double w_min, w_max;
    double h_min, h_max;
};

enum class SurfaceSampling { LShape, Ring, Uniform };

/// Procedural BEV scene: a sensor at the extent center, boxes resting on z = 0 and
/// ground clutter. LShape samples only the faces visible from the sensor.
struct SceneSpec {
    std::uint64_t seed = 0;
    double origin_x = 0.0;
    double origin_y = 0.0;
    double extent_x = 25.6;
    double extent_y = 25.6;
    int min_objects = 2;
    int max_objects = 6;
    std::vector<ObjectClassSpec> classes = default_classes();
    int min_points = 30;  // per object
    int max_points = 80;
    double clutter_density = 0.05;  // points per square meter
    SurfaceSampling sampling = SurfaceSampling::LShape;
    double point_noise = 0.02;  // meters, uniform jitter
    double min_gap = 0.5;       // BEV clearance between objects
    int max_attempts = 2000;

    static std::vector<ObjectClassSpec> default_classes() {
        return {{"car", 3.8, 4.6, 1.7, 2.1, 1.4, 1.7}, {"pedestrian", 0.5, 0.8, 0.5, 0.8, 1.5, 1.9}};
    }

    void validate() const;
};

struct Scene {
    std::vector<Point> points;
    std::vector<BoxLabel> boxes;
};

Scene generate_scene(const SceneSpec& spec);

// One directory per scene: points.txt and boxes.txt (`cx cy cz l w h yaw class_id`).
void write_scene(const std::filesystem::path& dir, const Scene& scene);
Scene read_scene(const std::filesystem::path& dir);
std::vector<BoxLabel> read_boxes(const std::filesystem::path& path);

// Scene subdirectories of `root` in lexicographic order.
std::vector<std::filesystem::path> list_scene_dirs(const std::filesystem::path& root);

}  // namespace slotgrid
