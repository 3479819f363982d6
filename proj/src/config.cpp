#include "slotgrid/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace slotgrid {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& expected, const std::string& text) {
    throw ConfigError("config key '" + key + "': expected " + expected + ", got '" + text + "'");
}

long long to_int(const std::string& key, const std::string& text) {
    long long v = 0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end) bad_value(key, "integer", text);
    return v;
}

int to_int32(const std::string& key, const std::string& text) {
    const long long v = to_int(key, text);
    if (v < INT32_MIN || v > INT32_MAX) bad_value(key, "32-bit integer", text);
    return static_cast<int>(v);
}

std::uint64_t to_uint64(const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end) bad_value(key, "unsigned integer", text);
    return v;
}

double to_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) bad_value(key, "number", text);
    return v;
}

bool to_bool(const std::string& key, const std::string& text) {
    if (text == "true") return true;
    if (text == "false") return false;
    bad_value(key, "true or false", text);
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
    if (out.empty()) bad_value(key, "comma-separated numbers", text);
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename E>
E to_enum(const std::string& key, const std::string& text, const std::vector<std::pair<std::string, E>>& names) {
    for (const auto& [n, e] : names)
        if (n == text) return e;
    std::string options;
    for (const auto& [n, e] : names) options += (options.empty() ? "" : "|") + n;
    bad_value(key, "one of " + options, text);
}

template <typename E>
std::string enum_name(E value, const std::vector<std::pair<std::string, E>>& names) {
    for (const auto& [n, e] : names)
        if (e == value) return n;
    return "?";
}

const std::vector<std::pair<std::string, PartitionKind>> kPartitions{
    {"slot", PartitionKind::Slot}, {"window", PartitionKind::Window}, {"winset", PartitionKind::WindowSet}};
const std::vector<std::pair<std::string, UpsampleStrategy>> kUpsample{{"sp", UpsampleStrategy::SpSu},
                                                                      {"sm", UpsampleStrategy::SmSu}};
const std::vector<std::pair<std::string, SurfaceSampling>> kSampling{
    {"lshape", SurfaceSampling::LShape}, {"ring", SurfaceSampling::Ring}, {"uniform", SurfaceSampling::Uniform}};

struct Field {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

#define SG_INT(KEY, MEMBER)                                                                              \
    Field {                                                                                              \
        KEY, [](const RunConfig& c) { return std::to_string(c.MEMBER); },                                \
            [](RunConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_int32(k, v); } \
    }
#define SG_U64(KEY, MEMBER)                                                                               \
    Field {                                                                                               \
        KEY, [](const RunConfig& c) { return std::to_string(c.MEMBER); },                                 \
            [](RunConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_uint64(k, v); } \
    }
#define SG_DBL(KEY, MEMBER)                                                                               \
    Field {                                                                                               \
        KEY, [](const RunConfig& c) { return fmt(c.MEMBER); },                                            \
            [](RunConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_double(k, v); } \
    }
#define SG_STR(KEY, MEMBER)                                                                   \
    Field {                                                                                   \
        KEY, [](const RunConfig& c) { return c.MEMBER; },                                     \
            [](RunConfig& c, const std::string&, const std::string& v) { c.MEMBER = v; } \
    }
#define SG_ENUM(KEY, MEMBER, TABLE)                                                                            \
    Field {                                                                                                    \
        KEY, [](const RunConfig& c) { return enum_name(c.MEMBER, TABLE); },                                    \
            [](RunConfig& c, const std::string& k, const std::string& v) { c.MEMBER = to_enum(k, v, TABLE); } \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table{
        SG_DBL("grid.origin_x", model.grid.origin_x),
        SG_DBL("grid.origin_y", model.grid.origin_y),
        Field{"grid.voxel_size", [](const RunConfig& c) { return fmt(c.model.grid.voxel_x); },
              [](RunConfig& c, const std::string& k, const std::string& v) {
                  c.model.grid.voxel_x = c.model.grid.voxel_y = to_double(k, v);
              }},
        SG_INT("grid.width", model.grid.width),
        SG_INT("grid.height", model.grid.height),
        SG_INT("vfe.channels", model.vfe_channels),
        SG_INT("encoder.depth", model.encoder_depth),
        SG_INT("model.num_classes", model.num_classes),
        SG_INT("slotformer.num_layers", model.slotformer.num_layers),
        SG_INT("slotformer.w", model.slotformer.width),
        SG_INT("slotformer.ffn_hidden", model.slotformer.ffn_hidden),
        SG_DBL("slotformer.eps", model.slotformer.eps),
        SG_DBL("slotformer.norm_eps", model.slotformer.norm_eps),
        Field{"slotformer.pre_norm", [](const RunConfig& c) { return std::string(c.model.slotformer.pre_norm ? "true" : "false"); },
              [](RunConfig& c, const std::string& k, const std::string& v) { c.model.slotformer.pre_norm = to_bool(k, v); }},
        SG_ENUM("slotformer.partition", model.slotformer.partition, kPartitions),
        SG_INT("slotformer.window", model.slotformer.window),
        SG_INT("slotformer.set_size", model.slotformer.set_size),
        SG_ENUM("upsample.strategy", model.upsample, kUpsample),
        SG_INT("assign.n", assign.candidates),
        SG_DBL("assign.lambda", assign.lambda),
        SG_DBL("train.lr", adam.lr),
        SG_DBL("train.beta1", adam.beta1),
        SG_DBL("train.beta2", adam.beta2),
        SG_DBL("train.adam_eps", adam.eps),
        SG_DBL("train.weight_decay", adam.weight_decay),
        SG_INT("train.steps", train.steps),
        SG_INT("train.batch_size", train.batch_size),
        SG_U64("train.seed", train.seed),
        Field{"eval.iou_thresholds",
              [](const RunConfig& c) {
                  std::string s;
                  for (double t : c.eval.iou_thresholds) s += (s.empty() ? "" : ",") + fmt(t);
                  return s;
              },
              [](RunConfig& c, const std::string& k, const std::string& v) { c.eval.iou_thresholds = to_list(k, v); }},
        SG_DBL("eval.nms_iou", eval.nms_iou),
        SG_DBL("eval.score_thresh", eval.score_thresh),
        SG_U64("scene.seed", scene.seed),
        SG_INT("scene.min_objects", scene.min_objects),
        SG_INT("scene.max_objects", scene.max_objects),
        SG_INT("scene.min_points", scene.min_points),
        SG_INT("scene.max_points", scene.max_points),
        SG_DBL("scene.clutter_density", scene.clutter_density),
        SG_ENUM("scene.sampling", scene.sampling, kSampling),
        SG_DBL("scene.point_noise", scene.point_noise),
        SG_DBL("scene.min_gap", scene.min_gap),
        SG_STR("paths.scene_dir", paths.scene_dir),
        SG_STR("paths.checkpoint", paths.checkpoint),
        SG_STR("paths.metrics", paths.metrics),
        SG_STR("paths.eval_out", paths.eval_out),
    };
    return table;
}

#undef SG_INT
#undef SG_U64
#undef SG_DBL
#undef SG_STR
#undef SG_ENUM

}  // namespace

void RunConfig::validate() const {
    auto check = [](bool ok, const std::string& key, const std::string& msg) {
        if (!ok) throw ConfigError("config key '" + key + "': " + msg);
    };
    check(model.grid.voxel_x > 0.0, "grid.voxel_size", "must be positive");
    check(model.grid.width >= 1, "grid.width", "must be >= 1");
    check(model.grid.height >= 1, "grid.height", "must be >= 1");
    check(model.vfe_channels >= 1, "vfe.channels", "must be >= 1");
    check(model.encoder_depth >= 1, "encoder.depth", "must be >= 1");
    check(model.num_classes >= 1, "model.num_classes", "must be >= 1");
    check(model.num_classes <= static_cast<int>(scene.classes.size()), "model.num_classes",
          "exceeds the number of scene classes");
    check(model.slotformer.num_layers >= 0 && model.slotformer.num_layers % 2 == 0, "slotformer.num_layers",
          "must be even and non-negative");
    check(model.slotformer.width >= 1, "slotformer.w", "must be >= 1");
    check(model.slotformer.ffn_hidden >= 0, "slotformer.ffn_hidden", "must be >= 0");
    check(model.slotformer.eps > 0.0, "slotformer.eps", "must be positive");
    check(model.slotformer.norm_eps > 0.0, "slotformer.norm_eps", "must be positive");
    check(model.slotformer.window >= 1, "slotformer.window", "must be >= 1");
    check(model.slotformer.set_size >= 1, "slotformer.set_size", "must be >= 1");
    check(assign.candidates >= 1, "assign.n", "must be >= 1");
    check(assign.lambda >= 0.0, "assign.lambda", "must be >= 0");
    check(adam.lr > 0.0, "train.lr", "must be positive");
    check(adam.beta1 >= 0.0 && adam.beta1 < 1.0, "train.beta1", "must lie in [0, 1)");
    check(adam.beta2 >= 0.0 && adam.beta2 < 1.0, "train.beta2", "must lie in [0, 1)");
    check(adam.eps > 0.0, "train.adam_eps", "must be positive");
    check(adam.weight_decay >= 0.0, "train.weight_decay", "must be >= 0");
    check(train.steps >= 0, "train.steps", "must be >= 0");
    check(train.batch_size >= 1, "train.batch_size", "must be >= 1");
    check(!eval.iou_thresholds.empty(), "eval.iou_thresholds", "must not be empty");
    for (double t : eval.iou_thresholds) check(t > 0.0 && t <= 1.0, "eval.iou_thresholds", "entries must lie in (0, 1]");
    check(eval.nms_iou >= 0.0 && eval.nms_iou <= 1.0, "eval.nms_iou", "must lie in [0, 1]");
    check(eval.score_thresh >= 0.0 && eval.score_thresh <= 1.0, "eval.score_thresh", "must lie in [0, 1]");
    check(scene.min_objects >= 0 && scene.max_objects >= scene.min_objects, "scene.max_objects",
          "must be >= scene.min_objects >= 0");
    check(scene.min_points >= 0 && scene.max_points >= scene.min_points, "scene.max_points",
          "must be >= scene.min_points >= 0");
    check(scene.clutter_density >= 0.0, "scene.clutter_density", "must be >= 0");
    check(scene.point_noise >= 0.0, "scene.point_noise", "must be >= 0");
    check(scene.min_gap >= 0.0, "scene.min_gap", "must be >= 0");
    model.validate();
    scene_spec(0).validate();
}

SceneSpec RunConfig::scene_spec(std::uint64_t index) const {
    SceneSpec s = scene;
    s.seed = mix_seed(scene.seed, index);
    s.origin_x = model.grid.origin_x;
    s.origin_y = model.grid.origin_y;
    s.extent_x = model.grid.width * model.grid.voxel_x;
    s.extent_y = model.grid.height * model.grid.voxel_y;
    s.classes.resize(static_cast<std::size_t>(model.num_classes));
    return s;
}

RunConfig parse_config(std::istream& in) {
    std::map<std::string, const Field*> by_key;
    for (const Field& f : fields()) by_key.emplace(f.key, &f);
    RunConfig config;
    std::set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto it = by_key.find(key);
        if (it == by_key.end()) throw ConfigError("config key '" + key + "': unknown key");
        if (!seen.insert(key).second) throw ConfigError("config key '" + key + "': set more than once");
        it->second->set(config, key, value);
    }
    config.validate();
    return config;
}

RunConfig parse_config_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse_config(in);
}

std::string to_text(const RunConfig& config) {
    std::string out;
    for (const Field& f : fields()) out += f.key + " = " + f.get(config) + "\n";
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const Field& f : fields()) keys.push_back(f.key);
    return keys;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace slotgrid
