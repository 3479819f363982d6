#include "helpers.hpp"

#include "slotgrid/losses.hpp"
#include "slotgrid/parallel.hpp"
#include "slotgrid/training.hpp"
#include "slotgrid_oracles/checks.hpp"

#include <doctest.h>

#include <sstream>

using namespace slotgrid;
using namespace testing;

namespace {

RunConfig tiny_config() {
    RunConfig c;
    c.model.grid.width = c.model.grid.height = 64;
    c.model.vfe_channels = 4;
    c.model.slotformer.num_layers = 2;
    c.model.slotformer.width = 4;
    c.scene.max_objects = 2;
    c.scene.min_objects = 1;
    c.train.steps = 6;
    c.validate();
    return c;
}

std::vector<SceneInput> tiny_scenes(const RunConfig& c, int count) {
    std::vector<SceneInput> out;
    for (int i = 0; i < count; ++i) out.push_back(prepare_scene(generate_scene(c.scene_spec(i)), c.model.grid));
    return with_boxes(std::move(out));
}

std::vector<LossBreakdown> run(const RunConfig& c, std::span<const SceneInput> scenes) {
    TrainState st(c);
    std::vector<LossBreakdown> out;
    while (st.step < c.train.steps) out.push_back(train_one_step(st, scenes).losses);
    return out;
}

bool identical(const std::vector<LossBreakdown>& a, const std::vector<LossBreakdown>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].cls != b[i].cls || a[i].reg != b[i].reg || a[i].total != b[i].total) return false;
    return true;
}

}  // namespace

TEST_CASE("config parsing") {
    SUBCASE("defaults") {
        const RunConfig c = parse_config_text("");
        CHECK(c.model.slotformer.width == 12);
        CHECK(c.assign.candidates == 5);
        CHECK(c.adam.lr == 0.003);
        CHECK(c.model.slotformer.num_layers == 4);
        CHECK(c.model.encoder_channels() == 64);
    }
    SUBCASE("values and comments") {
        const RunConfig c = parse_config_text("# run\nslotformer.w = 8  # narrower\ntrain.lr=0.01\n\neval.iou_thresholds = 0.3, 0.6\n");
        CHECK(c.model.slotformer.width == 8);
        CHECK(c.adam.lr == 0.01);
        CHECK(c.eval.iou_thresholds == std::vector<double>{0.3, 0.6});
    }
    SUBCASE("round trip through text") {
        RunConfig c;
        c.adam.lr = 0.1 + 0.2;
        c.model.upsample = UpsampleStrategy::SmSu;
        c.model.slotformer.partition = PartitionKind::WindowSet;
        c.scene.sampling = SurfaceSampling::Ring;
        CHECK(to_text(parse_config_text(to_text(c))) == to_text(c));
        CHECK(parse_config_text(to_text(c)).adam.lr == c.adam.lr);
    }
    SUBCASE("errors name the key") {
        auto message = [](const std::string& text) {
            try {
                parse_config_text(text);
            } catch (const ConfigError& e) {
                return std::string(e.what());
            }
            return std::string();
        };
        CHECK(message("slotformer.width = 3").find("slotformer.width") != std::string::npos);
        CHECK(message("slotformer.w = twelve").find("slotformer.w") != std::string::npos);
        CHECK(message("slotformer.w = 3\nslotformer.w = 4").find("slotformer.w") != std::string::npos);
        CHECK(message("upsample.strategy = bilinear").find("upsample.strategy") != std::string::npos);
        CHECK(message("assign.n = 0").find("assign.n") != std::string::npos);
        CHECK(message("just words").size() > 0);
        CHECK(message("train.steps = 5.5").find("train.steps") != std::string::npos);
    }
    SUBCASE("every key is listed once") {
        const auto keys = config_keys();
        CHECK(std::set<std::string>(keys.begin(), keys.end()).size() == keys.size());
        CHECK(std::find(keys.begin(), keys.end(), "train.lr") != keys.end());
    }
}

TEST_CASE("scene seeds are independent per index") {
    RunConfig c;
    CHECK(c.scene_spec(0).seed != c.scene_spec(1).seed);
    CHECK(c.scene_spec(3).seed == c.scene_spec(3).seed);
    CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}

TEST_CASE("a repeated step on one scene lowers the loss") {
    const ModelConfig mc = oracle::gradient_check_config();
    int descents = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const SceneInput scene = oracle::random_small_scene(mc, 10, seed);
        Model model(mc, seed);
        OptimizerState opt;
        opt.config.lr = 1e-4;
        const SceneInput* batch[] = {&scene};
        const double first = train_step(model, batch, {}, opt).losses.total;
        const double second = train_step(model, batch, {}, opt).losses.total;
        descents += second <= first ? 1 : 0;
    }
    CHECK(descents >= 18);
}

TEST_CASE("lambda zero removes the regression gradient") {
    const ModelConfig mc = oracle::gradient_check_config();
    const SceneInput scene = oracle::random_small_scene(mc, 10, 3);
    const Model model(mc, 3);
    const AssignmentResult fixed = scene_loss(model, scene, {5, 2.0}, nullptr, false).assignment;
    const SceneLoss zero = scene_loss(model, scene, {5, 0.0}, &fixed, true);

    ad::Tape tape;
    const Model::Graph g = model.forward(tape, scene.raw, true);
    const ad::Var cls = ad::focal_loss(g.scores, fixed.cls_target, kFocalGamma);
    tape.backward(cls);
    REQUIRE(zero.grads.size() == g.params.size());
    for (std::size_t i = 0; i < g.params.size(); ++i) CHECK(zero.grads[i] == tape.grad(g.params[i]));
}

TEST_CASE("assignment is detached from the gradient") {
    const ModelConfig mc = oracle::gradient_check_config();
    const SceneInput scene = oracle::random_small_scene(mc, 10, 4);
    const Model model(mc, 4);
    const SceneLoss natural = scene_loss(model, scene, {}, nullptr, true);
    const SceneLoss pinned = scene_loss(model, scene, {}, &natural.assignment, true);
    CHECK(natural.losses.total == pinned.losses.total);
    for (std::size_t i = 0; i < natural.grads.size(); ++i) CHECK(natural.grads[i] == pinned.grads[i]);

    AssignmentResult forced = natural.assignment;
    forced.cls_target.setZero();
    std::fill(forced.positive_gt.begin(), forced.positive_gt.end(), -1);
    forced.positive_gt[0] = 0;
    forced.cls_target(0, scene.boxes[0].class_id) = 1.0;
    CHECK(scene_loss(model, scene, {}, &forced, false).losses.total != natural.losses.total);
}

TEST_CASE("grad-check mode does not change the step") {
    const ModelConfig mc = oracle::gradient_check_config();
    const SceneInput scene = oracle::random_small_scene(mc, 10, 5);
    const SceneInput* batch[] = {&scene};
    Model a(mc, 5), b(mc, 5);
    OptimizerState oa, ob;
    TrainStepOptions check;
    check.grad_check = true;
    const auto ra = train_step(a, batch, {}, oa);
    const auto rb = train_step(b, batch, {}, ob, check);
    CHECK(ra.losses.total == rb.losses.total);
    for (std::size_t i = 0; i < a.params().size(); ++i) CHECK(a.params()[i] == b.params()[i]);
}

TEST_CASE("training without ground truth is rejected") {
    const ModelConfig mc = oracle::gradient_check_config();
    SceneInput scene = oracle::random_small_scene(mc, 10, 6);
    scene.boxes.clear();
    Model model(mc, 0);
    OptimizerState opt;
    const SceneInput* batch[] = {&scene};
    CHECK_THROWS(train_step(model, batch, {}, opt));
    CHECK_THROWS(with_boxes({scene}));
}

TEST_CASE("training is deterministic") {
    const RunConfig c = tiny_config();
    const auto scenes = tiny_scenes(c, 4);
    const int saved = thread_count();
    set_thread_count(1);
    const auto one = run(c, scenes);
    CHECK(identical(one, run(c, scenes)));
    set_thread_count(4);
    CHECK(identical(one, run(c, scenes)));
    set_thread_count(saved);
}

TEST_CASE("checkpoints") {
    RunConfig c = tiny_config();
    const auto scenes = tiny_scenes(c, 4);
    TrainState st(c);
    for (int i = 0; i < 3; ++i) train_one_step(st, scenes);

    std::stringstream buf;
    write_checkpoint(buf, st);
    const std::string bytes = buf.str();
    TrainState back = read_checkpoint(buf);
    CHECK(back.step == 3);
    CHECK(to_text(back.config) == to_text(c));
    CHECK(back.rng == st.rng);
    CHECK(back.optimizer.step == st.optimizer.step);
    for (std::size_t i = 0; i < st.model.params().size(); ++i) CHECK(back.model.params()[i] == st.model.params()[i]);

    SUBCASE("resumed training matches the uninterrupted run") {
        std::vector<LossBreakdown> a, b;
        while (st.step < c.train.steps) a.push_back(train_one_step(st, scenes).losses);
        while (back.step < c.train.steps) b.push_back(train_one_step(back, scenes).losses);
        CHECK(identical(a, b));
    }
    SUBCASE("re-serialisation is byte identical") {
        std::stringstream again;
        write_checkpoint(again, back);
        CHECK(again.str() == bytes);
    }
    SUBCASE("truncated or corrupted input is rejected") {
        std::stringstream cut(bytes.substr(0, bytes.size() / 2));
        CHECK_THROWS(read_checkpoint(cut));
        std::string bad = bytes;
        bad[0] = 'X';
        std::stringstream wrong(bad);
        CHECK_THROWS(read_checkpoint(wrong));
    }
}

TEST_CASE("metrics rows") {
    StepRecord r;
    r.step = 7;
    r.losses = {0.5, 0.25, 1.0};
    r.seconds = 0.125;
    CHECK(format_metrics_row(r) == "7,0.5,0.25,1,0.125000");
}
