#include "slotgrid/model.hpp"

#include "slotgrid/eval.hpp"
#include "slotgrid/losses.hpp"
#include "slotgrid/voxelize.hpp"

#include <cmath>
#include <random>

namespace slotgrid {

void ModelConfig::validate() const {
    grid.validate();
    require(grid.stride == 1, "model grid must be the stride-1 base grid");
    require(vfe_channels >= 1, "vfe channels must be >= 1");
    require(encoder_depth >= 1, "encoder depth must be >= 1");
    require(num_classes >= 1, "need at least one class");
    slotformer.validate();
}

std::size_t ParameterSet::add(std::string name, MatrixXd value) {
    require(!index_.contains(name), "duplicate parameter name " + name);
    index_.emplace(name, values_.size());
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return values_.size() - 1;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("unknown parameter " + name);
    return it->second;
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
    return n;
}

SceneInput prepare_scene(const Scene& scene, const GridSpec& grid) {
    return {voxelize_raw(scene.points, grid), scene.boxes};
}

namespace {

MatrixXd gaussian(std::mt19937_64& rng, Index rows, Index cols, double stddev) {
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng) * stddev;
    return m;
}

MatrixXd zeros_row(Index n) { return MatrixXd::Zero(1, n); }
MatrixXd ones_row(Index n) { return MatrixXd::Ones(1, n); }

std::string stage_name(int s, const char* part) { return "encoder." + std::to_string(s) + "." + part; }
std::string layer_name(int l, const char* part) { return "slotformer." + std::to_string(l) + "." + part; }

}  // namespace

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    std::mt19937_64 rng(seed);
    auto he = [&](Index fan_in, Index rows, Index cols) {
        return gaussian(rng, rows, cols, std::sqrt(2.0 / static_cast<double>(fan_in)));
    };
    Index c = config_.vfe_channels;
    params_.add("vfe.weight", he(kRawVoxelFeatures, kRawVoxelFeatures, c));
    params_.add("vfe.bias", zeros_row(c));
    for (int s = 0; s < config_.encoder_depth; ++s) {
        for (const char* sub : {"subm0", "subm1"}) {
            params_.add(stage_name(s, sub) + ".weight", he(9 * c, 9 * c, c));
            params_.add(stage_name(s, sub) + ".bias", zeros_row(c));
        }
        params_.add(stage_name(s, "down") + ".weight", he(9 * c, 9 * c, 2 * c));
        params_.add(stage_name(s, "down") + ".bias", zeros_row(2 * c));
        c *= 2;
    }
    const Index hidden = config_.ffn_hidden();
    const double attn_std = 1.0 / std::sqrt(static_cast<double>(c));
    for (int l = 0; l < config_.slotformer.num_layers; ++l) {
        for (const char* w : {"w_q", "w_k", "w_v"}) params_.add(layer_name(l, w), gaussian(rng, c, c, attn_std));
        params_.add(layer_name(l, "w_out"), gaussian(rng, c, c, 0.5 * attn_std));
        params_.add(layer_name(l, "ffn_w1"), he(c, c, hidden));
        params_.add(layer_name(l, "ffn_b1"), zeros_row(hidden));
        params_.add(layer_name(l, "ffn_w2"), gaussian(rng, hidden, c, 0.5 / std::sqrt(static_cast<double>(hidden))));
        params_.add(layer_name(l, "ffn_b2"), zeros_row(c));
        params_.add(layer_name(l, "norm1_gamma"), ones_row(c));
        params_.add(layer_name(l, "norm1_beta"), zeros_row(c));
        params_.add(layer_name(l, "norm2_gamma"), ones_row(c));
        params_.add(layer_name(l, "norm2_beta"), zeros_row(c));
    }
    params_.add("upsample.weight", he(9 * c, 9 * c, c));
    params_.add("upsample.bias", zeros_row(c));

    const Index k = config_.num_classes;
    params_.add("head.cls_hidden.weight", he(c, c, c));
    params_.add("head.cls_hidden.bias", zeros_row(c));
    params_.add("head.cls_out.weight", gaussian(rng, c, k, 0.01));
    // Logistic prior of about 0.1 on every class.
    params_.add("head.cls_out.bias", MatrixXd::Constant(1, k, -2.19));
    params_.add("head.reg_hidden.weight", he(c, c, c));
    params_.add("head.reg_hidden.bias", zeros_row(c));
    params_.add("head.reg_out.weight", gaussian(rng, c, kBoxCodeSize, 0.01));
    MatrixXd reg_bias = zeros_row(kBoxCodeSize);
    reg_bias(0, 2) = 0.8;  // dz
    reg_bias(0, 7) = 1.0;  // cos(yaw)
    params_.add("head.reg_out.bias", reg_bias);
}

Model::Model(ModelConfig config, ParameterSet params) : config_(std::move(config)) {
    config_.validate();
    Model reference(config_, 0);
    require(params.size() == reference.params_.size(), "parameter count does not match the model configuration");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const MatrixXd& want = reference.params_[i];
        if (params.name(i) != reference.params_.name(i) || params[i].rows() != want.rows() ||
            params[i].cols() != want.cols())
            throw DimensionMismatch("parameter " + params.name(i) + " does not match the model configuration");
    }
    params_ = std::move(params);
}

Model::Graph Model::forward(ad::Tape& tape, const SparseTensor<double>& raw, bool trainable) const {
    require(raw.channels() == kRawVoxelFeatures, "model expects raw 4-channel voxels");
    require(raw.grid() == config_.grid, "voxels were built on a different grid");
    if (raw.size() == 0) throw EmptyInput("scene has no voxels");
    Graph graph;
    for (std::size_t i = 0; i < params_.size(); ++i)
        graph.params.push_back(trainable ? tape.variable(params_[i]) : tape.constant(params_[i]));
    auto P = [&](const std::string& name) { return graph.params[params_.index_of(name)]; };
    auto conv = [&](ad::Var x, const std::shared_ptr<const Rulebook>& book, const std::string& prefix) {
        return ad::relu(ad::sparse_conv(x, book, P(prefix + ".weight"), P(prefix + ".bias")));
    };
    auto linear = [&](ad::Var x, const std::string& w, const std::string& b) {
        return ad::add_row(ad::matmul(x, P(w)), P(b));
    };

    SparseLayout layout = raw.layout();
    ad::Var x = ad::relu(linear(tape.constant(raw.features()), "vfe.weight", "vfe.bias"));

    for (int s = 0; s < config_.encoder_depth; ++s) {
        auto subm = std::make_shared<const Rulebook>(submanifold_rulebook(layout, 3));
        x = conv(x, subm, stage_name(s, "subm0"));
        x = conv(x, subm, stage_name(s, "subm1"));
        auto down = std::make_shared<const Rulebook>(regular_rulebook(layout, 3, 2));
        x = conv(x, down, stage_name(s, "down"));
        layout = down->output;
    }

    const SlotFormerConfig& sf = config_.slotformer;
    for (int l = 0; l < sf.num_layers; ++l) {
        auto groups = std::make_shared<const Grouping>(layer_grouping(layout, layer_axis(l), sf));
        auto norm = [&](ad::Var v, const char* gamma, const char* beta) {
            return sf.pre_norm ? ad::layer_norm(v, P(layer_name(l, gamma)), P(layer_name(l, beta)), sf.norm_eps) : v;
        };
        const ad::Var h = norm(x, "norm1_gamma", "norm1_beta");
        const ad::Var q = ad::relu(ad::matmul(h, P(layer_name(l, "w_q"))));
        const ad::Var k = ad::relu(ad::matmul(h, P(layer_name(l, "w_k"))));
        const ad::Var v = ad::matmul(h, P(layer_name(l, "w_v")));
        x = x + ad::matmul(ad::kernelized_attention(q, k, v, groups, sf.eps), P(layer_name(l, "w_out")));
        const ad::Var h2 = norm(x, "norm2_gamma", "norm2_beta");
        const ad::Var ffn = ad::relu(linear(h2, layer_name(l, "ffn_w1"), layer_name(l, "ffn_b1")));
        x = x + linear(ffn, layer_name(l, "ffn_w2"), layer_name(l, "ffn_b2"));
    }

    if (config_.upsample == UpsampleStrategy::SpSu) {
        auto book = std::make_shared<const Rulebook>(regular_rulebook(double_coords(layout), 3, 1));
        x = conv(x, book, "upsample");
        layout = book->output;
    } else {
        auto [fine, source] = repeat_coords(layout);
        x = ad::gather_rows(x, std::move(source));
        auto book = std::make_shared<const Rulebook>(submanifold_rulebook(fine, 3));
        x = conv(x, book, "upsample");
        layout = std::move(fine);
    }

    const ad::Var cls_h = ad::relu(linear(x, "head.cls_hidden.weight", "head.cls_hidden.bias"));
    graph.scores = ad::sigmoid(linear(cls_h, "head.cls_out.weight", "head.cls_out.bias"));
    const ad::Var reg_h = ad::relu(linear(x, "head.reg_hidden.weight", "head.reg_hidden.bias"));
    graph.encodings = linear(reg_h, "head.reg_out.weight", "head.reg_out.bias");
    graph.layout = std::move(layout);
    return graph;
}

Model::Output Model::infer(const SparseTensor<double>& raw) const {
    ad::Tape tape;
    Graph g = forward(tape, raw, false);
    return {g.scores.value(), g.encodings.value(), std::move(g.layout)};
}

std::vector<BoxPrediction> Model::detect(const SparseTensor<double>& raw, double nms_iou, double score_thresh) const {
    const Output out = infer(raw);
    return nms_bev(decode_boxes(out.encodings, out.scores, out.layout), nms_iou, score_thresh);
}

SceneLoss scene_loss(const Model& model, const SceneInput& scene, const AssignConfig& assign,
                     const AssignmentResult* fixed, bool want_grads) {
    ad::Tape tape;
    return scene_loss(tape, model, scene, assign, fixed, want_grads);
}

SceneLoss scene_loss(ad::Tape& tape, const Model& model, const SceneInput& scene, const AssignConfig& assign,
                     const AssignmentResult* fixed, bool want_grads) {
    const Model::Graph g = model.forward(tape, scene.raw, want_grads);
    SceneLoss out;
    if (fixed) {
        out.assignment = *fixed;
    } else {
        const auto preds = decode_boxes(g.encodings.value(), g.scores.value(), g.layout);
        out.assignment = dynamic_assign(g.layout, preds, scene.boxes, assign, model.config().num_classes);
    }
    const AssignmentResult& a = out.assignment;
    if (a.cls_target.rows() != g.layout.size()) throw DimensionMismatch("assignment does not match head voxels");

    std::vector<ad::BoxTarget> targets;
    for (Index row = 0; row < g.layout.size(); ++row) {
        const int gt = a.positive_gt[static_cast<std::size_t>(row)];
        if (gt >= 0) targets.push_back({row, g.layout.center_x(row), g.layout.center_y(row), scene.boxes[gt]});
    }
    const double positives = std::max<double>(1.0, static_cast<double>(targets.size()));
    const ad::Var cls = ad::focal_loss(g.scores, a.cls_target, kFocalGamma);
    const ad::Var reg = ad::box_regression_loss(g.encodings, std::move(targets)) * (1.0 / positives);
    const ad::Var total = cls + reg * assign.lambda;
    out.losses = {cls.value()(0, 0), reg.value()(0, 0), total.value()(0, 0)};
    if (want_grads) {
        tape.backward(total);
        for (const ad::Var& p : g.params) out.grads.push_back(tape.grad(p));
    }
    return out;
}

TrainStepResult train_step(Model& model, std::span<const SceneInput* const> batch, const AssignConfig& assign,
                           OptimizerState& opt, const TrainStepOptions& options) {
    require(!batch.empty(), "empty training batch");
    const double inv = 1.0 / static_cast<double>(batch.size());
    TrainStepResult result;
    std::vector<MatrixXd> grads;
    std::vector<AssignmentResult> assignments;
    for (const SceneInput* scene : batch) {
        require(!scene->boxes.empty(), "training scene has no ground-truth boxes");
        SceneLoss sl = scene_loss(model, *scene, assign, nullptr, true);
        result.losses.cls += inv * sl.losses.cls;
        result.losses.reg += inv * sl.losses.reg;
        result.losses.total += inv * sl.losses.total;
        if (grads.empty()) {
            for (auto& g : sl.grads) grads.push_back(inv * g);
        } else {
            for (std::size_t i = 0; i < grads.size(); ++i) grads[i] += inv * sl.grads[i];
        }
        if (options.grad_check) assignments.push_back(std::move(sl.assignment));
    }

    if (options.grad_check) {
        // Central differences on sampled entries, with the assignment held fixed.
        std::mt19937_64 rng(options.grad_check_seed);
        ParameterSet& params = model.params();
        auto batch_loss = [&] {
            double total = 0.0;
            for (std::size_t b = 0; b < batch.size(); ++b)
                total += inv * scene_loss(model, *batch[b], assign, &assignments[b], false).losses.total;
            return total;
        };
        const double step = 1e-5;
        for (int s = 0; s < options.grad_check_samples; ++s) {
            const std::size_t p = std::uniform_int_distribution<std::size_t>(0, params.size() - 1)(rng);
            const Index e = std::uniform_int_distribution<Index>(0, params[p].size() - 1)(rng);
            const double saved = params[p].data()[e];
            params[p].data()[e] = saved + step;
            const double up = batch_loss();
            params[p].data()[e] = saved - step;
            const double down = batch_loss();
            params[p].data()[e] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double analytic = grads[p].data()[e];
            const double err = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6});
            result.grad_check_error = std::max(result.grad_check_error, err);
        }
    }

    adam_step(model.params().values(), grads, opt);
    return result;
}

}  // namespace slotgrid
