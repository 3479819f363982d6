#include "slotgrid_oracles/oracles.hpp"

#include "slotgrid/geometry.hpp"
#include "slotgrid/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace slotgrid::oracle {

DenseGrid<double> dense_conv(const DenseGrid<double>& in, const ConvKernel<double>& kernel, int stride) {
    const int k = kernel.size, half = k / 2;
    const Index cin = kernel.in_channels(), cout = kernel.out_channels();
    const int ow = (in.width + stride - 1) / stride, oh = (in.height + stride - 1) / stride;
    DenseGrid<double> out(ow, oh, cout);
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
            for (Index co = 0; co < cout; ++co) {
                double acc = kernel.bias(co);
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx) {
                        const int ix = ox * stride + dx - half, iy = oy * stride + dy - half;
                        if (ix < 0 || iy < 0 || ix >= in.width || iy >= in.height) continue;
                        for (Index ci = 0; ci < cin; ++ci)
                            acc += in.at(ix, iy, ci) * kernel.weights((dy * k + dx) * cin + ci, co);
                    }
                out.at(ox, oy, co) = acc;
            }
    return out;
}

std::vector<bool> dense_reachable(const std::vector<bool>& occupied, int width, int height, int k, int stride) {
    const int half = k / 2;
    const int ow = (width + stride - 1) / stride, oh = (height + stride - 1) / stride;
    std::vector<bool> out(static_cast<std::size_t>(ow) * oh, false);
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox)
            for (int dy = 0; dy < k; ++dy)
                for (int dx = 0; dx < k; ++dx) {
                    const int ix = ox * stride + dx - half, iy = oy * stride + dy - half;
                    if (ix >= 0 && iy >= 0 && ix < width && iy < height &&
                        occupied[static_cast<std::size_t>(iy) * width + ix])
                        out[static_cast<std::size_t>(oy) * ow + ox] = true;
                }
    return out;
}

namespace {

std::vector<bool> occupancy(const SparseTensor<double>& t) {
    std::vector<bool> occ(static_cast<std::size_t>(t.grid().width) * t.grid().height, false);
    for (const Coord& c : t.coords()) occ[static_cast<std::size_t>(c.iy) * t.grid().width + c.ix] = true;
    return occ;
}

// Builds a sparse tensor holding the dense values at every cell flagged in `mask`.
SparseTensor<double> gather_mask(const DenseGrid<double>& dense, const std::vector<bool>& mask, const GridSpec& grid) {
    std::vector<Coord> coords;
    for (int iy = 0; iy < dense.height; ++iy)
        for (int ix = 0; ix < dense.width; ++ix)
            if (mask[static_cast<std::size_t>(iy) * dense.width + ix]) coords.push_back({ix, iy});
    MatrixXd f(static_cast<Index>(coords.size()), dense.channels);
    for (Index r = 0; r < f.rows(); ++r)
        for (Index c = 0; c < dense.channels; ++c) f(r, c) = dense.at(coords[r].ix, coords[r].iy, c);
    return SparseTensor<double>(SparseLayout(grid, std::move(coords)), std::move(f));
}

}  // namespace

double max_error_at_coords(const SparseTensor<double>& sparse, const DenseGrid<double>& dense) {
    double err = 0.0;
    for (Index r = 0; r < sparse.size(); ++r)
        for (Index c = 0; c < sparse.channels(); ++c) {
            const double want = dense.at(sparse.coords()[r].ix, sparse.coords()[r].iy, c);
            err = std::max(err, std::abs(sparse.features()(r, c) - want) / std::max(1.0, std::abs(want)));
        }
    return err;
}

SparseTensor<double> dense_submanifold(const SparseTensor<double>& in, const ConvKernel<double>& kernel) {
    const auto out = dense_conv(densify(in), kernel, 1);
    return gather_mask(out, occupancy(in), in.grid());
}

SparseTensor<double> dense_regular(const SparseTensor<double>& in, const ConvKernel<double>& kernel) {
    const auto out = dense_conv(densify(in), kernel, kernel.stride);
    const auto mask = dense_reachable(occupancy(in), in.grid().width, in.grid().height, kernel.size, kernel.stride);
    GridSpec g = in.grid();
    if (kernel.stride == 2) {
        g.stride *= 2;
        g.width = out.width;
        g.height = out.height;
    }
    return gather_mask(out, mask, g);
}

SparseTensor<double> dense_upsample_sp(const SparseTensor<double>& in, const ConvKernel<double>& kernel) {
    const auto coarse = densify(in);
    DenseGrid<double> fine(coarse.width * 2, coarse.height * 2, coarse.channels);
    std::vector<bool> occ(static_cast<std::size_t>(fine.width) * fine.height, false);
    for (const Coord& c : in.coords()) {
        occ[static_cast<std::size_t>(2 * c.iy) * fine.width + 2 * c.ix] = true;
        for (Index ch = 0; ch < fine.channels; ++ch) fine.at(2 * c.ix, 2 * c.iy, ch) = coarse.at(c.ix, c.iy, ch);
    }
    const auto out = dense_conv(fine, kernel, 1);
    GridSpec g = in.grid();
    g.stride /= 2;
    g.width = fine.width;
    g.height = fine.height;
    return gather_mask(out, dense_reachable(occ, fine.width, fine.height, kernel.size, 1), g);
}

SparseTensor<double> dense_upsample_sm(const SparseTensor<double>& in, const ConvKernel<double>& kernel) {
    const auto coarse = densify(in);
    const auto coarse_occ = occupancy(in);
    DenseGrid<double> fine(coarse.width * 2, coarse.height * 2, coarse.channels);
    std::vector<bool> occ(static_cast<std::size_t>(fine.width) * fine.height, false);
    for (int y = 0; y < fine.height; ++y)
        for (int x = 0; x < fine.width; ++x) {
            occ[static_cast<std::size_t>(y) * fine.width + x] =
                coarse_occ[static_cast<std::size_t>(y / 2) * coarse.width + x / 2];
            for (Index ch = 0; ch < fine.channels; ++ch) fine.at(x, y, ch) = coarse.at(x / 2, y / 2, ch);
        }
    const auto out = dense_conv(fine, kernel, 1);
    GridSpec g = in.grid();
    g.stride /= 2;
    g.width = fine.width;
    g.height = fine.height;
    return gather_mask(out, occ, g);
}

double compare_sparse(const SparseTensor<double>& actual, const SparseTensor<double>& expected) {
    if (actual.coords() != expected.coords() || actual.channels() != expected.channels() ||
        !(actual.grid() == expected.grid()))
        return std::numeric_limits<double>::infinity();
    double err = 0.0;
    for (Index i = 0; i < actual.features().size(); ++i) {
        const double a = actual.features().data()[i], b = expected.features().data()[i];
        err = std::max(err, std::abs(a - b) / std::max(1.0, std::abs(b)));
    }
    return err;
}

MatrixXd explicit_attention(const MatrixXd& q, const MatrixXd& k, const MatrixXd& v,
                            std::span<const Index> group_of, double eps) {
    const Index n = q.rows();
    MatrixXd out = MatrixXd::Zero(n, v.cols());
    for (Index i = 0; i < n; ++i) {
        double norm = 0.0;
        for (Index j = 0; j < n; ++j) {
            if (group_of[j] != group_of[i]) continue;
            double sim = 0.0;
            for (Index c = 0; c < q.cols(); ++c) sim += q(i, c) * k(j, c);
            norm += sim;
            for (Index c = 0; c < v.cols(); ++c) out(i, c) += sim * v(j, c);
        }
        for (Index c = 0; c < v.cols(); ++c) out(i, c) /= norm + eps;
    }
    return out;
}

double max_relative_error(const MatrixXd& actual, const MatrixXd& expected, double floor) {
    if (actual.rows() != expected.rows() || actual.cols() != expected.cols())
        return std::numeric_limits<double>::infinity();
    double err = 0.0;
    for (Index i = 0; i < actual.size(); ++i) {
        const double a = actual.data()[i], b = expected.data()[i];
        const double diff = std::abs(a - b);
        if (diff == 0.0) continue;
        err = std::max(err, diff / std::max(std::abs(b), floor));
    }
    return err;
}

std::map<std::pair<int, int>, BucketMean> bucket_points(std::span<const Point> points, const GridSpec& grid) {
    std::map<std::pair<int, int>, BucketMean> buckets;
    const double cx = grid.cell_x(), cy = grid.cell_y();
    for (const Point& p : points) {
        const int ix = static_cast<int>(std::floor((p.x - grid.origin_x) / cx));
        const int iy = static_cast<int>(std::floor((p.y - grid.origin_y) / cy));
        if (ix < 0 || iy < 0 || ix >= grid.width || iy >= grid.height) continue;
        BucketMean& b = buckets[{ix, iy}];
        const double center_x = grid.origin_x + (ix + 0.5) * cx;
        const double center_y = grid.origin_y + (iy + 0.5) * cy;
        // Running mean.
        ++b.count;
        const Eigen::Vector4d sample(p.x - center_x, p.y - center_y, p.z, p.intensity);
        b.mean += (sample - b.mean) / b.count;
    }
    return buckets;
}

std::vector<Index> brute_force_nearest(const SparseLayout& voxels, const BoxLabel& gt, int n) {
    std::vector<std::tuple<double, Index>> all;
    for (Index i = 0; i < voxels.size(); ++i)
        all.emplace_back(std::hypot(voxels.center_x(i) - gt.cx, voxels.center_y(i) - gt.cy), i);
    std::sort(all.begin(), all.end());
    std::vector<Index> out;
    for (std::size_t i = 0; i < all.size() && static_cast<int>(i) < n; ++i) out.push_back(std::get<1>(all[i]));
    return out;
}

AssignmentResult brute_force_assign(const SparseLayout& voxels, std::span<const BoxPrediction> preds,
                                    std::span<const BoxLabel> gts, const AssignConfig& cfg, int num_classes) {
    AssignmentResult r;
    r.cls_target = MatrixXd::Zero(voxels.size(), num_classes);
    r.positive_gt.assign(static_cast<std::size_t>(voxels.size()), -1);
    struct Pair {
        double cost;
        std::size_t gt;
        Index row;
    };
    std::vector<Pair> pairs;
    std::vector<int> quota;
    for (std::size_t g = 0; g < gts.size(); ++g) {
        GtAssignment a;
        a.candidate_rows = brute_force_nearest(voxels, gts[g], cfg.candidates);
        double iou_sum = 0.0;
        for (Index row : a.candidate_rows) {
            const BoxPrediction& p = preds[row];
            // Focal term against target 1 reduces to -(1 - s)^2 log s.
            const double s = std::max(p.scores[static_cast<std::size_t>(gts[g].class_id)], 1e-12);
            const double cls = (1.0 - std::min(s, 1.0)) * (1.0 - std::min(s, 1.0)) * -std::log(s);
            const double cost = cls + cfg.lambda * rw_iou_loss<double>(p.box, gts[g]);
            const double iou = rotated_iou_bev(p.box, gts[g]);
            a.selection_costs.push_back(cost);
            a.ious.push_back(iou);
            iou_sum += iou;
            pairs.push_back({cost, g, row});
        }
        int k = static_cast<int>(std::floor(iou_sum));
        if (k < 1) k = 1;
        if (k > static_cast<int>(a.candidate_rows.size())) k = static_cast<int>(a.candidate_rows.size());
        a.k = k;
        quota.push_back(k);
        r.per_gt.push_back(std::move(a));
    }
    // Selection by repeated minimum over the remaining eligible pairs.
    std::vector<bool> used(pairs.size(), false);
    std::vector<int> taken(gts.size(), 0);
    while (true) {
        int best = -1;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            if (used[i]) continue;
            const Pair& p = pairs[i];
            if (taken[p.gt] >= quota[p.gt] || r.positive_gt[static_cast<std::size_t>(p.row)] >= 0) continue;
            if (best < 0 || std::tie(p.cost, p.gt, p.row) < std::tie(pairs[best].cost, pairs[best].gt, pairs[best].row))
                best = static_cast<int>(i);
        }
        if (best < 0) break;
        used[static_cast<std::size_t>(best)] = true;
        const Pair& p = pairs[static_cast<std::size_t>(best)];
        r.positive_gt[static_cast<std::size_t>(p.row)] = static_cast<int>(p.gt);
        r.per_gt[p.gt].positive_rows.push_back(p.row);
        ++taken[p.gt];
    }
    // Targets: candidates first, positives overwrite.
    for (std::size_t g = 0; g < gts.size(); ++g) {
        const auto& a = r.per_gt[g];
        for (std::size_t c = 0; c < a.candidate_rows.size(); ++c) {
            const Index row = a.candidate_rows[c];
            double& t = r.cls_target(row, gts[g].class_id);
            t = std::max(t, a.ious[c]);
        }
    }
    for (std::size_t row = 0; row < r.positive_gt.size(); ++row)
        if (r.positive_gt[row] >= 0)
            r.cls_target(static_cast<Index>(row), gts[static_cast<std::size_t>(r.positive_gt[row])].class_id) = 1.0;
    return r;
}

double monte_carlo_iou(const BoxLabel& a, const BoxLabel& b, std::size_t samples, std::mt19937_64& rng) {
    // Samples uniformly inside the smaller rectangle and counts hits in the other one.
    const bool a_small = a.l * a.w <= b.l * b.w;
    const BoxLabel& s = a_small ? a : b;
    const BoxLabel& o = a_small ? b : a;
    std::uniform_real_distribution<double> unit(-0.5, 0.5);
    const double cs = std::cos(s.yaw), ss = std::sin(s.yaw), co = std::cos(o.yaw), so = std::sin(o.yaw);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double u = unit(rng) * s.l, v = unit(rng) * s.w;
        const double x = s.cx + cs * u - ss * v, y = s.cy + ss * u + cs * v;
        const double dx = x - o.cx, dy = y - o.cy;
        const double ou = co * dx + so * dy, ov = -so * dx + co * dy;
        hits += std::abs(ou) <= 0.5 * o.l && std::abs(ov) <= 0.5 * o.w;
    }
    const double area_s = s.l * s.w, area_o = o.l * o.w;
    const double inter = area_s * static_cast<double>(hits) / static_cast<double>(samples);
    return inter / (area_s + area_o - inter);
}

std::vector<BoxPrediction> brute_force_nms(std::vector<BoxPrediction> preds, double iou_thresh, double score_thresh) {
    std::vector<BoxPrediction> pool;
    for (auto& p : preds)
        if (p.score >= score_thresh) pool.push_back(p);
    std::vector<BoxPrediction> kept;
    while (!pool.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < pool.size(); ++i) {
            const auto& a = pool[i].box;
            const auto& b = pool[best].box;
            if (pool[i].score > pool[best].score ||
                (pool[i].score == pool[best].score && (a.cx < b.cx || (a.cx == b.cx && a.cy < b.cy))))
                best = i;
        }
        const BoxPrediction chosen = pool[best];
        kept.push_back(chosen);
        std::vector<BoxPrediction> rest;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (i == best) continue;
            if (pool[i].box.class_id == chosen.box.class_id && rotated_iou_bev(chosen.box, pool[i].box) > iou_thresh)
                continue;
            rest.push_back(pool[i]);
        }
        pool = std::move(rest);
    }
    return kept;
}

namespace {

std::vector<bool> relu_signs(const ad::Tape& tape) {
    std::vector<bool> signs;
    for (std::size_t id = 0; id < tape.size(); ++id) {
        if (std::string(tape.kind(static_cast<int>(id))) != "relu") continue;
        const MatrixXd& pre = tape.value(tape.inputs(static_cast<int>(id)).front());
        for (Index i = 0; i < pre.size(); ++i) signs.push_back(pre.data()[i] > 0.0);
    }
    return signs;
}

}  // namespace

GradCheckReport finite_difference_check(Model& model, const SceneInput& scene, const AssignConfig& assign,
                                        double step, double floor) {
    ad::Tape base_tape;
    const SceneLoss base = scene_loss(base_tape, model, scene, assign, nullptr, true);
    const std::vector<bool> base_signs = relu_signs(base_tape);
    auto perturbed = [&](double& value, double at, bool& crossed) {
        value = at;
        ad::Tape tape;
        const double loss = scene_loss(tape, model, scene, assign, &base.assignment, false).losses.total;
        crossed = crossed || relu_signs(tape) != base_signs;
        return loss;
    };
    GradCheckReport report;
    ParameterSet& params = model.params();
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (Index e = 0; e < params[p].size(); ++e) {
            double& value = params[p].data()[e];
            const double saved = value;
            bool crossed = false;
            const double up = perturbed(value, saved + step, crossed);
            const double down = perturbed(value, saved - step, crossed);
            value = saved;
            if (crossed) {
                ++report.kink_crossings;
                continue;
            }
            const double numeric = (up - down) / (2.0 * step);
            const double analytic = base.grads[p].data()[e];
            const double err = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), floor});
            ++report.entries;
            if (err > report.max_rel_error) {
                report.max_rel_error = err;
                report.worst_param = params.name(p);
                report.worst_entry = e;
                report.worst_analytic = analytic;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

double min_relu_margin(const Model& model, const SceneInput& scene) {
    ad::Tape tape;
    model.forward(tape, scene.raw, false);
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t id = 0; id < tape.size(); ++id) {
        if (std::string(tape.kind(static_cast<int>(id))) != "relu") continue;
        const MatrixXd& pre = tape.value(tape.inputs(static_cast<int>(id)).front());
        if (pre.size() > 0) margin = std::min(margin, pre.cwiseAbs().minCoeff());
    }
    return margin;
}

}  // namespace slotgrid::oracle
