#include "slotgrid/autodiff.hpp"

#include "slotgrid/box_coder.hpp"
#include "slotgrid/losses.hpp"
#include "slotgrid/parallel.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <cmath>

namespace slotgrid::ad {

const MatrixXd& Var::value() const { return tape->value(id); }

Var Tape::constant(MatrixXd value) {
    nodes_.push_back({std::move(value), {}, false, false, {}, {}, "constant"});
    return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::variable(MatrixXd value) {
    nodes_.push_back({std::move(value), {}, true, false, {}, {}, "variable"});
    return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(MatrixXd value, std::vector<int> inputs, Backward backward, const char* kind) {
    bool needs = false;
    for (int in : inputs) {
        require(in >= 0 && in < static_cast<int>(nodes_.size()), "tape input does not precede its node");
        needs = needs || requires_grad(in);
    }
    nodes_.push_back({std::move(value), {}, needs, false, std::move(inputs), needs ? std::move(backward) : Backward{},
                      kind});
    return {this, static_cast<int>(nodes_.size()) - 1};
}

MatrixXd Tape::grad(Var v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (!n.has_grad) return MatrixXd::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

MatrixXd& Tape::grad_slot(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad) {
        n.grad = MatrixXd::Zero(n.value.rows(), n.value.cols());
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::accumulate(int id, const MatrixXd& g) {
    if (!requires_grad(id)) return;
    grad_slot(id) += g;
}

void Tape::backward(Var loss) {
    require(loss.tape == this, "loss belongs to another tape");
    const Node& root = nodes_[static_cast<std::size_t>(loss.id)];
    if (root.value.rows() != 1 || root.value.cols() != 1) throw DimensionMismatch("backward needs a scalar loss");
    require(!backward_done_, "backward already ran on this tape");
    backward_done_ = true;
    if (!root.requires_grad) return;
    grad_slot(loss.id)(0, 0) = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.has_grad && n.backward) n.backward(*this, n.grad);
    }
}

namespace {

Tape& tape_of(Var a, Var b) {
    require(a.tape != nullptr && a.tape == b.tape, "variables live on different tapes");
    return *a.tape;
}

}  // namespace

Var matmul(Var a, Var b) {
    Tape& t = tape_of(a, b);
    if (a.cols() != b.rows()) throw DimensionMismatch("matmul inner dimensions differ");
    MatrixXd out = a.value() * b.value();
    return t.record(std::move(out), {a.id, b.id},
                    [a, b](Tape& tp, const MatrixXd& g) {
                        if (tp.requires_grad(a.id)) tp.grad_slot(a.id).noalias() += g * tp.value(b.id).transpose();
                        if (tp.requires_grad(b.id)) tp.grad_slot(b.id).noalias() += tp.value(a.id).transpose() * g;
                    },
                    "matmul");
}

Var add(Var a, Var b) {
    Tape& t = tape_of(a, b);
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("add shapes differ");
    return t.record(a.value() + b.value(), {a.id, b.id},
                    [a, b](Tape& tp, const MatrixXd& g) {
                        tp.accumulate(a.id, g);
                        tp.accumulate(b.id, g);
                    },
                    "add");
}

Var add_row(Var a, Var row) {
    Tape& t = tape_of(a, row);
    if (row.rows() != 1 || row.cols() != a.cols()) throw DimensionMismatch("row broadcast width differs");
    MatrixXd out = a.value();
    out.rowwise() += row.value().row(0);
    return t.record(std::move(out), {a.id, row.id},
                    [a, row](Tape& tp, const MatrixXd& g) {
                        tp.accumulate(a.id, g);
                        if (tp.requires_grad(row.id)) tp.grad_slot(row.id) += g.colwise().sum();
                    },
                    "add_row");
}

Var scale(Var a, double s) {
    return a.tape->record(a.value() * s, {a.id},
                          [a, s](Tape& tp, const MatrixXd& g) { tp.accumulate(a.id, g * s); }, "scale");
}

Var relu(Var a) {
    return a.tape->record(a.value().cwiseMax(0.0), {a.id},
                          [a](Tape& tp, const MatrixXd& g) {
                              const MatrixXd& x = tp.value(a.id);
                              tp.accumulate(a.id, (x.array() > 0.0).select(g, 0.0));
                          },
                          "relu");
}

Var sigmoid(Var a) {
    MatrixXd s = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    const int out_id = static_cast<int>(a.tape->size());
    return a.tape->record(std::move(s), {a.id},
                          [a, out_id](Tape& tp, const MatrixXd& g) {
                              const MatrixXd& y = tp.value(out_id);
                              tp.accumulate(a.id, g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
                          },
                          "sigmoid");
}

Var sum(Var a) {
    MatrixXd out(1, 1);
    out(0, 0) = a.value().sum();
    return a.tape->record(std::move(out), {a.id},
                          [a](Tape& tp, const MatrixXd& g) {
                              const MatrixXd& x = tp.value(a.id);
                              tp.accumulate(a.id, MatrixXd::Constant(x.rows(), x.cols(), g(0, 0)));
                          },
                          "sum");
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
    Tape& t = tape_of(x, gamma);
    tape_of(x, beta);
    const MatrixXd& in = x.value();
    const Index n = in.rows(), c = in.cols();
    if (gamma.cols() != c || beta.cols() != c) throw DimensionMismatch("layer norm parameter width differs");
    auto xhat = std::make_shared<MatrixXd>(n, c);
    auto inv_std = std::make_shared<Eigen::VectorXd>(n);
    for (Index i = 0; i < n; ++i) {
        const double mean = in.row(i).sum() / static_cast<double>(c);
        const RowVectorXd centered = in.row(i).array() - mean;
        const double var = centered.squaredNorm() / static_cast<double>(c);
        (*inv_std)(i) = 1.0 / std::sqrt(var + eps);
        xhat->row(i) = centered * (*inv_std)(i);
    }
    MatrixXd out = xhat->array().rowwise() * gamma.value().row(0).array();
    out.rowwise() += beta.value().row(0);
    return t.record(std::move(out), {x.id, gamma.id, beta.id},
                    [x, gamma, beta, xhat, inv_std](Tape& tp, const MatrixXd& g) {
                        if (tp.requires_grad(gamma.id)) tp.grad_slot(gamma.id) += g.cwiseProduct(*xhat).colwise().sum();
                        if (tp.requires_grad(beta.id)) tp.grad_slot(beta.id) += g.colwise().sum();
                        if (!tp.requires_grad(x.id)) return;
                        const RowVectorXd gam = tp.value(gamma.id).row(0);
                        const double c = static_cast<double>(g.cols());
                        MatrixXd& dx = tp.grad_slot(x.id);
                        for (Index i = 0; i < g.rows(); ++i) {
                            const RowVectorXd dxhat = g.row(i).cwiseProduct(gam);
                            const double mean_d = dxhat.sum() / c;
                            const double mean_dx = dxhat.dot(xhat->row(i)) / c;
                            dx.row(i) += (*inv_std)(i) * (dxhat.array() - mean_d - xhat->row(i).array() * mean_dx).matrix();
                        }
                    },
                    "layer_norm");
}

Var gather_rows(Var x, std::vector<Index> rows) {
    for (Index r : rows) require(r >= 0 && r < x.rows(), "gather row out of range");
    MatrixXd out = x.value()(rows, Eigen::all);
    return x.tape->record(std::move(out), {x.id},
                          [x, rows = std::move(rows)](Tape& tp, const MatrixXd& g) {
                              if (!tp.requires_grad(x.id)) return;
                              MatrixXd& dx = tp.grad_slot(x.id);
                              for (std::size_t j = 0; j < rows.size(); ++j) dx.row(rows[j]) += g.row(static_cast<Index>(j));
                          },
                          "gather_rows");
}

Var sparse_conv(Var x, std::shared_ptr<const Rulebook> book, Var weights, Var bias) {
    Tape& t = tape_of(x, weights);
    tape_of(x, bias);
    if (bias.rows() != 1 || bias.cols() != weights.cols()) throw DimensionMismatch("conv bias width differs");
    MatrixXd out = apply_rulebook<double>(*book, x.value(), weights.value(), RowVectorXd(bias.value().row(0)));
    return t.record(
        std::move(out), {x.id, weights.id, bias.id},
        [x, weights, bias, book](Tape& tp, const MatrixXd& g) {
            const int taps = book->kernel_size * book->kernel_size;
            const MatrixXd& w = tp.value(weights.id);
            const Index c_in = w.rows() / taps;
            if (tp.requires_grad(bias.id)) tp.grad_slot(bias.id) += g.colwise().sum();
            if (tp.requires_grad(weights.id)) {
                MatrixXd& dw = tp.grad_slot(weights.id);
                const MatrixXd& xin = tp.value(x.id);
                parallel_for(static_cast<std::size_t>(taps), [&](std::size_t k) {
                    if (book->in_rows[k].empty()) return;
                    dw.middleRows(static_cast<Index>(k) * c_in, c_in).noalias() +=
                        xin(book->in_rows[k], Eigen::all).transpose() *
                        g(book->out_rows[k], Eigen::all);
                });
            }
            if (tp.requires_grad(x.id)) {
                std::vector<MatrixXd> partial(static_cast<std::size_t>(taps));
                parallel_for(static_cast<std::size_t>(taps), [&](std::size_t k) {
                    if (book->in_rows[k].empty()) return;
                    partial[k].noalias() = g(book->out_rows[k], Eigen::all) *
                                           w.middleRows(static_cast<Index>(k) * c_in, c_in).transpose();
                });
                MatrixXd& dx = tp.grad_slot(x.id);
                for (int k = 0; k < taps; ++k)
                    if (!book->in_rows[k].empty()) dx(book->in_rows[k], Eigen::all) += partial[k];
            }
        },
        "sparse_conv");
}

Var kernelized_attention(Var q, Var k, Var v, std::shared_ptr<const Grouping> groups, double eps) {
    Tape& t = tape_of(q, k);
    tape_of(q, v);
    MatrixXd out = slotgrid::kernelized_attention<double>(q.value(), k.value(), v.value(), *groups, eps);
    return t.record(
        std::move(out), {q.id, k.id, v.id},
        [q, k, v, groups, eps](Tape& tp, const MatrixXd& g) {
            const MatrixXd& Q = tp.value(q.id);
            const MatrixXd& K = tp.value(k.id);
            const MatrixXd& V = tp.value(v.id);
            MatrixXd dq = MatrixXd::Zero(Q.rows(), Q.cols());
            MatrixXd dk = MatrixXd::Zero(K.rows(), K.cols());
            MatrixXd dv = MatrixXd::Zero(V.rows(), V.cols());
            const auto members = groups->members();
            parallel_for(members.size(), [&](std::size_t s) {
                const auto& rows = members[s];
                if (rows.empty()) return;
                MatrixXd kv = MatrixXd::Zero(K.cols(), V.cols());
                RowVectorXd ksum = RowVectorXd::Zero(K.cols());
                for (Index i : rows) {
                    kv.noalias() += K.row(i).transpose() * V.row(i);
                    ksum += K.row(i);
                }
                MatrixXd dkv = MatrixXd::Zero(K.cols(), V.cols());
                RowVectorXd dksum = RowVectorXd::Zero(K.cols());
                for (Index i : rows) {
                    const double den = Q.row(i).dot(ksum) + eps;
                    const RowVectorXd num = Q.row(i) * kv;
                    const RowVectorXd dnum = g.row(i) / den;
                    const double dden = -g.row(i).dot(num) / (den * den);
                    dq.row(i) = dnum * kv.transpose() + dden * ksum;
                    dkv.noalias() += Q.row(i).transpose() * dnum;
                    dksum += dden * Q.row(i);
                }
                for (Index i : rows) {
                    dk.row(i) = V.row(i) * dkv.transpose() + dksum;
                    dv.row(i) = K.row(i) * dkv;
                }
            });
            tp.accumulate(q.id, dq);
            tp.accumulate(k.id, dk);
            tp.accumulate(v.id, dv);
        },
        "kernelized_attention");
}

Var focal_loss(Var scores, MatrixXd targets, double gamma) {
    const MatrixXd& s = scores.value();
    if (s.rows() != targets.rows() || s.cols() != targets.cols()) throw DimensionMismatch("focal loss shapes differ");
    using Dual = Eigen::AutoDiffScalar<Eigen::Matrix<double, 1, 1>>;
    const double positives = std::max(1.0, static_cast<double>((targets.array() == 1.0).count()));
    double total = 0.0;
    auto grad = std::make_shared<MatrixXd>(s.rows(), s.cols());
    for (Index i = 0; i < s.rows(); ++i)
        for (Index j = 0; j < s.cols(); ++j) {
            const Dual d(s(i, j), 1, 0);
            const Dual term = focal_term<Dual>(d, targets(i, j), gamma);
            total += term.value();
            (*grad)(i, j) = term.derivatives()(0) / positives;
        }
    MatrixXd out(1, 1);
    out(0, 0) = total / positives;
    return scores.tape->record(std::move(out), {scores.id},
                               [scores, grad](Tape& tp, const MatrixXd& g) { tp.accumulate(scores.id, *grad * g(0, 0)); },
                               "focal_loss");
}

Var box_regression_loss(Var encodings, std::vector<BoxTarget> targets) {
    const MatrixXd& e = encodings.value();
    if (e.cols() != kBoxCodeSize) throw DimensionMismatch("box encodings need 8 columns");
    using Dual = Eigen::AutoDiffScalar<Eigen::Matrix<double, kBoxCodeSize, 1>>;
    auto grad = std::make_shared<MatrixXd>(MatrixXd::Zero(e.rows(), e.cols()));
    double total = 0.0;
    for (const BoxTarget& target : targets) {
        require(target.row >= 0 && target.row < e.rows(), "regression target row out of range");
        BoxCode<Dual> code;
        for (Index c = 0; c < kBoxCodeSize; ++c) code(c) = Dual(e(target.row, c), kBoxCodeSize, c);
        BoxT<Dual> gt;
        gt.cx = target.gt.cx;
        gt.cy = target.gt.cy;
        gt.cz = target.gt.cz;
        gt.l = target.gt.l;
        gt.w = target.gt.w;
        gt.h = target.gt.h;
        gt.yaw = target.gt.yaw;
        const Dual loss = rw_iou_loss<Dual>(decode_box<Dual>(code, target.center_x, target.center_y), gt);
        total += loss.value();
        grad->row(target.row) += loss.derivatives().transpose();
    }
    MatrixXd out(1, 1);
    out(0, 0) = total;
    return encodings.tape->record(
        std::move(out), {encodings.id},
        [encodings, grad](Tape& tp, const MatrixXd& g) { tp.accumulate(encodings.id, *grad * g(0, 0)); },
        "box_regression_loss");
}

}  // namespace slotgrid::ad
