#pragma once

#include "slotgrid/conv.hpp"
#include "slotgrid/geometry.hpp"
#include "slotgrid/slotformer.hpp"
#include "slotgrid/types.hpp"

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace slotgrid::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const MatrixXd& value() const;
    Index rows() const { return value().rows(); }
    Index cols() const { return value().cols(); }
};

/// Append-only record of matrix operations. Every node's inputs precede it, so the
/// backward sweep is a single reverse pass.
class Tape {
public:
    using Backward = std::function<void(Tape&, const MatrixXd& grad_out)>;

    Var constant(MatrixXd value);
    Var variable(MatrixXd value);
    Var record(MatrixXd value, std::vector<int> inputs, Backward backward, const char* kind);

    const MatrixXd& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const MatrixXd& value(Var v) const { return value(v.id); }
    bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
    bool requires_grad(Var v) const { return requires_grad(v.id); }
    const char* kind(int id) const { return nodes_[static_cast<std::size_t>(id)].kind; }
    const std::vector<int>& inputs(int id) const { return nodes_[static_cast<std::size_t>(id)].inputs; }
    std::size_t size() const { return nodes_.size(); }

    // Gradient of the last backward() w.r.t. v; zeros when v did not influence the loss.
    MatrixXd grad(Var v) const;

    // Adds g into the gradient slot of node `id` (no-op for constants).
    void accumulate(int id, const MatrixXd& g);
    MatrixXd& grad_slot(int id);

    // Reverse sweep from a 1x1 loss node. Each node is visited once.
    void backward(Var loss);

private:
    struct Node {
        MatrixXd value;
        MatrixXd grad;
        bool requires_grad = false;
        bool has_grad = false;
        std::vector<int> inputs;
        Backward backward;
        const char* kind = "";
    };
    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var add_row(Var a, Var row);  // broadcast a 1 x C row over every row of a
Var scale(Var a, double s);
Var relu(Var a);
Var sigmoid(Var a);
Var sum(Var a);
Var layer_norm(Var x, Var gamma, Var beta, double eps);
Var gather_rows(Var x, std::vector<Index> rows);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator*(double s, Var a) { return scale(a, s); }

// Sparse convolution driven by a rulebook; weights stack the k*k taps vertically.
Var sparse_conv(Var x, std::shared_ptr<const Rulebook> book, Var weights, Var bias);

// Per-group linear attention (see slotgrid::kernelized_attention).
Var kernelized_attention(Var q, Var k, Var v, std::shared_ptr<const Grouping> groups, double eps);

// Quality focal loss over scores in (0, 1) against fixed targets, divided by max(1, #targets == 1).
Var focal_loss(Var scores, MatrixXd targets, double gamma);

/// One regression target: encoding row `row` decoded at (center_x, center_y) against `gt`.
struct BoxTarget {
    Index row = 0;
    double center_x = 0.0;
    double center_y = 0.0;
    BoxLabel gt;
};

// Sum over targets of rw_iou_loss(decode(encodings[row]), gt).
Var box_regression_loss(Var encodings, std::vector<BoxTarget> targets);

}  // namespace slotgrid::ad
