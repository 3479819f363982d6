#include "slotgrid/box_coder.hpp"

namespace slotgrid {

std::vector<BoxPrediction> decode_boxes(const MatrixXd& encodings, const MatrixXd& scores,
                                        const SparseLayout& voxels) {
    if (encodings.rows() != voxels.size() || encodings.cols() != kBoxCodeSize || scores.rows() != voxels.size())
        throw DimensionMismatch("head outputs are not row-aligned with voxels");
    if (!encodings.allFinite()) throw Error("non-finite box encoding");
    std::vector<BoxPrediction> out;
    out.reserve(static_cast<std::size_t>(voxels.size()));
    for (Index i = 0; i < voxels.size(); ++i) {
        BoxPrediction p;
        p.box = decode_box<double>(encodings.row(i), voxels.center_x(i), voxels.center_y(i));
        p.scores.assign(scores.row(i).data(), scores.row(i).data() + scores.cols());
        Index best = 0;
        if (scores.cols() > 0) p.score = scores.row(i).maxCoeff(&best);
        p.box.class_id = static_cast<int>(best);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace slotgrid
