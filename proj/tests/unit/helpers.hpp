#pragma once

#include "slotgrid/sparse_tensor.hpp"

#include <random>
#include <set>

namespace testing {

using namespace slotgrid;

inline MatrixXd random_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    MatrixXd m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
}

inline std::vector<Coord> random_coords(std::mt19937_64& rng, int width, int height, int count) {
    std::set<Coord> cells;
    std::uniform_int_distribution<int> ux(0, width - 1), uy(0, height - 1);
    while (static_cast<int>(cells.size()) < count) cells.insert({ux(rng), uy(rng)});
    return {cells.begin(), cells.end()};
}

inline SparseTensor<double> random_tensor(std::mt19937_64& rng, const GridSpec& grid, int count, Index channels) {
    auto coords = random_coords(rng, grid.width, grid.height, count);
    const Index n = static_cast<Index>(coords.size());
    return SparseTensor<double>(SparseLayout(grid, std::move(coords)), random_matrix(rng, n, channels));
}

inline GridSpec grid_of(int width, int height, int stride = 1) { return {0.0, 0.0, 0.16, 0.16, width, height, stride}; }

}  // namespace testing
