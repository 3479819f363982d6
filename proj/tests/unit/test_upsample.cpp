#include "helpers.hpp"

#include "slotgrid/upsample.hpp"
#include "slotgrid_oracles/oracles.hpp"

#include <doctest.h>

using namespace slotgrid;
using namespace testing;

namespace {

ConvKernel<double> random_kernel(std::mt19937_64& rng, Index cin, Index cout, ConvMode mode) {
    auto k = ConvKernel<double>::zeros(3, cin, cout, mode);
    k.weights = random_matrix(rng, k.weights.rows(), cout);
    k.bias = random_matrix(rng, 1, cout);
    return k;
}

}  // namespace

TEST_CASE("coordinate doubling") {
    const SparseLayout coarse(grid_of(8, 8, 4), {{3, 5}});
    const SparseLayout fine = double_coords(coarse);
    CHECK(fine.coords()[0] == Coord{6, 10});
    CHECK(fine.grid().stride == 2);
    CHECK(fine.grid().width == 16);
}

TEST_CASE("SP-SU upsampling") {
    std::mt19937_64 rng(1);
    SUBCASE("single interior voxel gives a 3x3 block") {
        const SparseTensor<double> x(SparseLayout(grid_of(8, 8, 2), {{3, 3}}), MatrixXd::Ones(1, 2));
        const auto y = upsample_sp(x, random_kernel(rng, 2, 2, ConvMode::Regular));
        CHECK(y.size() == 9);
        CHECK(y.grid().stride == 1);
        for (const Coord& c : y.coords()) {
            CHECK(std::abs(c.ix - 6) <= 1);
            CHECK(std::abs(c.iy - 6) <= 1);
        }
    }
    SUBCASE("coordinate set and counts on random inputs") {
        for (int trial = 0; trial < 30; ++trial) {
            const auto x = random_tensor(rng, grid_of(8, 8, 2), 1 + trial % 30, 2);
            const auto y = upsample_sp(x, random_kernel(rng, 2, 3, ConvMode::Regular));
            CHECK(y.size() >= x.size());
            CHECK(y.size() <= 9 * x.size());
            std::set<Coord> dilated;
            for (const Coord& c : x.coords())
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const Coord f{2 * c.ix + dx, 2 * c.iy + dy};
                        if (y.grid().contains(f)) dilated.insert(f);
                    }
            CHECK(std::vector<Coord>(dilated.begin(), dilated.end()) == y.coords());
        }
    }
    SUBCASE("dense oracle on an 8x8 input") {
        const auto x = random_tensor(rng, grid_of(8, 8, 2), 20, 3);
        const auto k = random_kernel(rng, 3, 2, ConvMode::Regular);
        CHECK(oracle::compare_sparse(upsample_sp(x, k), oracle::dense_upsample_sp(x, k)) <= 1e-12);
    }
    SUBCASE("wrong kernel mode is rejected") {
        const auto x = random_tensor(rng, grid_of(4, 4, 2), 3, 1);
        CHECK_THROWS(upsample_sp(x, random_kernel(rng, 1, 1, ConvMode::Submanifold)));
    }
}

TEST_CASE("SM-SU upsampling") {
    std::mt19937_64 rng(2);
    SUBCASE("single voxel gives four repeated fine voxels") {
        MatrixXd f(1, 2);
        f << 0.5, -1.5;
        const SparseTensor<double> x(SparseLayout(grid_of(4, 4, 2), {{1, 2}}), f);
        auto [fine, source] = repeat_coords(x.layout());
        CHECK(fine.size() == 4);
        CHECK(source == std::vector<Index>{0, 0, 0, 0});
        CHECK(fine.coords() == std::vector<Coord>{{2, 4}, {3, 4}, {2, 5}, {3, 5}});
    }
    SUBCASE("center-tap identity reproduces the repeated features") {
        const auto x = random_tensor(rng, grid_of(6, 6, 2), 10, 3);
        auto k = ConvKernel<double>::zeros(3, 3, 3, ConvMode::Submanifold);
        k.weights.middleRows(4 * 3, 3) = MatrixXd::Identity(3, 3);
        const auto y = upsample_sm(x, k);
        CHECK(y.size() == 4 * x.size());
        for (Index r = 0; r < y.size(); ++r) {
            const Coord c = y.coords()[r];
            CHECK(y.features().row(r) == x.features().row(*x.find({c.ix / 2, c.iy / 2})));
        }
    }
    SUBCASE("dense oracle") {
        for (int trial = 0; trial < 10; ++trial) {
            const auto x = random_tensor(rng, grid_of(8, 8, 2), 1 + 3 * trial, 2);
            const auto k = random_kernel(rng, 2, 4, ConvMode::Submanifold);
            const auto y = upsample(x, k, UpsampleStrategy::SmSu);
            CHECK(y.size() == 4 * x.size());
            CHECK(oracle::compare_sparse(y, oracle::dense_upsample_sm(x, k)) <= 1e-12);
        }
    }
}

TEST_CASE("stride-1 input cannot be upsampled") {
    std::mt19937_64 rng(3);
    const auto x = random_tensor(rng, grid_of(4, 4, 1), 3, 1);
    CHECK_THROWS(upsample_sp(x, random_kernel(rng, 1, 1, ConvMode::Regular)));
}
