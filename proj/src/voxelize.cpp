#include "slotgrid/voxelize.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace slotgrid {

SparseTensor<double> voxelize_raw(std::span<const Point> points, const GridSpec& grid, VoxelizeStats* stats) {
    grid.validate();
    struct Accum {
        Eigen::Vector4d sum = Eigen::Vector4d::Zero();
        int count = 0;
    };
    // std::map keeps cells in canonical order and sums in input order.
    std::map<Coord, Accum> cells;
    VoxelizeStats local;
    for (const Point& p : points) {
        require(std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) && std::isfinite(p.intensity),
                "point coordinates must be finite");
        const Coord c = grid.cell_of(p.x, p.y);
        if (!grid.contains(c)) {
            ++local.dropped;
            continue;
        }
        ++local.kept;
        Accum& a = cells[c];
        a.sum += Eigen::Vector4d(p.x - grid.center_x(c.ix), p.y - grid.center_y(c.iy), p.z, p.intensity);
        ++a.count;
    }
    if (stats) *stats = local;
    if (cells.empty()) throw EmptyInput("no point falls inside the grid extent");

    std::vector<Coord> coords;
    coords.reserve(cells.size());
    MatrixXd features(static_cast<Index>(cells.size()), kRawVoxelFeatures);
    Index row = 0;
    for (const auto& [c, a] : cells) {
        coords.push_back(c);
        features.row(row++) = (a.sum / a.count).transpose();
    }
    return SparseTensor<double>(SparseLayout(grid, std::move(coords)), std::move(features));
}

SparseTensor<double> voxelize(std::span<const Point> points, const GridSpec& grid,
                              const LinearMap<double>& embed, VoxelizeStats* stats) {
    auto raw = voxelize_raw(points, grid, stats);
    return SparseTensor<double>(raw.layout(), embed.apply(raw.features()));
}

std::vector<Point> parse_points(std::istream& in) {
    std::vector<Point> points;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        Point p;
        std::string extra;
        if (!(fields >> p.x >> p.y >> p.z >> p.intensity) || (fields >> extra))
            throw Error("malformed point on line " + std::to_string(line_no));
        points.push_back(p);
    }
    return points;
}

std::vector<Point> read_points(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open points file " + path.string());
    return parse_points(in);
}

void write_points(std::ostream& out, std::span<const Point> points) {
    char buf[160];
    for (const Point& p : points) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g\n", p.x, p.y, p.z, p.intensity);
        out << buf;
    }
}

void write_points(const std::filesystem::path& path, std::span<const Point> points) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write points file " + path.string());
    write_points(out, points);
}

}  // namespace slotgrid
