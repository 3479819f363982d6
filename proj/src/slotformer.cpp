#include "slotgrid/slotformer.hpp"

#include <algorithm>

namespace slotgrid {

SlotPartition slot_partition(const SparseLayout& layout, SlotAxis axis, int width) {
    require(width >= 1, "slot width must be >= 1");
    SlotPartition p;
    p.axis = axis;
    p.width = width;
    const std::int32_t span = axis == SlotAxis::X ? layout.grid().height : layout.grid().width;
    p.slot_count = (span + width - 1) / width;
    p.slot_index.reserve(static_cast<std::size_t>(layout.size()));
    for (const Coord& c : layout.coords()) p.slot_index.push_back((axis == SlotAxis::X ? c.iy : c.ix) / width);
    return p;
}

Grouping window_partition(const SparseLayout& layout, int window) {
    require(window >= 1, "window must be >= 1");
    const Index nx = (layout.grid().width + window - 1) / window;
    const Index ny = (layout.grid().height + window - 1) / window;
    Grouping g;
    g.group_count = nx * ny;
    g.group_of.reserve(static_cast<std::size_t>(layout.size()));
    for (const Coord& c : layout.coords()) g.group_of.push_back(static_cast<Index>(c.iy / window) * nx + c.ix / window);
    return g;
}

Grouping window_set_partition(const SparseLayout& layout, int window, int set_size) {
    require(set_size >= 1, "set size must be >= 1");
    const Grouping windows = window_partition(layout, window);
    Grouping g;
    g.group_of.assign(windows.group_of.size(), 0);
    // Rows inside a window are already in canonical order.
    for (const auto& rows : windows.members()) {
        for (std::size_t j = 0; j < rows.size(); ++j) {
            if (j % static_cast<std::size_t>(set_size) == 0) ++g.group_count;
            g.group_of[rows[j]] = g.group_count - 1;
        }
    }
    return g;
}

Grouping layer_grouping(const SparseLayout& layout, SlotAxis axis, const SlotFormerConfig& cfg) {
    switch (cfg.partition) {
        case PartitionKind::Slot: return slot_partition(layout, axis, cfg.width).grouping();
        case PartitionKind::Window: return window_partition(layout, cfg.window);
        case PartitionKind::WindowSet: return window_set_partition(layout, cfg.window, cfg.set_size);
    }
    throw Error("unknown partition kind");
}

}  // namespace slotgrid
