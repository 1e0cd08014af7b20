#include "core/grid.hpp"

#include "core/errors.hpp"

namespace dds {

CartesianGrid::CartesianGrid(int dim, std::span<const index_t> points_per_axis, double spacing) {
    if (dim < 1 || dim > 3) throw InvalidArgument("grid: dimension must be 1, 2 or 3");
    if (static_cast<int>(points_per_axis.size()) != dim)
        throw InvalidArgument("grid: need one point count per axis");
    if (!(spacing > 0.0)) throw InvalidArgument("grid: spacing must be positive");
    dim_ = dim;
    extents_ = {1, 1, 1};
    size_ = 1;
    for (int a = 0; a < dim; ++a) {
        if (points_per_axis[a] < 1) throw InvalidArgument("grid: point counts must be positive");
        extents_[a] = points_per_axis[a];
        size_ *= points_per_axis[a];
    }
    h_ = spacing;
}

CartesianGrid build_grid(int dim, std::span<const index_t> points_per_axis, double spacing) {
    return CartesianGrid(dim, points_per_axis, spacing);
}

} // namespace dds
