#pragma once

#include <array>
#include <span>

#include "core/csr.hpp"

namespace dds {

// Structured grid of interior unknowns on a line, rectangle or box,
// numbered lexicographically with the x index fastest.
class CartesianGrid {
public:
    CartesianGrid(int dim, std::span<const index_t> points_per_axis, double spacing);

    int dim() const { return dim_; }
    index_t extent(int axis) const { return extents_[axis]; }
    double spacing() const { return h_; }
    index_t size() const { return size_; } // total unknown count

    index_t index(std::array<index_t, 3> coord) const {
        return coord[0] + extents_[0] * (coord[1] + extents_[1] * coord[2]);
    }
    std::array<index_t, 3> coord(index_t idx) const {
        std::array<index_t, 3> c{0, 0, 0};
        c[0] = idx % extents_[0];
        idx /= extents_[0];
        c[1] = idx % extents_[1];
        c[2] = idx / extents_[1];
        return c;
    }

    // Physical coordinate of an unknown along one axis; unknown i sits at (i+1)*h.
    double position(index_t axis_index) const { return (axis_index + 1) * h_; }

private:
    int dim_;
    std::array<index_t, 3> extents_; // unused axes hold 1
    double h_;
    index_t size_;
};

CartesianGrid build_grid(int dim, std::span<const index_t> points_per_axis, double spacing);

} // namespace dds
