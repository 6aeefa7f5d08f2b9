#pragma once

#include <vector>

#include "spl/linalg.hpp"

namespace spl {

struct Box {
    std::vector<double> lo;
    std::vector<double> hi;
    bool contains(const Vec& x, double tol = 1e-12) const;
    int dim() const { return static_cast<int>(lo.size()); }
};

// Cell-centred grid on an axis-aligned box: node i of an axis sits at lo + (i + 1/2) h.
// Nodes are numbered x-major: index = i * ny + j.
struct Grid {
    int dim = 1;
    std::vector<int> shape;
    std::vector<double> spacing;
    Box bbox;

    static constexpr int default_node_cap = 5000;

    static Grid make(const Box& box, const std::vector<int>& shape, int node_cap = default_node_cap);
    static Grid interval(double length, int n, int node_cap = default_node_cap);
    static Grid rectangle(double lx, double ly, int nx, int ny, int node_cap = default_node_cap);

    int nodes() const;
    double cell_volume() const;  // h^N
    double coord(int axis, int i) const { return bbox.lo[axis] + (i + 0.5) * spacing[axis]; }
    int index(int i, int j) const { return dim == 1 ? i : i * shape[1] + j; }
    Vec node_position(int k) const;
};

}  // namespace spl
