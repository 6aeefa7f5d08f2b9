#include "spl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace spl {

bool Box::contains(const Vec& x, double tol) const {
    if (x.size() != dim()) return false;
    for (int a = 0; a < dim(); ++a) {
        // flat boxes (axis-parallel segments) still get a tolerance at the coordinate scale
        double scale = std::max({hi[a] - lo[a], std::abs(lo[a]), std::abs(hi[a])});
        if (x(a) < lo[a] - tol * scale || x(a) > hi[a] + tol * scale) return false;
    }
    return true;
}

Grid Grid::make(const Box& box, const std::vector<int>& shape, int node_cap) {
    if (box.dim() < 1 || box.dim() > 2) throw std::invalid_argument("grid: only 1D and 2D boxes");
    if (static_cast<int>(box.hi.size()) != box.dim() || static_cast<int>(shape.size()) != box.dim())
        throw std::invalid_argument("grid: box and shape disagree in dimension");
    Grid g;
    g.dim = box.dim();
    g.shape = shape;
    g.bbox = box;
    long total = 1;
    for (int a = 0; a < g.dim; ++a) {
        if (shape[a] < 3) throw std::invalid_argument("grid: need at least 3 nodes per axis");
        if (!(box.hi[a] > box.lo[a])) throw std::invalid_argument("grid: empty box");
        g.spacing.push_back((box.hi[a] - box.lo[a]) / shape[a]);
        total *= shape[a];
    }
    if (total > node_cap)
        throw std::invalid_argument("grid: " + std::to_string(total) + " nodes exceeds cap " +
                                    std::to_string(node_cap));
    return g;
}

Grid Grid::interval(double length, int n, int node_cap) {
    return make(Box{{0.0}, {length}}, {n}, node_cap);
}

Grid Grid::rectangle(double lx, double ly, int nx, int ny, int node_cap) {
    return make(Box{{0.0, 0.0}, {lx, ly}}, {nx, ny}, node_cap);
}

int Grid::nodes() const {
    int n = 1;
    for (int s : shape) n *= s;
    return n;
}

double Grid::cell_volume() const {
    double v = 1.0;
    for (double h : spacing) v *= h;
    return v;
}

Vec Grid::node_position(int k) const {
    Vec x(dim);
    if (dim == 1) {
        x(0) = coord(0, k);
    } else {
        x(0) = coord(0, k / shape[1]);
        x(1) = coord(1, k % shape[1]);
    }
    return x;
}

}  // namespace spl
