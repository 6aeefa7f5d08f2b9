#include "spl/measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace spl {

void Similitude::validate() const {
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("similitude ratio must lie in (0,1)");
    if (rotation.rows() != dim() || rotation.cols() != dim())
        throw std::invalid_argument("similitude rotation has wrong shape");
    Mat gram = rotation.transpose() * rotation;
    if ((gram - Mat::Identity(dim(), dim())).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("similitude rotation is not orthogonal");
}

Similitude Similitude::line(double ratio, double shift) {
    Similitude s;
    s.ratio = ratio;
    s.rotation = Mat::Identity(1, 1);
    s.translation = Vec::Constant(1, shift);
    return s;
}

void DiscreteMeasure::validate() const {
    if (size() < 1) throw std::invalid_argument("measure has no atoms");
    if (weights.size() != size()) throw std::invalid_argument("measure weight count differs from atom count");
    if ((weights.array() < 0.0).any()) throw std::invalid_argument("measure has a negative weight");
    if (!(mass() > 0.0)) throw std::invalid_argument("measure has zero total mass");
    if (bbox.dim() != ambient_dim()) throw std::invalid_argument("measure bbox dimension mismatch");
    for (int k = 0; k < size(); ++k)
        if (!bbox.contains(atom(k))) throw std::invalid_argument("measure atom outside its bounding box");
}

double solve_moran_dimension(const std::vector<double>& ratios) {
    if (ratios.empty()) throw std::invalid_argument("moran: empty ratio list");
    for (double r : ratios)
        if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("moran: ratio outside (0,1)");
    if (ratios.size() == 1) throw std::invalid_argument("moran: a single map has no positive solution");
    auto f = [&](double d) {
        double s = 0.0;
        for (double r : ratios) s += std::pow(r, d);
        return s - 1.0;
    };
    double lo = 0.0, hi = 1.0;
    while (f(hi) > 0.0) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (f(mid) > 0.0 ? lo : hi) = mid;
    }
    double d = 0.5 * (lo + hi);
    // one Newton step cleans up the last ulp or two
    double g = 0.0;
    for (double r : ratios) g += std::pow(r, d) * std::log(r);
    double dn = d - f(d) / g;
    if (std::abs(f(dn)) < std::abs(f(d))) d = dn;
    return d;
}

std::vector<Similitude> cantor_maps() {
    return {Similitude::line(1.0 / 3.0, 0.0), Similitude::line(1.0 / 3.0, 2.0 / 3.0)};
}

namespace {

Box hull_of(const Mat& atoms) {
    Box b;
    for (int a = 0; a < atoms.cols(); ++a) {
        b.lo.push_back(atoms.col(a).minCoeff());
        b.hi.push_back(atoms.col(a).maxCoeff());
    }
    return b;
}

}  // namespace

DiscreteMeasure ifs_measure(const std::vector<Similitude>& maps, int depth, const Vec* seed, long atom_cap) {
    if (maps.empty()) throw std::invalid_argument("ifs: no maps");
    if (depth < 0) throw std::invalid_argument("ifs: negative depth");
    const int n = maps[0].dim();
    std::vector<double> ratios;
    for (const auto& s : maps) {
        s.validate();
        if (s.dim() != n) throw std::invalid_argument("ifs: maps of different dimension");
        ratios.push_back(s.ratio);
    }
    double count = std::pow(static_cast<double>(maps.size()), depth);
    if (count > static_cast<double>(atom_cap)) throw std::invalid_argument("ifs: atom count cap exceeded");
    const double d = solve_moran_dimension(ratios);

    Vec x0 = Vec::Zero(n);
    if (seed) {
        x0 = *seed;
    } else {
        // fixed point of x -> rho R x + b solves (I - rho R) x = b
        for (const auto& s : maps)
            x0 += (Mat::Identity(n, n) - s.ratio * s.rotation).fullPivLu().solve(s.translation);
        x0 /= static_cast<double>(maps.size());
    }

    std::vector<Vec> pts{x0};
    std::vector<double> w{1.0};
    for (int level = 0; level < depth; ++level) {
        std::vector<Vec> next;
        std::vector<double> nw;
        next.reserve(pts.size() * maps.size());
        // word j1..jk acts as S_j1 o ... o S_jk on the seed; prepend the outer map
        for (size_t j = 0; j < maps.size(); ++j) {
            double f = std::pow(maps[j].ratio, d);
            for (size_t k = 0; k < pts.size(); ++k) {
                next.push_back(maps[j].apply(pts[k]));
                nw.push_back(w[k] * f);
            }
        }
        pts.swap(next);
        w.swap(nw);
    }

    DiscreteMeasure m;
    m.atoms.resize(static_cast<Eigen::Index>(pts.size()), n);
    m.weights.resize(static_cast<Eigen::Index>(pts.size()));
    for (size_t k = 0; k < pts.size(); ++k) {
        m.atoms.row(static_cast<Eigen::Index>(k)) = pts[k].transpose();
        m.weights(static_cast<Eigen::Index>(k)) = w[k];
    }
    m.nominal_dim = d;
    m.label = "ifs(" + std::to_string(maps.size()) + " maps, depth " + std::to_string(depth) + ")";
    m.bbox = hull_of(m.atoms);
    return m;
}

DiscreteMeasure segment_measure(const Vec& a, const Vec& b, int count) {
    if (a.size() != b.size() || a.size() < 1) throw std::invalid_argument("segment: endpoint dimension mismatch");
    if (count < 2) throw std::invalid_argument("segment: need at least 2 atoms");
    const double len = (b - a).norm();
    if (!(len > 0.0)) throw std::invalid_argument("segment: coincident endpoints");
    DiscreteMeasure m;
    m.atoms.resize(count, a.size());
    m.weights = Vec::Constant(count, len / count);
    for (int k = 0; k < count; ++k) {
        double s = (k + 0.5) / count;
        m.atoms.row(k) = ((1.0 - s) * a + s * b).transpose();
    }
    m.nominal_dim = 1.0;
    m.label = "segment";
    for (int c = 0; c < a.size(); ++c) {
        m.bbox.lo.push_back(std::min(a(c), b(c)));
        m.bbox.hi.push_back(std::max(a(c), b(c)));
    }
    return m;
}

DiscreteMeasure boundary_measure(const Grid& grid) {
    DiscreteMeasure m;
    m.bbox = grid.bbox;
    if (grid.dim == 1) {
        m.atoms.resize(2, 1);
        m.atoms << grid.bbox.lo[0], grid.bbox.hi[0];
        m.weights = Vec::Ones(2);
        m.nominal_dim = 0.0;
        m.label = "boundary";
        return m;
    }
    // one atom per boundary face, at the face midpoint on the boundary, weight = face length
    const int nx = grid.shape[0], ny = grid.shape[1];
    const double hx = grid.spacing[0], hy = grid.spacing[1];
    const int count = 2 * (nx + ny);
    m.atoms.resize(count, 2);
    m.weights.resize(count);
    int k = 0;
    for (int i = 0; i < nx; ++i) {
        m.atoms.row(k) << grid.coord(0, i), grid.bbox.lo[1];
        m.weights(k++) = hx;
        m.atoms.row(k) << grid.coord(0, i), grid.bbox.hi[1];
        m.weights(k++) = hx;
    }
    for (int j = 0; j < ny; ++j) {
        m.atoms.row(k) << grid.bbox.lo[0], grid.coord(1, j);
        m.weights(k++) = hy;
        m.atoms.row(k) << grid.bbox.hi[0], grid.coord(1, j);
        m.weights(k++) = hy;
    }
    m.nominal_dim = 1.0;
    m.label = "boundary";
    return m;
}

DiscreteMeasure lebesgue_measure(const Grid& grid) {
    DiscreteMeasure m;
    const int n = grid.nodes();
    m.atoms.resize(n, grid.dim);
    for (int k = 0; k < n; ++k) m.atoms.row(k) = grid.node_position(k).transpose();
    m.weights = Vec::Constant(n, grid.cell_volume());
    m.nominal_dim = grid.dim;
    m.label = "lebesgue";
    m.bbox = grid.bbox;
    return m;
}

DiscreteMeasure union_measure(const DiscreteMeasure& m1, const DiscreteMeasure& m2) {
    if (m1.ambient_dim() != m2.ambient_dim()) throw std::invalid_argument("union: ambient dimension mismatch");
    DiscreteMeasure m;
    m.atoms.resize(m1.size() + m2.size(), m1.ambient_dim());
    m.atoms << m1.atoms, m2.atoms;
    m.weights.resize(m1.size() + m2.size());
    m.weights << m1.weights, m2.weights;
    m.nominal_dim = std::max(m1.nominal_dim, m2.nominal_dim);
    char buf[64];
    std::snprintf(buf, sizeof buf, "[d=%.6g,%.6g]", m1.nominal_dim, m2.nominal_dim);
    m.label = "union(" + m1.label + "," + m2.label + ")" + buf;
    for (int a = 0; a < m1.ambient_dim(); ++a) {
        m.bbox.lo.push_back(std::min(m1.bbox.lo[a], m2.bbox.lo[a]));
        m.bbox.hi.push_back(std::max(m1.bbox.hi[a], m2.bbox.hi[a]));
    }
    return m;
}

DiscreteMeasure scale_mass(const DiscreteMeasure& m, double c) {
    DiscreteMeasure out = m;
    out.weights *= c;
    return out;
}

double min_atom_spacing(const DiscreteMeasure& m) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m.size(); ++i)
        for (int j = i + 1; j < m.size(); ++j) {
            double dist = (m.atoms.row(i) - m.atoms.row(j)).norm();
            if (dist > 0.0) best = std::min(best, dist);
        }
    return best;
}

double measure_diameter(const DiscreteMeasure& m) {
    double best = 0.0;
    for (int i = 0; i < m.size(); ++i)
        for (int j = i + 1; j < m.size(); ++j) best = std::max(best, (m.atoms.row(i) - m.atoms.row(j)).norm());
    return best;
}

double ball_mass(const DiscreteMeasure& m, const Vec& x, double r) {
    double s = 0.0;
    for (int k = 0; k < m.size(); ++k)
        if ((m.atoms.row(k).transpose() - x).norm() <= r) s += m.weights(k);
    return s;
}

std::vector<double> default_radii(const DiscreteMeasure& m) {
    const double hmin = min_atom_spacing(m);
    std::vector<double> radii;
    for (double r = measure_diameter(m); r >= 4.0 * hmin; r *= 0.5) radii.push_back(r);
    return radii;
}

AhlforsReport estimate_ahlfors_constants(const DiscreteMeasure& m, double d, const std::vector<double>& radii) {
    if (radii.empty()) throw std::invalid_argument("ahlfors: empty radius list");
    const double hmin = min_atom_spacing(m);
    for (double r : radii)
        if (r < hmin) throw std::invalid_argument("ahlfors: radius below the atom resolution floor");
    AhlforsReport rep;
    rep.radii = radii;
    rep.lower_const = std::numeric_limits<double>::infinity();
    rep.upper_const = 0.0;
    for (int k = 0; k < m.size(); ++k) {
        Vec x = m.atom(k);
        for (double r : radii) {
            double q = ball_mass(m, x, r) / std::pow(r, d);
            rep.upper_const = std::max(rep.upper_const, q);
            if (q < rep.lower_const) {
                rep.lower_const = q;
                rep.worst_center = x;
            }
        }
    }
    return rep;
}

}  // namespace spl
