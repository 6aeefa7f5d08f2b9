#pragma once

#include <string>
#include <vector>

#include "spl/grid.hpp"

namespace spl {

struct Similitude {
    double ratio = 0.5;
    Mat rotation;
    Vec translation;

    Vec apply(const Vec& x) const { return ratio * (rotation * x) + translation; }
    int dim() const { return static_cast<int>(translation.size()); }
    void validate() const;

    // x -> ratio * x + shift on the line
    static Similitude line(double ratio, double shift);
};

struct DiscreteMeasure {
    Mat atoms;  // one row per atom
    Vec weights;
    double nominal_dim = 0.0;
    std::string label;
    Box bbox;

    int size() const { return static_cast<int>(atoms.rows()); }
    int ambient_dim() const { return static_cast<int>(atoms.cols()); }
    double mass() const { return weights.sum(); }
    Vec atom(int k) const { return atoms.row(k).transpose(); }
    // throws std::invalid_argument on a broken invariant
    void validate() const;
};

struct AhlforsReport {
    std::vector<double> radii;
    double lower_const = 0.0;
    double upper_const = 0.0;
    Vec worst_center;
};

double solve_moran_dimension(const std::vector<double>& ratios);

// seed defaults to the mean of the maps' fixed points
DiscreteMeasure ifs_measure(const std::vector<Similitude>& maps, int depth, const Vec* seed = nullptr,
                            long atom_cap = 1L << 16);

// middle-thirds Cantor maps x/3, x/3 + 2/3
std::vector<Similitude> cantor_maps();

DiscreteMeasure segment_measure(const Vec& a, const Vec& b, int count);
DiscreteMeasure boundary_measure(const Grid& grid);
DiscreteMeasure lebesgue_measure(const Grid& grid);
DiscreteMeasure union_measure(const DiscreteMeasure& m1, const DiscreteMeasure& m2);

DiscreteMeasure scale_mass(const DiscreteMeasure& m, double c);

double min_atom_spacing(const DiscreteMeasure& m);
double measure_diameter(const DiscreteMeasure& m);
// mass of the closed ball B(x, r)
double ball_mass(const DiscreteMeasure& m, const Vec& x, double r);

// geometric radii, factor 1/2, from the diameter down to 4 * min spacing
std::vector<double> default_radii(const DiscreteMeasure& m);

// ratios mu(B(X,r)) / r^d over all atom centres X and the given radii
AhlforsReport estimate_ahlfors_constants(const DiscreteMeasure& m, double d, const std::vector<double>& radii);

}  // namespace spl
