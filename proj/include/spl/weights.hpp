#pragma once

#include <memory>

#include "spl/measures.hpp"

namespace spl {

struct Perturbation {
    std::shared_ptr<const DiscreteMeasure> measure;
    Vec values;

    Perturbation() = default;
    Perturbation(std::shared_ptr<const DiscreteMeasure> m, Vec v);

    static Perturbation constant(std::shared_ptr<const DiscreteMeasure> m, double c);

    int size() const { return static_cast<int>(values.size()); }
    Vec F() const { return values.cwiseAbs().cwiseSqrt(); }
    Vec U() const;
    // w_k V_k
    Vec weighted() const { return measure->weights.cwiseProduct(values); }
    double integral() const { return weighted().sum(); }
    Perturbation scaled(double c) const { return Perturbation(measure, c * values); }
};

// Orlicz function of the critical case
double luxemburg_psi(double s);

// theta > 1: L_theta; theta < 1: L_1; theta == 1: Luxemburg norm with psi above
double lp_theta_norm(const Perturbation& p, double theta);

struct SignSplit {
    Perturbation plus;
    Perturbation minus;
};
SignSplit split_signs(const Perturbation& p);

struct Mollified {
    Perturbation p;
    bool below_floor = false;
};

// Gaussian kernel on atoms within 3 radius, balanced so that constants are fixed
// and the mu-integral is preserved
Mollified mollify_weight(const Perturbation& p, double radius);

}  // namespace spl
