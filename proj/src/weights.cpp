#include "spl/weights.hpp"

#include <cmath>
#include <stdexcept>

namespace spl {

Perturbation::Perturbation(std::shared_ptr<const DiscreteMeasure> m, Vec v) : measure(std::move(m)), values(std::move(v)) {
    if (!measure) throw std::invalid_argument("perturbation without a measure");
    if (values.size() != measure->size()) throw std::invalid_argument("perturbation length differs from atom count");
    if (!values.allFinite()) throw std::invalid_argument("perturbation has non-finite values");
}

Perturbation Perturbation::constant(std::shared_ptr<const DiscreteMeasure> m, double c) {
    Vec v = Vec::Constant(m->size(), c);
    return Perturbation(std::move(m), v);
}

Vec Perturbation::U() const {
    Vec u(values.size());
    for (Eigen::Index k = 0; k < u.size(); ++k) u(k) = values(k) > 0 ? 1.0 : (values(k) < 0 ? -1.0 : 0.0);
    return u;
}

double luxemburg_psi(double s) {
    if (s < 1e-4) return s * s * (0.5 - s / 6.0 + s * s / 12.0);
    return (1.0 + s) * std::log1p(s) - s;
}

namespace {

double orlicz_sum(const Vec& w, const Vec& a, double lambda) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k)
        if (a(k) > 0) s += w(k) * luxemburg_psi(a(k) / lambda);
    return s;
}

}  // namespace

double lp_theta_norm(const Perturbation& p, double theta) {
    if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
    const Vec& w = p.measure->weights;
    Vec a = p.values.cwiseAbs();
    if (std::abs(theta - 1.0) > 1e-14) {
        if (theta < 1.0) return w.dot(a);
        double s = 0.0;
        for (Eigen::Index k = 0; k < a.size(); ++k) s += w(k) * std::pow(a(k), theta);
        return std::pow(s, 1.0 / theta);
    }
    if (a.maxCoeff() == 0.0) return 0.0;
    // bracket by expansion from the L1 norm, then bisect keeping sum <= 1 at hi
    double hi = std::max(w.dot(a), a.maxCoeff() * 1e-300);
    while (orlicz_sum(w, a, hi) > 1.0) hi *= 2.0;
    double lo = hi;
    while (orlicz_sum(w, a, lo) <= 1.0) lo *= 0.5;
    while (hi - lo > 1e-13 * hi) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (orlicz_sum(w, a, mid) > 1.0 ? lo : hi) = mid;
    }
    return hi;
}

SignSplit split_signs(const Perturbation& p) {
    Vec vp = p.values.cwiseMax(0.0);
    Vec vm = (-p.values).cwiseMax(0.0);
    return {Perturbation(p.measure, vp), Perturbation(p.measure, vm)};
}

Mollified mollify_weight(const Perturbation& p, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("mollification radius must be positive");
    const DiscreteMeasure& m = *p.measure;
    if (radius < min_atom_spacing(m)) return {p, true};
    const int n = m.size();
    const double cut = 3.0 * radius;
    Mat K = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double r = (m.atoms.row(i) - m.atoms.row(j)).norm();
            if (r <= cut) K(i, j) = std::exp(-0.5 * r * r / (radius * radius));
        }
    // symmetric Sinkhorn: a_i sum_j K_ij w_j a_j = 1
    const Vec& w = m.weights;
    Vec a = Vec::Ones(n);
    for (int it = 0; it < 10000; ++it) {
        Vec row = K * w.cwiseProduct(a);
        Vec next = (a.array() / row.array()).sqrt().matrix();
        double change = (next - a).cwiseAbs().maxCoeff() / next.cwiseAbs().maxCoeff();
        a = next;
        if (change < 1e-15) break;
    }
    Vec out(n);
    Vec wa = w.cwiseProduct(a);
    for (int i = 0; i < n; ++i) {
        double num = 0.0, den = 0.0;
        for (int j = 0; j < n; ++j) {
            double mij = a(i) * K(i, j) * wa(j);
            num += mij * p.values(j);
            den += mij;
        }
        // den is 1 up to the Sinkhorn tolerance; dividing keeps constants exact
        out(i) = num / den;
    }
    return {Perturbation(p.measure, out), false};
}

}  // namespace spl
