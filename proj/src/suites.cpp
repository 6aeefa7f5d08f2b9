#include "spl/suites.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "spl/resolvents.hpp"
#include "spl/rng.hpp"
#include "spl/spectra.hpp"

namespace spl {

bool SuiteResult::pass() const {
    for (const auto& l : lines)
        if (!l.pass) return false;
    return !lines.empty();
}

void SuiteResult::add(const std::string& name, bool ok, const std::string& detail) {
    lines.push_back({name, ok, detail});
}

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

// measures that exercise atoms on and off the nodes, fractal and smooth, interior and boundary
std::shared_ptr<const DiscreteMeasure> draw_measure(const Grid& g, CounterRng& rng, int kind) {
    const bool one_d = g.dim == 1;
    auto pt = [&](double lo, double hi) {
        Vec x(g.dim);
        for (int a = 0; a < g.dim; ++a) x(a) = g.bbox.lo[a] + rng.uniform(lo, hi) * (g.bbox.hi[a] - g.bbox.lo[a]);
        return x;
    };
    switch (kind % 3) {
        case 0: {
            if (one_d) return std::make_shared<DiscreteMeasure>(ifs_measure(cantor_maps(), 6));
            return std::make_shared<DiscreteMeasure>(segment_measure(pt(0.1, 0.45), pt(0.55, 0.9), 40));
        }
        case 1: {
            Vec a = pt(0.05, 0.4), b = pt(0.6, 0.95);
            return std::make_shared<DiscreteMeasure>(segment_measure(a, b, one_d ? 60 : 25));
        }
        default:
            return std::make_shared<DiscreteMeasure>(boundary_measure(g));
    }
}

Vec uniform_values(CounterRng& rng, int n, double lo, double hi) {
    Vec v(n);
    for (int k = 0; k < n; ++k) v(k) = rng.uniform(lo, hi);
    return v;
}

double min_eig_over_norm(const Mat& R) {
    Vec ev = sym_eigvals(symmetrize(R));
    double nrm = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
    return nrm == 0.0 ? 0.0 : ev(0) / nrm;
}

struct Draw {
    Perturbation V1, V2;
    bool nonnegative = false;
    bool ordered = false;
};

// halve the negative-capable weights until I + T clears the margin
BSOperator admissible(const OperatorMatrix& A, const RestrictionMatrix& G, Perturbation& p) {
    for (int k = 0; k < 60; ++k) {
        BSOperator T = bs_operator(A, G, p);
        if (margin_exceeds(T, default_margin)) return T;
        p = p.scaled(0.5);
    }
    throw std::runtime_error("identity suite: no admissible scaling found");
}

void run_draws(const Grid& g, int draws, std::uint64_t seed, std::uint64_t stream0, IdentityStats& st) {
    auto A = assemble_neumann(g, CoefficientField::identity(g, 1.0));
    for (int d = 0; d < draws; ++d) {
        CounterRng rng(seed, stream0 + static_cast<std::uint64_t>(d));
        auto m = draw_measure(g, rng, d);
        const int n = m->size();
        auto G = restriction_matrix(g, *m);
        const bool nonneg = d % 2 == 0;
        const bool ordered = d % 4 < 2;
        const double scale = rng.uniform(0.5, 20.0);
        Perturbation V1(m, uniform_values(rng, n, nonneg ? 0.0 : -0.6 * scale, scale));
        BSOperator T1 = admissible(A, G, V1);

        Perturbation V2;
        BSOperator T2;
        if (ordered) {
            Vec drop = uniform_values(rng, n, 0.0, scale);
            for (int k = 0; k < 60; ++k) {
                V2 = Perturbation(m, V1.values - drop);
                T2 = bs_operator(A, G, V2);
                if (margin_exceeds(T2, default_margin)) break;
                drop *= 0.5;
            }
        } else {
            V2 = Perturbation(m, uniform_values(rng, n, -0.6 * scale, scale));
            T2 = admissible(A, G, V2);
        }

        Mat d1 = direct_inverse(A, coupling_matrix(g, G, V1));
        Mat d2 = direct_inverse(A, coupling_matrix(g, G, V2));
        auto note = [&](const char* what, double r) {
            if (r > st.max_residual) {
                st.max_residual = r;
                st.worst = std::string(what) + fmt(" dim %g draw %g", g.dim, d);
            }
        };
        ResolventReport r1 = resolvent_difference(A, T1, &d1);
        note("resolvent", r1.residual);
        ResolventReport r12 = two_weight_difference(A, T1, T2, &d1, &d2);
        note("two-weight", r12.residual);
        for (int m_pow : {2, 3}) note(m_pow == 2 ? "power m=2" : "power m=3", power_difference(A, T1, m_pow, &d1).residual);

        if (nonneg) {
            ++st.nonnegative_draws;
            st.worst_sign_resolvent = std::min(st.worst_sign_resolvent, min_eig_over_norm(r1.difference));
        }
        if (ordered) {
            ++st.ordered_draws;
            st.worst_sign_two_weight = std::min(st.worst_sign_two_weight, min_eig_over_norm(r12.difference));
        }
        ++st.draws;
    }
}

}  // namespace

IdentityStats identity_suite(int draws1, int n1, int draws2, int n2, std::uint64_t seed) {
    auto t0 = std::chrono::steady_clock::now();
    IdentityStats st;
    if (draws1 > 0) run_draws(Grid::interval(1.0, n1), draws1, seed, 0, st);
    if (draws2 > 0) run_draws(Grid::rectangle(1.0, 1.0, n2, n2), draws2, seed, 1u << 20, st);
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return st;
}

SuiteResult verify_identities(std::uint64_t seed) {
    SuiteResult r;
    IdentityStats st = identity_suite(24, 256, 4, 25, seed);
    r.add("path consistency", st.max_residual <= 1e-8,
          fmt("max residual %.2e over %g draws", st.max_residual, st.draws) + " (" + st.worst + ")");
    r.add("V >= 0 gives R_V >= 0", st.worst_sign_resolvent >= -1e-10,
          fmt("min eig / norm %.2e over %g draws", st.worst_sign_resolvent, st.nonnegative_draws));
    r.add("V1 >= V2 gives R12 >= 0", st.worst_sign_two_weight >= -1e-10,
          fmt("min eig / norm %.2e over %g draws", st.worst_sign_two_weight, st.ordered_draws));
    return r;
}

SuiteResult verify_kyfan(std::uint64_t seed) {
    SuiteResult r;
    KyFanReport k = kyfan_suite(100, 30, seed);
    r.add("random 30x30 pairs", k.violations() == 0,
          fmt("%g violations in %g checks", static_cast<double>(k.violations()), static_cast<double>(k.checks)));
    Mat K = Mat::Zero(5, 5);
    K.diagonal() << 2, 1, 0.5, -1, -3;
    KyFanReport z = kyfan_check(K, Mat::Zero(5, 5), {0.25, 0.75, 1.5}, {0.1, 1.0});
    r.add("zero partner", z.violations() == 0, fmt("%g violations", static_cast<double>(z.violations())));
    return r;
}

SuiteResult verify_norms() {
    SuiteResult r;
    auto m = std::make_shared<DiscreteMeasure>(segment_measure(Vec::Zero(1), Vec::Ones(1), 100));
    Perturbation one = Perturbation::constant(m, 1.0);
    double lux = lp_theta_norm(one, 1.0);
    r.add("Luxemburg norm of 1", std::abs(lux - 1.0 / (std::numbers::e - 1.0)) < 1e-9, fmt("%.12f", lux));
    double l2 = lp_theta_norm(Perturbation::constant(m, 3.0), 2.0);
    r.add("L_2 norm of 3", std::abs(l2 - 3.0) < 1e-12, fmt("%.15f", l2));
    Perturbation p(m, Vec::LinSpaced(100, -1.0, 2.0));
    double lhs = lp_theta_norm(p.scaled(2.5), 1.0), rhs = 2.5 * lp_theta_norm(p, 1.0);
    r.add("Luxemburg homogeneity", std::abs(lhs - rhs) <= 1e-9 * rhs, fmt("%.12f vs %.12f", lhs, rhs));
    SignSplit s = split_signs(p);
    double err = (s.plus.values - s.minus.values - p.values).cwiseAbs().maxCoeff();
    r.add("sign split", err == 0.0 && s.minus.values.minCoeff() >= 0.0, fmt("max error %.1e", err));
    return r;
}

SuiteResult verify_measures() {
    SuiteResult r;
    double d = solve_moran_dimension({1.0 / 3, 1.0 / 3});
    r.add("Moran {1/3,1/3}", std::abs(d - std::log(2.0) / std::log(3.0)) < 1e-10, fmt("%.15f", d));
    double d2 = solve_moran_dimension({0.5, 0.25, 0.25});
    r.add("Moran {1/2,1/4,1/4}", std::abs(d2 - 1.0) < 1e-10, fmt("%.15f", d2));
    auto c = ifs_measure(cantor_maps(), 8);
    r.add("Cantor mass and size", c.size() == 256 && std::abs(c.mass() - 1.0) < 1e-14, fmt("%g atoms, mass %.15f", c.size(), c.mass()));
    auto g = Grid::rectangle(1.0, 2.0, 10, 20);
    double per = boundary_measure(g).mass();
    r.add("boundary mass = perimeter", std::abs(per - 6.0) < 1e-12, fmt("%.15f", per));
    auto seg = segment_measure(Vec::Zero(1), Vec::Ones(1), 200);
    auto rep = estimate_ahlfors_constants(seg, 1.0, {0.0525, 0.1025, 0.2025});
    r.add("segment Ahlfors constants", std::abs(rep.upper_const - 2.0) < 1e-12 && rep.lower_const >= 0.99,
          fmt("lower %.4f upper %.4f", rep.lower_const, rep.upper_const));
    return r;
}

SuiteResult verify_oracles() {
    SuiteResult r;
    double worst = 0.0;
    for (int n : {16, 64, 512}) {
        auto g = Grid::interval(1.0, n);
        Vec ev = sym_eigvals(assemble_neumann(g, CoefficientField::identity(g, 2.0)).matrix());
        Vec ex = neumann_spectrum_1d(n, 1.0, 2.0);
        std::sort(ex.data(), ex.data() + n);
        worst = std::max(worst, (ev - ex).cwiseAbs().maxCoeff() / ex.maxCoeff());
    }
    r.add("1D Neumann spectrum", worst <= 1e-10, fmt("max relative error %.2e", worst));
    Mat I = Mat::Identity(2, 2);
    Vec nu(2), tau(2);
    nu << 0, 1;
    tau << 1, 0;
    double rr = weyl_r(I, tau, nu);
    r.add("Laplacian r = 1/4", std::abs(rr - 0.25) < 1e-12, fmt("%.15f", rr));
    double om = weyl_density(I, nu, 1.0 / 3.0), exact = std::pow(4.0, -1.0 / 3.0) / std::numbers::pi;
    r.add("Laplacian omega", std::abs(om - exact) < 1e-8, fmt("%.12f vs %.12f", om, exact));
    return r;
}

SuiteResult verify_suite(const std::string& name) {
    if (name == "identities") return verify_identities();
    if (name == "kyfan") return verify_kyfan();
    if (name == "norms") return verify_norms();
    if (name == "measures") return verify_measures();
    if (name == "oracles") return verify_oracles();
    throw std::invalid_argument("unknown suite '" + name + "' (identities, kyfan, norms, measures, oracles)");
}

}  // namespace spl
