#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spl/resolvents.hpp"
#include "spl/rng.hpp"

using namespace spl;

namespace {

struct Setup {
    Grid g;
    OperatorMatrix A;
    std::shared_ptr<const DiscreteMeasure> m;
    RestrictionMatrix gam;
    Setup(Grid grid, DiscreteMeasure meas)
        : g(grid), A(assemble_neumann(g, CoefficientField::identity(g, 1.0))),
          m(std::make_shared<const DiscreteMeasure>(std::move(meas))), gam(restriction_matrix(g, *m)) {}
    Perturbation random_v(std::uint64_t seed, double lo, double hi) const {
        CounterRng rng(seed);
        Vec v(m->size());
        for (int k = 0; k < v.size(); ++k) v(k) = rng.uniform(lo, hi);
        return Perturbation(m, v);
    }
    BSOperator T(const Perturbation& p) const { return bs_operator(A, gam, p, 0.5); }
    Mat direct(const Perturbation& p) const { return direct_inverse(A, coupling_matrix(g, gam, p)); }
};

Setup segment_setup() {
    Vec a(2), b(2);
    a << 0.2, 0.45;
    b << 0.8, 0.45;
    auto g = Grid::rectangle(1.0, 1.0, 16, 16);
    return Setup(g, segment_measure(a, b, 40));
}

}  // namespace

TEST_CASE("zero perturbation") {
    Setup s = segment_setup();
    auto T0 = s.T(Perturbation::constant(s.m, 0.0));
    CHECK(rel_frobenius(perturbed_inverse(s.A, T0), s.A.inverse_power(1.0)) <= 1e-14);
    CHECK(resolvent_difference(s.A, T0).difference.norm() == 0.0);
    CHECK(power_difference(s.A, T0, 2).difference.norm() <= 1e-14 * s.A.inverse_power(2.0).norm());
}

TEST_CASE("single atom matches Sherman-Morrison") {
    auto g = Grid::rectangle(1.0, 1.0, 12, 12);
    DiscreteMeasure at;
    at.atoms = Mat(1, 2);
    at.atoms << 0.37, 0.61;
    at.weights = Vec::Constant(1, 0.05);
    at.bbox = g.bbox;
    Setup s(g, at);
    for (double v : {2.0, -0.5}) {
        auto p = Perturbation::constant(s.m, v);
        Vec u = s.gam.gamma.row(0).transpose();
        double c = v * 0.05 / g.cell_volume();
        const Mat& Ai = s.A.inverse_power(1.0);
        Vec Au = Ai * u;
        Mat sm = Ai - c * Au * Au.transpose() / (1.0 + c * u.dot(Au));
        CHECK(rel_frobenius(perturbed_inverse(s.A, s.T(p)), sm) <= 1e-12);
    }
}

TEST_CASE("Robin: identity path matches the assembled Robin operator") {
    auto g = Grid::rectangle(1.0, 1.0, 15, 15);
    Setup s(g, boundary_measure(g));
    for (double v : {0.5, 4.0}) {
        auto p = Perturbation::constant(s.m, v);
        auto R = assemble_robin(g, CoefficientField::identity(g, 1.0), p);
        Mat inv = R.matrix().llt().solve(Mat::Identity(g.nodes(), g.nodes()));
        CHECK(rel_frobenius(perturbed_inverse(s.A, s.T(p)), inv) <= 1e-8);
    }
}

TEST_CASE("resolvent difference: paths, terms, sign") {
    Setup s = segment_setup();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto p = s.random_v(seed, -1.0, 3.0);
        Mat d = s.direct(p);
        auto r = resolvent_difference(s.A, s.T(p), &d);
        CHECK(r.residual <= 1e-8);
        CHECK(r.check_path == "direct");
        CHECK(rel_frobenius(r.term("R1") + r.term("R2"), r.difference) <= 1e-14);
        CHECK(resolvent_difference(s.A, s.T(p)).residual <= 1e-8);
        // R1 written as (F gamma A^{-1})^* U (F gamma A^{-1})
        Mat B = s.gam.gamma * s.A.inverse_power(1.0);
        Vec wv = p.weighted() / s.g.cell_volume();
        CHECK(rel_frobenius(r.term("R1"), B.transpose() * wv.asDiagonal() * B) <= 1e-10);
    }
    auto pos = s.random_v(9, 0.0, 5.0);
    auto r = resolvent_difference(s.A, s.T(pos));
    Vec ev = sym_eigvals(r.difference);
    CHECK(ev(0) >= -1e-10 * ev.cwiseAbs().maxCoeff());
}

TEST_CASE("two weights") {
    Setup s = segment_setup();
    auto p1 = s.random_v(31, -0.5, 2.0), p2 = s.random_v(32, -0.5, 2.0);
    auto T1 = s.T(p1), T2 = s.T(p2);
    CHECK(two_weight_difference(s.A, T1, T1).difference.norm() <= 1e-15 * s.A.inverse_power(1.0).norm());
    auto T0 = s.T(Perturbation::constant(s.m, 0.0));
    CHECK(rel_frobenius(two_weight_difference(s.A, T1, T0).difference, resolvent_difference(s.A, T1).difference) <=
          1e-13);
    Mat d1 = s.direct(p1), d2 = s.direct(p2);
    auto r = two_weight_difference(s.A, T1, T2, &d1, &d2);
    CHECK(r.residual <= 1e-8);
    CHECK(two_weight_difference(s.A, T1, T2).residual <= 1e-8);

    // V1 >= V2 pointwise gives a nonnegative difference
    Perturbation hi(s.m, p2.values.cwiseAbs() + p1.values.cwiseAbs());
    auto rs = two_weight_difference(s.A, s.T(hi), T2);
    Vec ev = sym_eigvals(rs.difference);
    CHECK(ev(0) >= -1e-10 * ev.cwiseAbs().maxCoeff());
}

TEST_CASE("power differences") {
    Setup s = segment_setup();
    auto p = s.random_v(41, -0.5, 2.0);
    auto T = s.T(p);
    Mat d = s.direct(p);
    const Mat& h = s.A.inverse_power(0.5);
    Mat W = h * T.matrix * h;
    const Mat& Ai = s.A.inverse_power(1.0);
    auto r2 = power_difference(s.A, T, 2, &d);
    CHECK(r2.residual <= 1e-8);
    CHECK(rel_frobenius(r2.term("H2"), -(Ai * W + W * Ai)) <= 1e-12);
    CHECK(rel_frobenius(r2.term("H3"), W * W) <= 1e-12);
    CHECK(rel_frobenius(r2.term("H2") + r2.term("H3") + r2.term("H4"), r2.difference) <= 1e-14);
    CHECK(rel_frobenius(r2.difference, d * d - s.A.inverse_power(2.0)) <= 1e-12);
    for (int m : {3, 4}) {
        auto r = power_difference(s.A, T, m, &d);
        CHECK(r.residual <= 1e-8);
        CHECK(power_difference(s.A, T, m).residual <= 1e-8);
    }
    CHECK_THROWS(power_difference(s.A, T, 1));
    CHECK_THROWS(power_difference(s.A, T, 5));
}

TEST_CASE("margin violations are reported") {
    Setup s = segment_setup();
    auto T = s.T(Perturbation::constant(s.m, -200.0));
    CHECK(positivity_margin(T) < 0.05);
    CHECK_THROWS_AS(perturbed_inverse(s.A, T), PositivityError);
    CHECK_THROWS_AS(resolvent_difference(s.A, T), PositivityError);
}
