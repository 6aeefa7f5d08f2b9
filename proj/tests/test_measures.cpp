#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "spl/measures.hpp"

using namespace spl;

namespace {

// independent oracle: plain bisection on sum rho^d - 1 with no Newton step
double moran_oracle(const std::vector<double>& r) {
    double lo = 0, hi = 64;
    for (int i = 0; i < 300; ++i) {
        double mid = 0.5 * (lo + hi), s = 0;
        for (double x : r) s += std::pow(x, mid);
        (s > 1 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) {
    Vec x(2);
    x << a, b;
    return x;
}

}  // namespace

TEST_CASE("moran dimension matches closed forms and bisection") {
    CHECK(solve_moran_dimension({0.5, 0.5}) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(solve_moran_dimension({0.5, 0.5, 0.5, 0.5}) == doctest::Approx(2.0).epsilon(1e-14));
    double d = solve_moran_dimension({1.0 / 3, 1.0 / 3});
    CHECK(std::abs(d - std::log(2.0) / std::log(3.0)) < 1e-12);
    CHECK(std::abs(d - moran_oracle({1.0 / 3, 1.0 / 3})) < 1e-12);
    for (int m = 2; m <= 7; ++m)
        for (double rho : {0.1, 0.25, 0.4}) {
            std::vector<double> r(m, rho);
            CHECK(std::abs(solve_moran_dimension(r) - std::log(m) / std::log(1 / rho)) < 1e-10);
        }
    std::vector<double> mixed{0.2, 0.3, 0.45};
    double dm = solve_moran_dimension(mixed);
    double s = 0;
    for (double x : mixed) s += std::pow(x, dm);
    CHECK(std::abs(s - 1) <= 1e-12);
    CHECK(std::abs(dm - moran_oracle(mixed)) < 1e-12);
}

TEST_CASE("moran dimension rejects bad input") {
    CHECK_THROWS(solve_moran_dimension({}));
    CHECK_THROWS(solve_moran_dimension({0.5, 1.0}));
    CHECK_THROWS(solve_moran_dimension({0.0, 0.5}));
}

TEST_CASE("cantor ifs measure") {
    auto m1 = ifs_measure(cantor_maps(), 1);
    REQUIRE(m1.size() == 2);
    CHECK(m1.weights(0) == doctest::Approx(0.5));
    CHECK(m1.weights(1) == doctest::Approx(0.5));
    for (int k : {0, 3, 6, 10}) {
        auto m = ifs_measure(cantor_maps(), k);
        CHECK(m.size() == (1 << k));
        CHECK(std::abs(m.mass() - 1.0) <= 1e-12);
        CHECK(std::abs(m.weights.maxCoeff() - std::pow(0.5, k)) < 1e-15);
        CHECK_NOTHROW(m.validate());
    }
    CHECK_THROWS(ifs_measure(cantor_maps(), 12, nullptr, 1000));
}

TEST_CASE("two half maps give uniform measure on the segment") {
    std::vector<Similitude> maps{Similitude::line(0.5, 0.0), Similitude::line(0.5, 0.5)};
    auto m = ifs_measure(maps, 6);
    CHECK(m.size() == 64);
    CHECK(m.nominal_dim == doctest::Approx(1.0));
    // mu(B(x,r)) against 2r by enumeration for interior balls
    for (double x : {0.3, 0.5, 0.71})
        for (double r : {0.1, 0.2}) CHECK(std::abs(ball_mass(m, v1(x), r) - 2 * r) <= 1.0 / 64 + 1e-12);
}

TEST_CASE("ifs rotation must be orthogonal") {
    Similitude s;
    s.ratio = 0.5;
    s.rotation = Mat::Identity(2, 2) * 1.01;
    s.translation = Vec::Zero(2);
    CHECK_THROWS(s.validate());
    s.rotation = Eigen::Rotation2Dd(0.3).toRotationMatrix();
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("segment measure") {
    auto m = segment_measure(v2(0, 0), v2(1, 0), 4);
    CHECK(m.size() == 4);
    for (int k = 0; k < 4; ++k) CHECK(m.weights(k) == doctest::Approx(0.25));
    CHECK(m.nominal_dim == 1.0);
    auto m2 = segment_measure(v2(0, 0), v2(2, 0), 8);
    CHECK(m2.mass() == doctest::Approx(2.0));
    auto diag = segment_measure(v2(0, 0), v2(1, 1), 16);
    for (int k = 0; k < 16; ++k) {
        CHECK(diag.atoms(k, 0) > 0);
        CHECK(diag.atoms(k, 0) < 1);
        CHECK(diag.atoms(k, 1) > 0);
        CHECK(diag.atoms(k, 1) < 1);
    }
    CHECK_THROWS(segment_measure(v2(1, 1), v2(1, 1), 4));
    CHECK_THROWS(segment_measure(v2(0, 0), v2(1, 0), 1));
    // flat bounding box with rounding in the interpolated coordinate
    for (int count : {7, 208, 333}) CHECK_NOTHROW(segment_measure(v2(0.125, 0.625), v2(1.125, 0.625), count).validate());
}

TEST_CASE("boundary measure mass is the perimeter") {
    auto g4 = Grid::rectangle(1, 1, 4, 4);
    CHECK(std::abs(boundary_measure(g4).mass() - 4.0) <= 1e-12);
    auto g64 = Grid::rectangle(1, 1, 64, 64);
    CHECK(std::abs(boundary_measure(g64).mass() - 4.0) <= 1e-12);
    auto rect = Grid::rectangle(2, 0.5, 40, 10);
    CHECK(std::abs(boundary_measure(rect).mass() - 5.0) <= 1e-12);
    auto g1 = Grid::interval(1, 16);
    auto b1 = boundary_measure(g1);
    CHECK(b1.size() == 2);
    CHECK(b1.weights(0) == 1.0);
    CHECK(b1.weights(1) == 1.0);
    CHECK(b1.nominal_dim == 0.0);
    CHECK_NOTHROW(boundary_measure(g64).validate());
}

TEST_CASE("union measure") {
    auto m = segment_measure(v2(0, 0), v2(1, 0), 8);
    DiscreteMeasure empty = segment_measure(v2(0, 0), v2(1, 0), 2);
    empty.weights.setZero();
    auto u0 = union_measure(m, empty);
    CHECK(u0.mass() == m.mass());
    CHECK(union_measure(m, m).mass() == 2 * m.mass());

    auto cantor = ifs_measure(cantor_maps(), 5);
    auto seg = segment_measure(v1(0), v1(1), 10);
    auto u = union_measure(cantor, seg);
    CHECK(u.nominal_dim == 1.0);
    CHECK(u.mass() == doctest::Approx(cantor.mass() + seg.mass()).epsilon(1e-15));
    CHECK(u.label.find("0.63") != std::string::npos);
    CHECK_THROWS(union_measure(cantor, m));
}

TEST_CASE("ahlfors constants: uniform segment") {
    auto m = segment_measure(v1(0), v1(1), 200);
    // radii sit half a spacing off the lattice, so an interior ball holds exactly 2r of mass
    std::vector<double> radii{0.0525, 0.1025, 0.2025};
    auto rep = estimate_ahlfors_constants(m, 1.0, radii);
    CHECK(rep.upper_const == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(rep.lower_const >= 1.0 - 0.01);
    auto rep2 = estimate_ahlfors_constants(scale_mass(m, 2.0), 1.0, radii);
    CHECK(rep2.upper_const == doctest::Approx(2 * rep.upper_const).epsilon(1e-14));
    CHECK(rep2.lower_const == doctest::Approx(2 * rep.lower_const).epsilon(1e-14));
    CHECK_THROWS(estimate_ahlfors_constants(m, 1.0, {}));
    CHECK_THROWS(estimate_ahlfors_constants(m, 1.0, {1e-4}));
}

TEST_CASE("ahlfors constants: cantor ratio bounded across depths") {
    const double d = std::log(2.0) / std::log(3.0);
    for (int k : {6, 8}) {
        auto m = ifs_measure(cantor_maps(), k);
        std::vector<double> radii;
        for (int j = 0; j <= k - 1; ++j) radii.push_back(std::pow(3.0, -j));
        auto rep = estimate_ahlfors_constants(m, d, radii);
        CHECK(rep.lower_const > 0);
        CHECK(rep.upper_const / rep.lower_const < 10.0);
        for (int x = 0; x < m.size(); x += 7)
            for (double r : radii) {
                double q = ball_mass(m, m.atom(x), r) / std::pow(r, d);
                CHECK(q >= rep.lower_const);
                CHECK(q <= rep.upper_const);
            }
    }
    auto m = ifs_measure(cantor_maps(), 8);
    auto radii = default_radii(m);
    CHECK(radii.size() >= 3);
    CHECK(radii.back() >= 4 * min_atom_spacing(m));
}
