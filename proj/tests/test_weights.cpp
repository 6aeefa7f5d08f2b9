#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "spl/rng.hpp"
#include "spl/weights.hpp"

using namespace spl;

namespace {

std::shared_ptr<const DiscreteMeasure> unit_segment(int count) {
    Vec a = Vec::Zero(1), b = Vec::Ones(1);
    return std::make_shared<const DiscreteMeasure>(segment_measure(a, b, count));
}

}  // namespace

TEST_CASE("psi is the critical Orlicz function") {
    CHECK(luxemburg_psi(0) == 0.0);
    const double e = std::numbers::e;
    CHECK(std::abs(luxemburg_psi(e - 1) - 1.0) < 1e-15);
    // series branch agrees with the closed form where both are accurate
    for (double s : {5e-5, 9e-5}) {
        double direct = (1 + s) * std::log1p(s) - s;
        CHECK(luxemburg_psi(s) == doctest::Approx(direct).epsilon(1e-8));
    }
}

TEST_CASE("norm family closed forms") {
    auto m = unit_segment(50);
    auto zero = Perturbation::constant(m, 0.0);
    for (double th : {0.5, 1.0, 2.0}) CHECK(lp_theta_norm(zero, th) == 0.0);
    auto one = Perturbation::constant(m, 1.0);
    CHECK(lp_theta_norm(one, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(lp_theta_norm(one, 0.5) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(lp_theta_norm(one, 1.0) - 1.0 / (std::numbers::e - 1)) < 1e-9);
    CHECK_THROWS(lp_theta_norm(one, 0.0));
    CHECK_THROWS(lp_theta_norm(one, -1.0));
}

TEST_CASE("luxemburg consistency, homogeneity and monotonicity") {
    auto m = unit_segment(64);
    CounterRng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Vec v(64);
        for (int k = 0; k < 64; ++k) v(k) = rng.uniform(-3, 3);
        Perturbation p(m, v);
        double lam = lp_theta_norm(p, 1.0);
        double s = 0;
        for (int k = 0; k < 64; ++k) s += m->weights(k) * luxemburg_psi(std::abs(v(k)) / lam);
        CHECK(s <= 1.0);
        CHECK(s >= 1.0 - 1e-8);
        for (double th : {0.5, 1.0, 1.5, 3.0}) {
            double c = rng.uniform(-4, 4);
            CHECK(lp_theta_norm(p.scaled(c), th) == doctest::Approx(std::abs(c) * lp_theta_norm(p, th)).epsilon(1e-9));
            Vec bigger = v.cwiseAbs() + Vec::Constant(64, 0.1);
            CHECK(lp_theta_norm(p, th) <= lp_theta_norm(Perturbation(m, bigger), th));
        }
    }
}

TEST_CASE("sign split") {
    auto m = std::make_shared<const DiscreteMeasure>(segment_measure(Vec::Zero(1), Vec::Ones(1), 3));
    Vec v(3);
    v << 1, -2, 0;
    auto sp = split_signs(Perturbation(m, v));
    CHECK(sp.plus.values == Vec((Vec(3) << 1, 0, 0).finished()));
    CHECK(sp.minus.values == Vec((Vec(3) << 0, 2, 0).finished()));
    CHECK((sp.plus.values - sp.minus.values) == v);
    CHECK(sp.plus.values.cwiseProduct(sp.minus.values).isZero(0));
    auto pos = split_signs(Perturbation(m, v.cwiseAbs()));
    CHECK(pos.minus.values.isZero(0));
    double total = lp_theta_norm(Perturbation(m, v), 0.5);
    CHECK(total == doctest::Approx(lp_theta_norm(sp.plus, 0.5) + lp_theta_norm(sp.minus, 0.5)));
}

TEST_CASE("F and U reconstruct V") {
    auto m = unit_segment(40);
    CounterRng rng(3);
    Vec v(40);
    for (int k = 0; k < 40; ++k) v(k) = k % 5 == 0 ? 0.0 : rng.uniform(-2, 2);
    Perturbation p(m, v);
    Vec F = p.F(), U = p.U();
    for (int k = 0; k < 40; ++k) {
        CHECK(std::abs(F(k) * F(k) - std::abs(v(k))) <= 1e-14);
        if (v(k) != 0) CHECK(U(k) * std::abs(v(k)) == v(k));
    }
}

TEST_CASE("mollification") {
    auto m = unit_segment(64);
    auto c = Perturbation::constant(m, 2.5);
    auto mc = mollify_weight(c, 0.1);
    CHECK_FALSE(mc.below_floor);
    CHECK((mc.p.values.array() - 2.5).abs().maxCoeff() < 1e-12);

    Vec step(64);
    for (int k = 0; k < 64; ++k) step(k) = m->atoms(k, 0) < 0.4 ? 1.0 : -0.5;
    Perturbation ps(m, step);
    double prev = 1e300;
    for (double r : {0.2, 0.1, 0.05, 0.03, 0.02}) {
        auto out = mollify_weight(ps, r);
        CHECK(std::abs(out.p.integral() - ps.integral()) <= 1e-10);
        double err = lp_theta_norm(Perturbation(m, out.p.values - step), 0.5);
        CHECK(err < prev);
        prev = err;
    }
    auto tiny = mollify_weight(ps, 1e-4);
    CHECK(tiny.below_floor);
    CHECK(tiny.p.values == step);
    CHECK_THROWS(mollify_weight(ps, 0.0));
}
