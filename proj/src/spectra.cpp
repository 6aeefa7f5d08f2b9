#include "spl/spectra.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "spl/rng.hpp"

namespace spl {

namespace {

Vec sorted_desc(Vec v) {
    std::sort(v.data(), v.data() + v.size(), std::greater<double>());
    return v;
}

Vec keep_above(const Vec& desc, double floor) {
    int k = count_above(desc, floor);
    return desc.head(k);
}

struct LineFit {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

std::vector<double> moving_average(const std::vector<double>& v, int k) {
    std::vector<double> out;
    if (k < 1 || k > static_cast<int>(v.size())) return out;
    double s = 0;
    for (int i = 0; i < k; ++i) s += v[i];
    out.push_back(s / k);
    for (size_t i = k; i < v.size(); ++i) {
        s += v[i] - v[i - k];
        out.push_back(s / k);
    }
    return out;
}

}  // namespace

int count_above(const Vec& v, double lambda) {
    int c = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v(i) > lambda) ++c;
    return c;
}

std::vector<CountingSample> counting_samples(const Vec& values, double lam_lo, double lam_hi, int count) {
    std::vector<CountingSample> out;
    if (count < 2 || !(lam_lo > 0) || !(lam_hi > lam_lo)) return out;
    const double a = std::log(lam_lo), b = std::log(lam_hi);
    for (int i = 0; i < count; ++i) {
        CountingSample s;
        s.lambda = std::exp(a + (b - a) * i / (count - 1));
        s.n_plus = count_above(values, s.lambda);
        s.n = s.n_plus;
        out.push_back(s);
    }
    return out;
}

SpectrumReport spectrum(const Mat& K, const FitOptions& opt, int samples) {
    SpectrumReport rep;
    const double scale = K.cwiseAbs().maxCoeff();
    const bool symmetric = K.rows() == K.cols() && (K - K.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
    Vec all;
    if (symmetric) {
        Vec ev = sym_eigvals(K);
        double norm = ev.cwiseAbs().size() ? ev.cwiseAbs().maxCoeff() : 0.0;
        rep.floor = opt.floor_rel * norm;
        std::vector<double> pos, neg;
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            if (ev(i) > rep.floor) pos.push_back(ev(i));
            if (ev(i) < -rep.floor) neg.push_back(-ev(i));
        }
        rep.positive = sorted_desc(Eigen::Map<Vec>(pos.data(), static_cast<Eigen::Index>(pos.size())));
        rep.negative = sorted_desc(Eigen::Map<Vec>(neg.data(), static_cast<Eigen::Index>(neg.size())));
        all = sorted_desc(ev.cwiseAbs());
    } else {
        all = sorted_desc(singular_values(K));
        rep.floor = opt.floor_rel * (all.size() ? all(0) : 0.0);
        rep.positive = keep_above(all, rep.floor);
    }
    rep.singular = keep_above(all, rep.floor);

    if (rep.singular.size() > 0 && samples >= 2) {
        const double lo = std::max(rep.floor, rep.singular(rep.singular.size() - 1) * 0.5);
        const double hi = rep.singular(0);
        if (hi > lo) {
            for (int i = 0; i < samples; ++i) {
                CountingSample s;
                s.lambda = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (samples - 1));
                s.n_plus = count_above(rep.positive, s.lambda);
                s.n_minus = symmetric ? count_above(rep.negative, s.lambda) : 0;
                s.n = s.n_plus + s.n_minus;
                rep.counting.push_back(s);
            }
        }
    }
    try {
        rep.fit = fit_power_law(all, opt);
        rep.fitted = true;
    } catch (const std::exception& e) {
        rep.fit_error = e.what();
    }
    return rep;
}

PowerFit fit_power_law(const Vec& values, const FitOptions& opt) {
    Vec v = sorted_desc(values.cwiseAbs());
    if (v.size() == 0 || !(v(0) > 0)) throw std::invalid_argument("fit: no positive values");
    const double floor = opt.floor_rel * v(0);
    PowerFit f;
    f.n_usable = count_above(v, floor);
    if (f.n_usable < opt.min_usable)
        throw std::invalid_argument("fit: only " + std::to_string(f.n_usable) + " values above the floor");
    int n_res = opt.resolution_cap > 0 ? std::min(f.n_usable, opt.resolution_cap) : f.n_usable;
    f.hi = std::min(count_above(v, opt.tail_factor * floor), n_res);
    f.lo = std::max(1, static_cast<int>(std::ceil(opt.head_frac * n_res)));
    if (opt.lo_override > 0) f.lo = opt.lo_override;
    if (opt.hi_override > 0) f.hi = std::min(opt.hi_override, f.n_usable);
    if (f.hi - f.lo + 1 < 3) throw std::invalid_argument("fit: window too short");

    if (!opt.period_average) {
        std::vector<double> x, y;
        for (int j = f.lo; j <= f.hi; ++j) {
            x.push_back(std::log(static_cast<double>(j)));
            y.push_back(std::log(v(j - 1)));
        }
        LineFit lf = least_squares(x, y);
        f.slope = lf.slope;
        f.intercept = lf.intercept;
        f.r2 = lf.r2;
        f.theta_hat = -1.0 / lf.slope;
        // s_j = (C / j)^{1/theta}  <=>  n(lambda) = C lambda^{-theta}
        f.coeff_hat = std::exp(lf.intercept * f.theta_hat);
        return f;
    }

    // counting function across the window, averaged over one detected log-period
    std::vector<CountingSample> cs = counting_samples(v.head(f.hi), v(f.hi - 1), v(f.lo - 1), opt.samples);
    std::vector<double> x, y;
    for (const auto& s : cs)
        if (s.n > 0) {
            x.push_back(std::log(s.lambda));
            y.push_back(std::log(static_cast<double>(s.n)));
        }
    if (x.size() < 10) throw std::invalid_argument("fit: too few counting samples");
    LineFit raw = least_squares(x, y);
    std::vector<double> res(y.size());
    for (size_t i = 0; i < y.size(); ++i) res[i] = y[i] - (raw.slope * x[i] + raw.intercept);
    const double dx = x[1] - x[0];
    f.period = detect_period(res, dx);
    LineFit lf = raw;
    if (f.period > 0) {
        int k = static_cast<int>(std::lround(f.period / dx));
        std::vector<double> xs = moving_average(x, k), ys = moving_average(y, k);
        if (xs.size() >= 3) lf = least_squares(xs, ys);
    }
    f.slope = lf.slope;
    f.intercept = lf.intercept;
    f.r2 = lf.r2;
    f.theta_hat = -lf.slope;
    f.coeff_hat = std::exp(lf.intercept);
    return f;
}

PowerFit fit_counting(const std::vector<CountingSample>& samples) {
    std::vector<double> x, y;
    for (const auto& s : samples)
        if (s.n > 0 && s.lambda > 0) {
            x.push_back(std::log(s.lambda));
            y.push_back(std::log(static_cast<double>(s.n)));
        }
    if (x.size() < 3) throw std::invalid_argument("fit: too few counting samples");
    LineFit lf = least_squares(x, y);
    PowerFit f;
    f.slope = lf.slope;
    f.intercept = lf.intercept;
    f.r2 = lf.r2;
    f.theta_hat = -lf.slope;
    f.coeff_hat = std::exp(lf.intercept);
    f.n_usable = static_cast<int>(x.size());
    return f;
}

double detect_period(const std::vector<double>& y, double dx) {
    const int n = static_cast<int>(y.size());
    if (n < 8) return 0.0;
    double mean = 0;
    for (double v : y) mean += v;
    mean /= n;
    std::vector<double> r(n);
    double var = 0;
    for (int i = 0; i < n; ++i) {
        r[i] = y[i] - mean;
        var += r[i] * r[i];
    }
    var /= n;
    if (var <= 0.0) return 0.0;
    std::vector<double> ac(n / 2 + 1, 0.0);
    ac[0] = 1.0;
    for (int k = 1; k <= n / 2; ++k) {
        double s = 0;
        for (int i = 0; i + k < n; ++i) s += r[i] * r[i + k];
        ac[k] = s / n / var;
    }
    int z = 1;
    while (z <= n / 2 && ac[z] >= 0) ++z;
    if (z > n / 2) return 0.0;
    int best = z;
    for (int k = z; k <= n / 2; ++k)
        if (ac[k] > ac[best]) best = k;
    if (ac[best] <= 0.0) return 0.0;
    double kk = best;
    if (best > z && best < n / 2) {
        double a = ac[best - 1], b = ac[best], c = ac[best + 1];
        double den = a - 2 * b + c;
        if (den < 0) kk += 0.5 * (a - c) / den;
    }
    return kk * dx;
}

LogPeriodicReport log_periodic_residual(const std::vector<CountingSample>& samples, double theta) {
    LogPeriodicReport rep;
    rep.theta = theta;
    for (const auto& s : samples)
        if (s.n > 0 && s.lambda > 0) {
            rep.log_lambda.push_back(std::log(s.lambda));
            rep.scaled.push_back(s.n * std::pow(s.lambda, theta));
        }
    const size_t n = rep.log_lambda.size();
    if (n < 20) throw std::invalid_argument("log-periodic residual: too few samples");
    const double decades = (rep.log_lambda.back() - rep.log_lambda.front()) / std::log(10.0);
    if (std::abs(decades) <= 0 || n / std::abs(decades) < 10)
        throw std::invalid_argument("log-periodic residual: fewer than 10 samples per decade");
    double mx = rep.scaled[0], mn = rep.scaled[0], mean = 0;
    for (double v : rep.scaled) {
        mx = std::max(mx, v);
        mn = std::min(mn, v);
        mean += v;
    }
    rep.mean = mean / n;
    rep.max_min_ratio = mx / mn;
    for (double v : rep.scaled) rep.residual.push_back(v - rep.mean);
    double amp = 0;
    for (double v : rep.residual) amp = std::max(amp, std::abs(v));
    // an oscillation below 1e-6 of the mean is treated as flat
    if (amp > 1e-6 * std::abs(rep.mean)) {
        rep.period = detect_period(rep.residual, std::abs(rep.log_lambda[1] - rep.log_lambda[0]));
        rep.period_found = rep.period > 0;
    }
    return rep;
}

KyFanReport kyfan_check(const Mat& K1, const Mat& K2, const std::vector<double>& lam1, const std::vector<double>& lam2) {
    KyFanReport rep;
    Vec e1 = sym_eigvals(K1), e2 = sym_eigvals(K2), e12 = sym_eigvals(K1 + K2);
    Vec s1 = e1.cwiseAbs(), s2 = e2.cwiseAbs(), s12 = e12.cwiseAbs();
    Vec sp = singular_values(K1 * K2);
    for (double l1 : lam1)
        for (double l2 : lam2) {
            int a = count_above(e12, l1 + l2), b = count_above(e1, l1) + count_above(e2, l2);
            if (a > b) ++rep.additive_violations;
            if (a == b) ++rep.tight;
            if (count_above(s12, l1 + l2) > count_above(s1, l1) + count_above(s2, l2)) ++rep.additive_violations;
            if (count_above(sp, l1 * l2) > count_above(s1, l1) + count_above(s2, l2)) ++rep.multiplicative_violations;
            rep.checks += 3;
        }
    return rep;
}

namespace {

std::vector<double> midpoint_grid(const Mat& K) {
    Vec s = sorted_desc(sym_eigvals(K).cwiseAbs());
    std::vector<double> g{2.0 * s(0)};
    for (Eigen::Index i = 0; i + 1 < s.size(); ++i) g.push_back(0.5 * (s(i) + s(i + 1)));
    g.push_back(0.5 * s(s.size() - 1));
    return g;
}

}  // namespace

KyFanReport kyfan_suite(int trials, int size, std::uint64_t seed) {
    KyFanReport total;
    for (int t = 0; t < trials; ++t) {
        CounterRng rng(seed, static_cast<std::uint64_t>(t));
        Mat K1(size, size), K2(size, size);
        for (int i = 0; i < size; ++i)
            for (int j = 0; j < size; ++j) {
                K1(i, j) = rng.uniform(-1, 1);
                K2(i, j) = rng.uniform(-1, 1);
            }
        K1 = symmetrize(K1);
        K2 = symmetrize(K2);
        KyFanReport r = kyfan_check(K1, K2, midpoint_grid(K1), midpoint_grid(K2));
        total.checks += r.checks;
        total.additive_violations += r.additive_violations;
        total.multiplicative_violations += r.multiplicative_violations;
        total.tight += r.tight;
    }
    return total;
}

double weyl_r(const Mat& a, const Vec& tangent, const Vec& normal) {
    auto q = [&](double y) {
        Vec xi = tangent + y * normal;
        return xi.dot(a * xi);
    };
    auto g = [&](double u) {
        double c = std::cos(u);
        if (c <= 0) return 0.0;
        double v = q(std::tan(u));
        return 1.0 / (v * v * c * c);
    };
    const double h = 0.5 * std::numbers::pi;
    double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, -h, h, 15, 1e-14);
    return I / (2.0 * std::numbers::pi);
}

double weyl_r_closed_form(const Mat& a, const Vec& tangent, const Vec& normal) {
    double al = normal.dot(a * normal), be = tangent.dot(a * normal), ga = tangent.dot(a * tangent);
    double D = al * ga - be * be;
    if (!(al > 0 && D > 0)) throw std::invalid_argument("degenerate symbol");
    return al / (4.0 * std::pow(D, 1.5));
}

double weyl_density(const Mat& a, const Vec& normal, double theta) {
    const int N = static_cast<int>(normal.size());
    if (a.rows() != N || a.cols() != N) throw std::invalid_argument("weyl_density: symbol/normal dimension mismatch");
    Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0)) throw std::invalid_argument("weyl_density: degenerate symbol");
    Vec nu = normal.normalized();
    const double two_pi = 2.0 * std::numbers::pi;
    if (N == 2) {
        Vec tau(2);
        tau << -nu(1), nu(0);
        double s = std::pow(weyl_r(a, tau, nu), theta) + std::pow(weyl_r(a, -tau, nu), theta);
        return s / two_pi;  // d = 1
    }
    if (N == 3) {
        Vec e1 = (std::abs(nu(0)) < 0.9 ? Vec::Unit(3, 0) : Vec::Unit(3, 1));
        e1 = (e1 - e1.dot(nu) * nu).normalized();
        Eigen::Vector3d n3 = nu, f3 = e1;
        Vec e2 = n3.cross(f3);
        const int M = 64;
        double s = 0;
        for (int k = 0; k < M; ++k) {
            double phi = two_pi * k / M;
            s += std::pow(weyl_r(a, std::cos(phi) * e1 + std::sin(phi) * e2, nu), theta);
        }
        s *= two_pi / M;
        return s / (2.0 * two_pi * two_pi);  // d = 2
    }
    throw std::invalid_argument("weyl_density: only N = 2 or N = 3");
}

WeylPrediction weyl_prediction(const DiscreteMeasure& m, const Perturbation& p1, const Perturbation& p2, double theta,
                               const Mat& a, const Vec& normal) {
    if (std::abs(m.nominal_dim - (m.ambient_dim() - 1)) > 1e-12)
        throw std::invalid_argument("weyl_prediction: measure must have dimension N - 1");
    if (p1.size() != m.size() || p2.size() != m.size())
        throw std::invalid_argument("weyl_prediction: weights do not live on the measure");
    if (normal.size() != m.ambient_dim()) throw std::invalid_argument("weyl_prediction: dimension mismatch");
    WeylPrediction w;
    w.theta = theta;
    const double om = weyl_density(a, normal, theta);
    w.omega = Vec::Constant(m.size(), om);
    for (int k = 0; k < m.size(); ++k) {
        double dv = p2.values(k) - p1.values(k);
        if (dv > 0) w.coefficient_plus += m.weights(k) * om * std::pow(dv, theta);
        if (dv < 0) w.coefficient_minus += m.weights(k) * om * std::pow(-dv, theta);
    }
    w.prefactor = std::pow(2.0 * std::numbers::pi, -m.nominal_dim);
    return w;
}

}  // namespace spl
