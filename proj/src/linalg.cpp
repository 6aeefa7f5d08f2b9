#include "spl/linalg.hpp"

#include <dlfcn.h>
#include <lapacke.h>

#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace spl {

namespace {

Vec raw_syevd(Mat& work, char jobz) {
    const lapack_int n = static_cast<lapack_int>(work.rows());
    Vec w(n);
    if (n == 0) return w;
    lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, jobz, 'L', n, work.data(), n, w.data());
    if (info != 0) throw std::runtime_error("dsyevd failed, info=" + std::to_string(info));
    return w;
}

// Neumann chain: eigenvalues 2 - 2 cos(k pi / n) are known in closed form
bool backend_sane() {
    const int n = 300;
    Mat a = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        a(i, i) = (i == 0 || i == n - 1) ? 1.0 : 2.0;
        if (i + 1 < n) a(i + 1, i) = a(i, i + 1) = -1.0;
    }
    Mat work = a;
    Vec w = raw_syevd(work, 'V');
    double err = 0.0;
    for (int k = 0; k < n; ++k)
        err = std::max(err, std::abs(w(k) - (2.0 - 2.0 * std::cos(k * std::numbers::pi / n))));
    double orth = (work.transpose() * work - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
    return err < 1e-10 && orth < 1e-10;
}

// Some dynamic-arch OpenBLAS builds pick a broken kernel on newer CPUs. If the probe fails,
// fall back to a conservative core type through the library's own re-init hooks.
void ensure_backend() {
    static std::once_flag flag;
    std::call_once(flag, [] {
        if (backend_sane()) return;
        auto quit = reinterpret_cast<void (*)()>(dlsym(RTLD_DEFAULT, "gotoblas_dynamic_quit"));
        auto init = reinterpret_cast<void (*)()>(dlsym(RTLD_DEFAULT, "gotoblas_dynamic_init"));
        if (quit && init) {
            for (const char* core : {"SkylakeX", "Haswell", "Sandybridge", "Nehalem"}) {
                setenv("OPENBLAS_CORETYPE", core, 1);
                quit();
                init();
                if (backend_sane()) return;
            }
        }
        throw std::runtime_error("LAPACK backend failed its eigenvalue self-check");
    });
}

Vec run_syevd(Mat& work, char jobz) {
    ensure_backend();
    return raw_syevd(work, jobz);
}

}  // namespace

SymEig sym_eig(const Mat& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("sym_eig: matrix not square");
    SymEig e;
    e.vectors = a;
    e.values = run_syevd(e.vectors, 'V');
    return e;
}

Vec sym_eigvals(const Mat& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("sym_eigvals: matrix not square");
    Mat work = a;
    return run_syevd(work, 'N');
}

Mat spectral_apply(const SymEig& e, double (*f)(double, double), double arg) {
    Vec d(e.values.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = f(e.values(i), arg);
    Mat scaled = e.vectors * d.asDiagonal();
    return scaled * e.vectors.transpose();
}

Mat spectral_power(const SymEig& e, double s) {
    return spectral_apply(e, [](double lam, double p) { return std::pow(lam, -p); }, s);
}

Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

double rel_frobenius(const Mat& a, const Mat& b) {
    double den = std::max(a.norm(), b.norm());
    if (den == 0.0) return 0.0;
    return (a - b).norm() / den;
}

Vec singular_values(const Mat& a) {
    ensure_backend();
    Mat work = a;
    const lapack_int m = static_cast<lapack_int>(a.rows());
    const lapack_int n = static_cast<lapack_int>(a.cols());
    Vec s(std::min(m, n));
    if (s.size() == 0) return s;
    lapack_int info = LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'N', m, n, work.data(), m, s.data(),
                                     nullptr, 1, nullptr, 1);
    if (info != 0) throw std::runtime_error("dgesdd failed, info=" + std::to_string(info));
    return s;
}

}  // namespace spl
