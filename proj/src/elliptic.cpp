#include "spl/elliptic.hpp"

#include <cmath>
#include <numbers>

#include "spl/birman_schwinger.hpp"

namespace spl {

CoefficientField CoefficientField::constant(const Grid& g, const Mat& a, double t) {
    CoefficientField c;
    c.a.assign(g.nodes(), a);
    c.t = t;
    return c;
}

void CoefficientField::validate(const Grid& g, double eps_ell) const {
    if (!(t > 0.0)) throw std::invalid_argument("shift t must be positive");
    if (static_cast<int>(a.size()) != g.nodes()) throw std::invalid_argument("coefficient field size differs from node count");
    for (const Mat& m : a) {
        if (m.rows() != g.dim || m.cols() != g.dim) throw std::invalid_argument("coefficient matrix has wrong shape");
        if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw std::invalid_argument("coefficient matrix not symmetric");
        Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < eps_ell) throw std::invalid_argument("coefficient matrix not positive definite");
    }
}

OperatorMatrix::OperatorMatrix(Grid g, Mat m, double t)
    : grid_(std::move(g)), m_(std::move(m)), t_(t), cache_(std::make_shared<Cache>()) {}

const SymEig& OperatorMatrix::eig() const {
    std::lock_guard<std::mutex> lk(cache_->mu);
    if (!cache_->eig) cache_->eig = std::make_shared<SymEig>(sym_eig(m_));
    return *cache_->eig;
}

const Mat& OperatorMatrix::inverse_power(double s) const {
    if (!(s > 0.0)) throw std::invalid_argument("inverse power needs s > 0");
    const SymEig& e = eig();
    std::lock_guard<std::mutex> lk(cache_->mu);
    auto it = cache_->powers.find(s);
    if (it != cache_->powers.end()) return *it->second;
    if (e.values(0) <= 0.0) throw PositivityError("operator is not positive definite", e.values(0));
    auto p = std::make_shared<Mat>(spectral_power(e, s));
    cache_->powers.emplace(s, p);
    return *p;
}

Mat inverse_power(const OperatorMatrix& A, double s) { return A.inverse_power(s); }

namespace {

// a = D' + P with D' diagonal >= 0 and P = [[|b| s, b], [b, |b| / s]] of rank one, s = sqrt(a11 / a22)
void split_2x2(const Mat& a, double& d1, double& d2, Mat& P) {
    double b = a(0, 1);
    double s = std::sqrt(a(0, 0) / a(1, 1));
    P.resize(2, 2);
    P << std::abs(b) * s, b, b, std::abs(b) / s;
    d1 = a(0, 0) - P(0, 0);
    d2 = a(1, 1) - P(1, 1);
}

}  // namespace

OperatorMatrix assemble_neumann(const Grid& grid, const CoefficientField& coeffs) {
    coeffs.validate(grid);
    const int n = grid.nodes();
    Mat A = Mat::Zero(n, n);
    auto add_edge = [&A](int p, int q, double c) {
        A(p, p) += c;
        A(q, q) += c;
        A(p, q) -= c;
        A(q, p) -= c;
    };
    if (grid.dim == 1) {
        const double h2 = grid.spacing[0] * grid.spacing[0];
        for (int i = 0; i + 1 < n; ++i) add_edge(i, i + 1, 0.5 * (coeffs.a[i](0, 0) + coeffs.a[i + 1](0, 0)) / h2);
    } else {
        const int nx = grid.shape[0], ny = grid.shape[1];
        const double hx = grid.spacing[0], hy = grid.spacing[1];
        std::vector<double> d1(n), d2(n);
        Mat P;
        for (int k = 0; k < n; ++k) split_2x2(coeffs.a[k], d1[k], d2[k], P);
        // diagonal part on the five-point face stencil; reflection closure = no boundary faces
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < ny; ++j) {
                int k = grid.index(i, j);
                if (i + 1 < nx) {
                    int q = grid.index(i + 1, j);
                    add_edge(k, q, 0.5 * (d1[k] + d1[q]) / (hx * hx));
                }
                if (j + 1 < ny) {
                    int q = grid.index(i, j + 1);
                    add_edge(k, q, 0.5 * (d2[k] + d2[q]) / (hy * hy));
                }
            }
        // rank-one part on cell-averaged gradients of each dual cell
        for (int i = 0; i + 1 < nx; ++i)
            for (int j = 0; j + 1 < ny; ++j) {
                int k00 = grid.index(i, j), k10 = grid.index(i + 1, j);
                int k01 = grid.index(i, j + 1), k11 = grid.index(i + 1, j + 1);
                Mat abar = 0.25 * (coeffs.a[k00] + coeffs.a[k10] + coeffs.a[k01] + coeffs.a[k11]);
                if (abar(0, 1) == 0.0) continue;
                double e1, e2;
                split_2x2(abar, e1, e2, P);
                // gradient stencils: gx = (u10 + u11 - u00 - u01) / (2 hx), gy likewise
                int idx[4] = {k00, k10, k01, k11};
                double gx[4] = {-0.5 / hx, 0.5 / hx, -0.5 / hx, 0.5 / hx};
                double gy[4] = {-0.5 / hy, -0.5 / hy, 0.5 / hy, 0.5 / hy};
                for (int p = 0; p < 4; ++p)
                    for (int q = 0; q < 4; ++q)
                        A(idx[p], idx[q]) += P(0, 0) * gx[p] * gx[q] + P(0, 1) * (gx[p] * gy[q] + gy[p] * gx[q]) +
                                             P(1, 1) * gy[p] * gy[q];
            }
    }
    A.diagonal().array() += coeffs.t;
    return OperatorMatrix(grid, std::move(A), coeffs.t);
}

OperatorMatrix assemble_robin(const Grid& grid, const CoefficientField& coeffs, const Perturbation& boundary_p) {
    OperatorMatrix A = assemble_neumann(grid, coeffs);
    RestrictionMatrix g = restriction_matrix(grid, *boundary_p.measure);
    Mat M = A.matrix() + coupling_matrix(grid, g, boundary_p);
    Eigen::LLT<Mat> llt(M);
    if (llt.info() != Eigen::Success) {
        double lmin = sym_eigvals(M)(0);
        throw PositivityError("Robin form is not positive; raise t", lmin);
    }
    return OperatorMatrix(grid, std::move(M), coeffs.t);
}

Vec neumann_spectrum_1d(int n, double length, double t) {
    const double h = length / n;
    Vec ev(n);
    for (int k = 0; k < n; ++k) ev(k) = t + (2.0 / (h * h)) * (1.0 - std::cos(k * std::numbers::pi / n));
    return ev;
}

}  // namespace spl
