#include "spl/birman_schwinger.hpp"

#include <algorithm>
#include <cmath>

namespace spl {

RestrictionMatrix restriction_matrix(const Grid& grid, const DiscreteMeasure& m) {
    if (m.ambient_dim() != grid.dim) throw std::invalid_argument("restriction: measure and grid dimension differ");
    RestrictionMatrix r;
    r.gamma = Mat::Zero(m.size(), grid.nodes());
    for (int k = 0; k < m.size(); ++k) {
        Vec x = m.atom(k);
        if (!grid.bbox.contains(x)) throw std::invalid_argument("restriction: atom outside the grid box");
        int i0[2] = {0, 0};
        double f[2] = {0.0, 0.0};
        for (int a = 0; a < grid.dim; ++a) {
            double s = (x(a) - grid.bbox.lo[a]) / grid.spacing[a] - 0.5;
            s = std::clamp(s, 0.0, static_cast<double>(grid.shape[a] - 1));
            int i = std::min(static_cast<int>(std::floor(s)), grid.shape[a] - 2);
            i0[a] = i;
            f[a] = s - i;
        }
        if (grid.dim == 1) {
            r.gamma(k, i0[0]) += 1.0 - f[0];
            r.gamma(k, i0[0] + 1) += f[0];
        } else {
            for (int p = 0; p < 2; ++p)
                for (int q = 0; q < 2; ++q)
                    r.gamma(k, grid.index(i0[0] + p, i0[1] + q)) += (p ? f[0] : 1.0 - f[0]) * (q ? f[1] : 1.0 - f[1]);
        }
    }
    return r;
}

Mat coupling_matrix(const Grid& grid, const RestrictionMatrix& g, const Perturbation& p) {
    if (g.gamma.rows() != p.size()) throw std::invalid_argument("coupling: perturbation and restriction sizes differ");
    Vec wv = p.weighted() / grid.cell_volume();
    return g.gamma.transpose() * wv.asDiagonal() * g.gamma;
}

BSOperator bs_operator(const OperatorMatrix& A, const RestrictionMatrix& g, const Perturbation& p, double l,
                       const std::string& id) {
    if (g.gamma.cols() != A.size() || g.gamma.rows() != p.size())
        throw std::invalid_argument("bs_operator: size mismatch");
    if (!(l > 0.0) || std::abs(2.0 * l - std::round(2.0 * l)) > 1e-12)
        throw std::invalid_argument("bs_operator: l must be a positive half-integer");
    Mat B = g.gamma * A.inverse_power(l);  // atoms x nodes
    Vec wv = p.weighted() / A.grid().cell_volume();
    BSOperator T;
    T.matrix = symmetrize(B.transpose() * wv.asDiagonal() * B);
    T.l = l;
    T.perturbation_id = id;
    return T;
}

Mat q_operator(const OperatorMatrix& A, const RestrictionMatrix& g, const Perturbation& G, double l) {
    if ((G.values.array() < 0.0).any()) throw std::invalid_argument("q_operator: density must be nonnegative");
    if (g.gamma.cols() != A.size() || g.gamma.rows() != G.size())
        throw std::invalid_argument("q_operator: size mismatch");
    Vec d = G.measure->weights.cwiseSqrt().cwiseProduct(G.values) / std::sqrt(A.grid().cell_volume());
    return d.asDiagonal() * (g.gamma * A.inverse_power(l));
}

double positivity_margin(const BSOperator& T) { return 1.0 + sym_eigvals(T.matrix)(0); }

Mat bs_compressed(const OperatorMatrix& A, const RestrictionMatrix& g, const Perturbation& p, double l) {
    if (g.gamma.cols() != A.size() || g.gamma.rows() != p.size())
        throw std::invalid_argument("bs_compressed: size mismatch");
    Mat B = g.gamma * A.inverse_power(2.0 * l);
    Mat gram = symmetrize(B * g.gamma.transpose()) / A.grid().cell_volume();
    Vec f = p.weighted().cwiseAbs().cwiseSqrt();
    return f.asDiagonal() * gram * f.asDiagonal();
}

double positivity_margin(const OperatorMatrix& A, const RestrictionMatrix& g, const Perturbation& p, double l) {
    if (p.size() >= A.size()) return positivity_margin(bs_operator(A, g, p, l));
    // nonzero eigenvalues of T are those of S K with K = F gram F, S = sign V; S K is similar to K^{1/2} S K^{1/2}
    SymEig k = sym_eig(bs_compressed(A, g, p, l));
    Vec root = k.values.cwiseMax(0.0).cwiseSqrt();
    Mat half = k.vectors * root.asDiagonal() * k.vectors.transpose();
    Vec sign = p.values.unaryExpr([](double v) { return v < 0.0 ? -1.0 : 1.0; });
    Vec ev = sym_eigvals(symmetrize(half * sign.asDiagonal() * half));
    return 1.0 + std::min(ev(0), 0.0);
}

bool margin_exceeds(const BSOperator& T, double margin) {
    Mat M = T.matrix;
    M.diagonal().array() += 1.0 - margin;
    Eigen::LLT<Mat> llt(M);
    return llt.info() == Eigen::Success;
}

}  // namespace spl
