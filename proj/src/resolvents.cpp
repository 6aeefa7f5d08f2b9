#include "spl/resolvents.hpp"

#include <stdexcept>

namespace spl {

const Mat& ResolventReport::term(const std::string& name) const {
    for (const auto& [n, m] : terms)
        if (n == name) return m;
    throw std::out_of_range("no term named " + name);
}

namespace {

void require_margin(const BSOperator& T, double margin) {
    if (!margin_exceeds(T, margin))
        throw PositivityError("1 + T is below the positivity margin", positivity_margin(T));
}

// T (1 + T)^{-1} T, using that T commutes with (1 + T)^{-1}
Mat t_prime(const BSOperator& T) {
    Mat M = T.matrix;
    M.diagonal().array() += 1.0;
    Eigen::LDLT<Mat> ldlt(M);
    return symmetrize(T.matrix * ldlt.solve(T.matrix));
}

Mat sandwich(const OperatorMatrix& A, const Mat& X) {
    const Mat& h = A.inverse_power(0.5);
    return symmetrize(h * X * h);
}

}  // namespace

Mat direct_inverse(const OperatorMatrix& A, const Mat& coupling) {
    Mat M = A.matrix() + coupling;
    Eigen::LLT<Mat> llt(M);
    if (llt.info() != Eigen::Success) throw PositivityError("perturbed operator is not positive definite", 0.0);
    Mat inv = llt.solve(Mat::Identity(M.rows(), M.cols()));
    return symmetrize(inv);
}

Mat perturbed_inverse(const OperatorMatrix& A, const BSOperator& T, double margin) {
    require_margin(T, margin);
    Mat M = T.matrix;
    M.diagonal().array() += 1.0;
    Eigen::LLT<Mat> llt(M);
    return sandwich(A, llt.solve(Mat::Identity(M.rows(), M.cols())));
}

ResolventReport resolvent_difference(const OperatorMatrix& A, const BSOperator& T, const Mat* direct,
                                     double margin) {
    require_margin(T, margin);
    ResolventReport r;
    Mat R1 = sandwich(A, T.matrix);
    Mat R2 = -sandwich(A, t_prime(T));
    r.difference = R1 + R2;
    r.terms = {{"R1", R1}, {"R2", R2}};
    Mat other;
    if (direct) {
        other = A.inverse_power(1.0) - *direct;
        r.check_path = "direct";
    } else {
        other = A.inverse_power(1.0) - perturbed_inverse(A, T, margin);
        r.check_path = "perturbed_inverse";
    }
    r.residual = rel_frobenius(r.difference, other);
    return r;
}

ResolventReport two_weight_difference(const OperatorMatrix& A, const BSOperator& T1, const BSOperator& T2,
                                      const Mat* direct1, const Mat* direct2, double margin) {
    require_margin(T1, margin);
    require_margin(T2, margin);
    ResolventReport r;
    Mat main = sandwich(A, T1.matrix - T2.matrix);
    Mat Z1 = sandwich(A, t_prime(T1));
    Mat Z2 = sandwich(A, t_prime(T2));
    r.difference = main - Z1 + Z2;
    r.terms = {{"main", main}, {"Z1", Z1}, {"Z2", Z2}};
    Mat other;
    if (direct1 && direct2) {
        other = *direct2 - *direct1;
        r.check_path = "direct";
    } else {
        other = perturbed_inverse(A, T2, margin) - perturbed_inverse(A, T1, margin);
        r.check_path = "perturbed_inverse";
    }
    r.residual = rel_frobenius(r.difference, other);
    return r;
}

ResolventReport power_difference(const OperatorMatrix& A, const BSOperator& T, int m, const Mat* direct,
                                 double margin) {
    if (m < 2 || m > 4) throw std::invalid_argument("power_difference: m must be in 2..4");
    require_margin(T, margin);
    const int n = A.size();
    std::vector<Mat> P(m + 1);  // P[k] = A^{-k}
    P[0] = Mat::Identity(n, n);
    for (int k = 1; k <= m; ++k) P[k] = A.inverse_power(static_cast<double>(k));
    Mat W = sandwich(A, T.matrix);
    Mat Y = sandwich(A, t_prime(T));

    // products with A^0 are skipped
    auto lmul = [&](int k, const Mat& X) -> Mat { return k == 0 ? X : Mat(P[k] * X); };
    auto rmul = [&](const Mat& X, int k) -> Mat { return k == 0 ? X : Mat(X * P[k]); };

    // A_V^{-1} = A^{-1} - W + Y
    Mat H2 = Mat::Zero(n, n);
    for (int a = 0; a <= m - 1; ++a) H2 -= rmul(lmul(a, W), m - 1 - a);
    Mat H3 = Mat::Zero(n, n);
    for (int a = 0; a <= m - 2; ++a) {
        Mat left = lmul(a, W);
        for (int b = 0; a + b <= m - 2; ++b) H3 += rmul(rmul(left, b) * W, m - 2 - a - b);
    }
    H2 = symmetrize(H2);
    H3 = symmetrize(H3);

    Mat base = direct ? *direct : perturbed_inverse(A, T, margin);
    Mat lhs = base;
    for (int k = 1; k < m; ++k) lhs = lhs * base;
    ResolventReport r;
    r.difference = symmetrize(lhs) - P[m];
    Mat H4 = r.difference - H2 - H3;
    r.terms = {{"H2", H2}, {"H3", H3}, {"H4", H4}};

    // second path: the same power built from the expansion pieces
    Mat E = P[1] - W + Y;
    Mat rhs = E;
    for (int k = 1; k < m; ++k) rhs = rhs * E;
    r.residual = rel_frobenius(r.difference, symmetrize(rhs) - P[m]);
    r.check_path = direct ? "direct" : "perturbed_inverse";
    return r;
}

}  // namespace spl
