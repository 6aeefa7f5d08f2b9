#pragma once

#include <Eigen/Dense>

namespace spl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// eigenvalues ascending, columns of vectors orthonormal
struct SymEig {
    Vec values;
    Mat vectors;
};

// divide-and-conquer LAPACK driver; only the lower triangle of a is read
SymEig sym_eig(const Mat& a);
Vec sym_eigvals(const Mat& a);

// Q diag(f(lambda)) Q^T
Mat spectral_apply(const SymEig& e, double (*f)(double, double), double arg);
Mat spectral_power(const SymEig& e, double s);

Mat symmetrize(const Mat& a);
double rel_frobenius(const Mat& a, const Mat& b);

// singular values, descending
Vec singular_values(const Mat& a);

}  // namespace spl
