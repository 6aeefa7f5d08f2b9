#pragma once

#include <string>
#include <utility>
#include <vector>

#include "spl/birman_schwinger.hpp"

namespace spl {

struct ResolventReport {
    Mat difference;
    std::vector<std::pair<std::string, Mat>> terms;
    double residual = 0.0;  // relative Frobenius distance between the two evaluation paths
    std::string check_path;

    const Mat& term(const std::string& name) const;
};

// (A + C)^{-1} by Cholesky; throws PositivityError when A + C is not positive definite
Mat direct_inverse(const OperatorMatrix& A, const Mat& coupling);

// A^{-1/2} (I + T)^{-1} A^{-1/2}
Mat perturbed_inverse(const OperatorMatrix& A, const BSOperator& T, double margin = default_margin);

// R_V = A^{-1} - A_V^{-1}. The identity path is compared with A^{-1} - direct when a direct
// inverse of the perturbed operator is supplied, otherwise with A^{-1} - perturbed_inverse.
ResolventReport resolvent_difference(const OperatorMatrix& A, const BSOperator& T, const Mat* direct = nullptr,
                                     double margin = default_margin);

// R^{(1,2)} = A_{V2}^{-1} - A_{V1}^{-1} = A^{-1/2}(T1 - T2)A^{-1/2} - Z1 + Z2
ResolventReport two_weight_difference(const OperatorMatrix& A, const BSOperator& T1, const BSOperator& T2,
                                      const Mat* direct1 = nullptr, const Mat* direct2 = nullptr,
                                      double margin = default_margin);

// A_V^{-m} - A^{-m} split into H2 (one W factor), H3 (two W factors) and the remainder H4
ResolventReport power_difference(const OperatorMatrix& A, const BSOperator& T, int m, const Mat* direct = nullptr,
                                 double margin = default_margin);

}  // namespace spl
