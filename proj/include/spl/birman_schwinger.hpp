#pragma once

#include <string>

#include "spl/elliptic.hpp"

namespace spl {

// rows = atoms, columns = grid nodes; multilinear interpolation between node centres,
// clamped to the node hull (equivalent to the reflection ghost nodes)
struct RestrictionMatrix {
    Mat gamma;
};

RestrictionMatrix restriction_matrix(const Grid& grid, const DiscreteMeasure& m);

// gamma^T diag(w V) gamma / h^N: the form  int |u|^2 V dmu  in Euclidean grid coordinates
Mat coupling_matrix(const Grid& grid, const RestrictionMatrix& g, const Perturbation& p);

struct BSOperator {
    Mat matrix;
    double l = 0.5;
    std::string perturbation_id;
};

// A^{-l} gamma^T diag(w V) gamma A^{-l} / h^N
BSOperator bs_operator(const OperatorMatrix& A, const RestrictionMatrix& g, const Perturbation& p, double l = 0.5,
                       const std::string& id = "");

// diag(sqrt(w) G) gamma A^{-l} / h^{N/2}, so that Q^T Q is the operator above with V = G^2
Mat q_operator(const OperatorMatrix& A, const RestrictionMatrix& g, const Perturbation& G, double l);

// smallest eigenvalue of I + T
double positivity_margin(const BSOperator& T);
// the same number computed in atom space, cheap when there are fewer atoms than nodes
double positivity_margin(const OperatorMatrix& A, const RestrictionMatrix& g, const Perturbation& p, double l = 0.5);

// F gamma A^{-2l} gamma^T F / h^N with F = diag(sqrt(w |V|)): atoms x atoms, and for V >= 0
// its nonzero spectrum is that of the operator above
Mat bs_compressed(const OperatorMatrix& A, const RestrictionMatrix& g, const Perturbation& p, double l = 0.5);
// cheaper yes/no form of the same test via Cholesky of I + T - margin I
bool margin_exceeds(const BSOperator& T, double margin);

constexpr double default_margin = 0.05;

}  // namespace spl
