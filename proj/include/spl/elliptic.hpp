#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

#include "spl/grid.hpp"
#include "spl/weights.hpp"

namespace spl {

struct CoefficientField {
    std::vector<Mat> a;  // one symmetric N x N matrix per node
    double t = 1.0;

    static CoefficientField constant(const Grid& g, const Mat& a, double t);
    static CoefficientField identity(const Grid& g, double t) {
        return constant(g, Mat::Identity(g.dim, g.dim), t);
    }
    void validate(const Grid& g, double eps_ell = 1e-12) const;
};

// raised when a form stops being positive; callers are expected to raise t
struct PositivityError : std::runtime_error {
    double margin;
    PositivityError(const std::string& what, double m) : std::runtime_error(what), margin(m) {}
};

// Symmetric positive definite matrix w.r.t. the Euclidean inner product: the cell volume
// h^N is divided out of the form once, here, and every coupling term carries 1/h^N.
class OperatorMatrix {
public:
    OperatorMatrix(Grid g, Mat m, double t);

    const Mat& matrix() const { return m_; }
    const Grid& grid() const { return grid_; }
    double shift() const { return t_; }
    int size() const { return static_cast<int>(m_.rows()); }

    const SymEig& eig() const;
    // A^{-s} via the spectral factorisation, cached per exponent
    const Mat& inverse_power(double s) const;

private:
    struct Cache {
        std::mutex mu;
        std::shared_ptr<SymEig> eig;
        std::map<double, std::shared_ptr<Mat>> powers;
    };
    Grid grid_;
    Mat m_;
    double t_;
    std::shared_ptr<Cache> cache_;
};

OperatorMatrix assemble_neumann(const Grid& grid, const CoefficientField& coeffs);

// Neumann matrix plus the boundary coupling; throws PositivityError if the result is not positive definite
OperatorMatrix assemble_robin(const Grid& grid, const CoefficientField& coeffs, const Perturbation& boundary_p);

Mat inverse_power(const OperatorMatrix& A, double s);

// exact discrete spectrum of the 1D constant-coefficient Neumann matrix
Vec neumann_spectrum_1d(int n, double length, double t);

}  // namespace spl
