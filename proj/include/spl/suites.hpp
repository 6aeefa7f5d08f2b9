#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace spl {

struct CheckLine {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct SuiteResult {
    std::vector<CheckLine> lines;
    bool pass() const;
    void add(const std::string& name, bool ok, const std::string& detail);
};

struct IdentityStats {
    int draws = 0;
    int nonnegative_draws = 0;
    int ordered_draws = 0;  // draws with V1 >= V2
    double max_residual = 0.0;
    std::string worst;
    double worst_sign_resolvent = 0.0;  // min eigenvalue / norm over nonnegative draws
    double worst_sign_two_weight = 0.0;
    double seconds = 0.0;
};

// random admissible perturbations on a 1D grid of n1 nodes and a 2D grid of n2 x n2 nodes;
// every identity is evaluated along both paths
IdentityStats identity_suite(int draws1, int n1, int draws2, int n2, std::uint64_t seed);

SuiteResult verify_identities(std::uint64_t seed = 1);
SuiteResult verify_kyfan(std::uint64_t seed = 1);
SuiteResult verify_norms();
SuiteResult verify_measures();
SuiteResult verify_oracles();

// unknown names throw std::invalid_argument
SuiteResult verify_suite(const std::string& name);

}  // namespace spl
