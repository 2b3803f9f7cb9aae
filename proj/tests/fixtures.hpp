#pragma once

// Small simulated scenarios shared by several test files.

#include "carh/simulation.hpp"

#include <cstdint>
#include <numbers>
#include <vector>

namespace fixture {

using namespace carh;

/// Diagonal family on the first three Fourier functions with
/// c_j(v) = intercept_j + slope_j * v[0].
inline OperatorFamily diagonal_family(const GridPtr& g, std::vector<double> intercept, std::vector<double> slope,
                                      double bound = 0.95) {
    std::vector<CoefficientFn> coefs;
    for (std::size_t j = 0; j < intercept.size(); ++j) {
        const double a = intercept[j], b = slope[j];
        coefs.push_back([a, b](const CovariateVector& v) { return a + b * v[0]; });
    }
    return OperatorFamily(fourier_basis(g, intercept.size()), std::move(coefs), bound);
}

inline NoiseSpec noise(const GridPtr& g, std::vector<double> sd, std::uint64_t seed) {
    return NoiseSpec{fourier_basis(g, sd.size()), std::move(sd), seed};
}

inline CovariateProcess uniform_covariates(std::uint64_t seed, std::size_t dim = 1) {
    CovariateProcess p;
    p.kind = CovariateKind::iid_uniform;
    p.dim = dim;
    p.seed = seed;
    return p;
}

/// Midpoint quadrature of U[0,1] for true_moments.
inline std::vector<CovariateVector> uniform_quadrature(std::size_t count = 2000) {
    std::vector<CovariateVector> out;
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(CovariateVector::scalar((static_cast<double>(i) + 0.5) / static_cast<double>(count)));
    }
    return out;
}

inline MeanFn zero_mean(const GridPtr& g) { return constant_mean(Curve::zero(g)); }

}  // namespace fixture
