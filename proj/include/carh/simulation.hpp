#pragma once

/** @file
 * Seeded generator for conditional functional autoregressions
 *     Z_k - a(V_k) = rho_{V_k} (Z_{k-1} - a(V_{k-1})) + eps_k
 * with rho_v = sum_j c_j(v) phi_j (x) phi_j diagonal in an orthonormal basis,
 * so that spectra and norms of the ground truth are available in closed form.
 * A constant mean function gives the textbook recursion with a single a.
 */

#include "carh/function_space.hpp"
#include "carh/kernel_regression.hpp"
#include "carh/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace carh {

using CoefficientFn = std::function<double(const CovariateVector&)>;
using MeanFn = std::function<Curve(const CovariateVector&)>;

inline MeanFn constant_mean(Curve a) {
    return [a = std::move(a)](const CovariateVector&) { return a; };
}

namespace detail {

inline Eigen::MatrixXd basis_matrix(const std::vector<Curve>& basis, const GridPtr& grid) {
    Eigen::MatrixXd phi(grid->isize(), static_cast<Eigen::Index>(basis.size()));
    for (std::size_t j = 0; j < basis.size(); ++j) {
        require_same_grid(grid, basis[j].grid(), "basis");
        phi.col(static_cast<Eigen::Index>(j)) = basis[j].values();
    }
    return phi;
}

inline void require_orthonormal(const Eigen::MatrixXd& phi, double weight, const char* what) {
    const Eigen::Index r = phi.cols();
    const Eigen::MatrixXd gram = phi.transpose() * phi * weight;
    const double err = (gram - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff();
    if (r > 0 && err > 1e-8) {
        std::ostringstream os;
        os << what << ": basis is not orthonormal (max Gram deviation " << err << ")";
        throw std::invalid_argument(os.str());
    }
}

}  // namespace detail

/// Orthonormalises curves (modified Gram-Schmidt in the quadrature inner product).
inline std::vector<Curve> orthonormalize(const std::vector<Curve>& curves) {
    std::vector<Curve> out;
    for (const Curve& c : curves) {
        Curve v = c;
        for (const Curve& e : out) v -= inner_product(e, v) * e;
        const double norm = h_norm(v);
        if (!(norm > 1e-12)) throw std::invalid_argument("orthonormalize: linearly dependent curves");
        out.push_back(v * (1.0 / norm));
    }
    return out;
}

/// 1, sqrt2 sin(2 pi t), sqrt2 cos(2 pi t), sqrt2 sin(4 pi t), ...
inline std::vector<Curve> fourier_basis(const GridPtr& grid, std::size_t r) {
    std::vector<Curve> raw;
    for (std::size_t j = 0; j < r; ++j) {
        if (j == 0) {
            raw.push_back(Curve::constant(grid, 1.0));
            continue;
        }
        const double freq = 2.0 * std::numbers::pi * static_cast<double>((j + 1) / 2);
        const bool use_sin = (j % 2) == 1;
        raw.push_back(Curve::sample(grid, [=](double t) {
            return std::numbers::sqrt2 * (use_sin ? std::sin(freq * t) : std::cos(freq * t));
        }));
    }
    return orthonormalize(raw);
}

class OperatorFamily {
public:
    OperatorFamily(std::vector<Curve> basis, std::vector<CoefficientFn> coefficients, double bound)
        : basis_(std::move(basis)), coefficients_(std::move(coefficients)), bound_(bound) {
        if (basis_.empty()) throw std::invalid_argument("OperatorFamily: empty basis");
        if (basis_.size() != coefficients_.size()) {
            throw std::invalid_argument("OperatorFamily: basis and coefficient counts differ");
        }
        if (!(bound_ >= 0.0 && bound_ < 1.0)) {
            throw std::invalid_argument("OperatorFamily: declared bound M_rho must lie in [0, 1), got " +
                                        std::to_string(bound_));
        }
        grid_ = basis_.front().grid();
        phi_ = detail::basis_matrix(basis_, grid_);
        detail::require_orthonormal(phi_, grid_->weight(), "OperatorFamily");
    }

    const GridPtr& grid() const noexcept { return grid_; }
    std::size_t rank() const noexcept { return basis_.size(); }
    const std::vector<Curve>& basis() const noexcept { return basis_; }
    const Eigen::MatrixXd& basis_matrix() const noexcept { return phi_; }
    double bound() const noexcept { return bound_; }

    Eigen::VectorXd coefficients(const CovariateVector& v) const {
        Eigen::VectorXd c(static_cast<Eigen::Index>(rank()));
        for (std::size_t j = 0; j < rank(); ++j) c[static_cast<Eigen::Index>(j)] = coefficients_[j](v);
        return c;
    }

    /// rho_v(z) computed in the basis, O(m r).
    Eigen::VectorXd apply(const CovariateVector& v, const Eigen::VectorXd& z) const {
        const Eigen::VectorXd coords = phi_.transpose() * z * grid_->weight();
        return phi_ * coefficients(v).cwiseProduct(coords);
    }

    DiscretizedOperator materialize(const CovariateVector& v) const {
        const Eigen::VectorXd c = coefficients(v);
        return DiscretizedOperator(grid_, phi_ * c.asDiagonal() * phi_.transpose());
    }

private:
    std::vector<Curve> basis_;
    std::vector<CoefficientFn> coefficients_;
    double bound_;
    GridPtr grid_;
    Eigen::MatrixXd phi_;
};

/// Gaussian noise sum_j sigma_j xi_j psi_j with orthonormal psi_j.
struct NoiseSpec {
    std::vector<Curve> basis;
    std::vector<double> sd;
    std::uint64_t seed = 1;

    void validate(const GridPtr& grid) const {
        if (basis.size() != sd.size()) throw std::invalid_argument("NoiseSpec: basis and sd counts differ");
        for (double s : sd) {
            if (!(s >= 0.0)) throw std::invalid_argument("NoiseSpec: standard deviations must be nonnegative");
        }
        detail::require_orthonormal(detail::basis_matrix(basis, grid), grid->weight(), "NoiseSpec");
    }
};

enum class CovariateKind { iid_uniform, ar1_gaussian };

struct CovariateProcess {
    CovariateKind kind = CovariateKind::iid_uniform;
    std::size_t dim = 1;
    std::uint64_t seed = 1;
    double phi = 0.5;    ///< ar1_gaussian only, |phi| < 1
    double sigma = 1.0;  ///< ar1_gaussian innovation sd

    void validate() const {
        if (dim == 0) throw std::invalid_argument("CovariateProcess: dimension must be positive");
        if (kind == CovariateKind::ar1_gaussian) {
            if (!(std::abs(phi) < 1.0)) throw std::invalid_argument("CovariateProcess: ar1 requires |phi| < 1");
            if (!(sigma >= 0.0)) throw std::invalid_argument("CovariateProcess: ar1 sigma must be nonnegative");
        }
    }
};

/// Everything drawn during a run, indexed from the initial point t = 0.
/// The returned series is t = burn_in + 1 .. burn_in + n.
struct SimulationTrace {
    CurveSeries series;
    std::vector<CovariateVector> covariates;  ///< V_0 .. V_T
    std::vector<Curve> innovations;           ///< eps_0 (zero) .. eps_T
    std::vector<Curve> states;                ///< Z_0 .. Z_T
    std::size_t burn_in = 0;
};

inline SimulationTrace simulate_carh_trace(const OperatorFamily& family, const MeanFn& mean_fn,
                                           const NoiseSpec& noise, const CovariateProcess& covproc, std::size_t n,
                                           std::size_t burn_in = 200) {
    const GridPtr& grid = family.grid();
    noise.validate(grid);
    covproc.validate();
    if (n == 0) throw std::invalid_argument("simulate_carh: n must be positive");
    if (burn_in < 1) throw std::invalid_argument("simulate_carh: burn_in must be at least 1");

    const std::size_t total = burn_in + n;
    const auto d = static_cast<Eigen::Index>(covproc.dim);

    std::mt19937_64 cov_rng(covproc.seed);
    std::mt19937_64 noise_rng(noise.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<CovariateVector> covariates;
    covariates.reserve(total + 1);
    Eigen::VectorXd state(d);
    for (std::size_t t = 0; t <= total; ++t) {
        for (Eigen::Index i = 0; i < d; ++i) {
            if (covproc.kind == CovariateKind::iid_uniform) {
                state[i] = uniform(cov_rng);
            } else if (t == 0) {
                state[i] = normal(cov_rng) * covproc.sigma / std::sqrt(1.0 - covproc.phi * covproc.phi);
            } else {
                state[i] = covproc.phi * state[i] + covproc.sigma * normal(cov_rng);
            }
        }
        covariates.emplace_back(state);
    }

    for (std::size_t t = 1; t <= total; ++t) {
        const double c = family.coefficients(covariates[t]).cwiseAbs().maxCoeff();
        if (c > family.bound()) {
            std::ostringstream os;
            os << "simulate_carh: contraction violated, |c_j(V_" << t << ")| = " << c
               << " exceeds M_rho = " << family.bound();
            throw std::invalid_argument(os.str());
        }
    }

    const Eigen::MatrixXd psi = detail::basis_matrix(noise.basis, grid);
    const Eigen::Map<const Eigen::VectorXd> sd(noise.sd.data(), static_cast<Eigen::Index>(noise.sd.size()));

    std::vector<Curve> innovations;
    std::vector<Curve> states;
    innovations.reserve(total + 1);
    states.reserve(total + 1);
    innovations.push_back(Curve::zero(grid));
    Curve prev_mean = mean_fn(covariates[0]);
    states.push_back(prev_mean);

    Eigen::VectorXd xi(sd.size());
    for (std::size_t t = 1; t <= total; ++t) {
        for (Eigen::Index j = 0; j < xi.size(); ++j) xi[j] = normal(noise_rng);
        Curve eps(grid, psi * sd.cwiseProduct(xi));
        Curve mean = mean_fn(covariates[t]);
        Eigen::VectorXd z = mean.values() + family.apply(covariates[t], states.back().values() - prev_mean.values()) +
                            eps.values();
        states.emplace_back(grid, std::move(z));
        innovations.push_back(std::move(eps));
        prev_mean = std::move(mean);
    }

    std::vector<Curve> out_curves(states.begin() + static_cast<std::ptrdiff_t>(burn_in + 1), states.end());
    std::vector<CovariateVector> out_covs(covariates.begin() + static_cast<std::ptrdiff_t>(burn_in + 1),
                                          covariates.end());
    return {CurveSeries(grid, std::move(out_curves), std::move(out_covs)), std::move(covariates),
            std::move(innovations), std::move(states), burn_in};
}

inline CurveSeries simulate_carh(const OperatorFamily& family, const MeanFn& mean_fn, const NoiseSpec& noise,
                                 const CovariateProcess& covproc, std::size_t n, std::size_t burn_in = 200) {
    return simulate_carh_trace(family, mean_fn, noise, covproc, n, burn_in).series;
}

/// Truncated moving-average form of the stationary solution at time t:
///     a(V_t) + sum_{j<J} (prod_{p<j} rho_{V_{t-p}}) eps_{t-j},
/// using the innovations recorded in `trace`.
inline Curve series_solution(const SimulationTrace& trace, const OperatorFamily& family, const MeanFn& mean_fn,
                             std::size_t t, std::size_t terms) {
    if (t == 0 || t >= trace.states.size()) throw std::out_of_range("series_solution: time index out of range");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(family.grid()->isize());
    for (std::size_t j = 0; j < terms && j < t; ++j) {
        Eigen::VectorXd term = trace.innovations[t - j].values();
        for (std::size_t p = j; p-- > 0;) term = family.apply(trace.covariates[t - p], term);
        acc += term;
    }
    return mean_fn(trace.covariates[t]) + Curve(family.grid(), acc);
}

/// max over samples of ||rho_v||_L.
inline double check_contraction(const OperatorFamily& family, std::span<const CovariateVector> v_samples) {
    if (v_samples.empty()) throw std::invalid_argument("check_contraction: no samples");
    double worst = 0.0;
    for (const auto& v : v_samples) worst = std::max(worst, sup_norm(family.materialize(v)));
    return worst;
}

struct TrueOperators {
    DiscretizedOperator rho;
    Curve mean;
};

inline TrueOperators true_operators(const OperatorFamily& family, const MeanFn& mean_fn, const CovariateVector& v) {
    return {family.materialize(v), mean_fn(v)};
}

/// Ground-truth conditional moments for an i.i.d. covariate process.
///
/// With V_k independent of the past, the stationary covariance C solves
/// C = S + E[rho_V C rho_V], S the noise covariance; in the basis phi this is
/// C_jl = S_jl / (1 - E[c_j c_l]) on the phi-block. Then
///     Gamma_v = S + rho_v C rho_v,   Delta_v = rho_v o C.
/// Expectations over V use `stationary_samples` (e.g. a quadrature grid).
struct TrueMoments {
    DiscretizedOperator rho;
    Curve mean;
    DiscretizedOperator stationary_covariance;
    DiscretizedOperator gamma;
    DiscretizedOperator delta;
};

inline TrueMoments true_moments(const OperatorFamily& family, const MeanFn& mean_fn, const NoiseSpec& noise,
                                const CovariateVector& v, std::span<const CovariateVector> stationary_samples) {
    if (stationary_samples.empty()) throw std::invalid_argument("true_moments: no stationary samples");
    const GridPtr& grid = family.grid();
    noise.validate(grid);
    const double w = grid->weight();

    const Eigen::MatrixXd psi = detail::basis_matrix(noise.basis, grid);
    Eigen::VectorXd var(static_cast<Eigen::Index>(noise.sd.size()));
    for (Eigen::Index j = 0; j < var.size(); ++j) var[j] = noise.sd[static_cast<std::size_t>(j)] * noise.sd[static_cast<std::size_t>(j)];
    // Kernel of S = sum_j sigma_j^2 psi_j (x) psi_j.
    const Eigen::MatrixXd s_kernel = psi * var.asDiagonal() * psi.transpose();

    const Eigen::MatrixXd& phi = family.basis_matrix();
    const auto r = phi.cols();
    Eigen::MatrixXd ecc = Eigen::MatrixXd::Zero(r, r);
    for (const auto& sample : stationary_samples) {
        const Eigen::VectorXd c = family.coefficients(sample);
        ecc += c * c.transpose();
    }
    ecc /= static_cast<double>(stationary_samples.size());

    // <phi_j, S phi_l> = phi_j^T K_S phi_l w^2.
    const Eigen::MatrixXd s_phi = phi.transpose() * s_kernel * phi * (w * w);
    Eigen::MatrixXd c_phi(r, r);
    for (Eigen::Index j = 0; j < r; ++j) {
        for (Eigen::Index l = 0; l < r; ++l) c_phi(j, l) = s_phi(j, l) / (1.0 - ecc(j, l));
    }
    const Eigen::MatrixXd c_kernel = s_kernel + phi * ecc.cwiseProduct(c_phi) * phi.transpose();
    const Eigen::VectorXd cv = family.coefficients(v);
    const Eigen::MatrixXd g_kernel = s_kernel + phi * (cv * cv.transpose()).cwiseProduct(c_phi) * phi.transpose();

    DiscretizedOperator rho = family.materialize(v);
    DiscretizedOperator stationary(grid, c_kernel);
    DiscretizedOperator delta = compose(rho, stationary);
    return {std::move(rho), mean_fn(v), std::move(stationary), DiscretizedOperator(grid, g_kernel), std::move(delta)};
}

}  // namespace carh
