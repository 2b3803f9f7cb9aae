#pragma once

/** @file
 * Spectral analysis of empirical covariance operators and the two
 * regularised estimators of the adjoint autoregression operator:
 *
 *  - projection: invert the covariance on the span of its leading k_n
 *    eigenfunctions, compose with the adjoint cross-covariance restricted
 *    to that span, and extend by zero on the orthogonal complement;
 *  - resolvent: apply b_{p,alpha}(x) = x^p / (x + alpha)^{p+1} to the
 *    covariance spectrally, then compose with the adjoint cross-covariance.
 *
 * The forecast applies the adjoint of the estimate to the last centred curve.
 */

#include "carh/function_space.hpp"
#include "carh/kernel_regression.hpp"
#include "carh/predictor_config.hpp"
#include "carh/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace carh {

/// Relative level below which covariance eigenvalues count as zero.
inline constexpr double kEigenRelativeThreshold = 1e-10;

/// Tolerance for kernel asymmetry and negative eigenvalues, relative to max(1, scale).
inline constexpr double kSymmetryTolerance = 1e-10;

/// Complete eigen-decomposition of a symmetric PSD operator, eigenvalues in
/// nonincreasing order. `vectors` holds Euclidean-unit eigenvectors of the
/// action matrix as columns.
struct Spectrum {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

struct EigenSystem {
    std::vector<double> eigenvalues;
    std::vector<Curve> eigenfunctions;
    /// 2 sqrt(2) / (smallest adjacent gap); empty where a gap is not positive.
    std::vector<std::optional<double>> gap_factors;
    /// Set when fewer than the requested pairs lie above the zero threshold.
    bool truncated = false;

    std::size_t size() const noexcept { return eigenvalues.size(); }
};

struct ProjectionConfig {
    std::size_t k_n = 1;
};

struct ResolventConfig {
    unsigned p = 0;
    double alpha = 1e-2;
};

inline DiscretizedOperator adjoint(const DiscretizedOperator& a) {
    return DiscretizedOperator(a.grid(), a.kernel().transpose());
}

inline Curve align_sign(const Curve& estimate, const Curve& reference) {
    return inner_product(estimate, reference) >= 0.0 ? estimate : -estimate;
}

/// Symmetric eigen-decomposition with PSD repair: eigenvalues in
/// [-tol, 0) are clamped to zero, more negative ones are an error.
inline Spectrum full_spectrum(const DiscretizedOperator& gamma) {
    const Eigen::MatrixXd& k = gamma.kernel();
    const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
    const double asym = (k - k.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTolerance * scale) {
        std::ostringstream os;
        os << "eigendecompose: kernel is not symmetric (max asymmetry " << asym << ")";
        throw NumericalError(os.str());
    }
    const Eigen::MatrixXd action = 0.5 * (k + k.transpose()) * gamma.grid()->weight();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(action);
    if (solver.info() != Eigen::Success) throw NumericalError("eigendecompose: eigensolver did not converge");

    const Eigen::Index m = action.rows();
    Spectrum s;
    s.values = solver.eigenvalues().reverse();
    s.vectors = solver.eigenvectors().rowwise().reverse();
    const double top = std::max(1.0, std::abs(s.values[0]));
    for (Eigen::Index j = 0; j < m; ++j) {
        if (s.values[j] < 0.0) {
            if (s.values[j] < -kSymmetryTolerance * top) {
                std::ostringstream os;
                os << "eigendecompose: operator is not positive semi-definite (eigenvalue " << s.values[j] << ")";
                throw NumericalError(os.str());
            }
            s.values[j] = 0.0;
        }
    }
    return s;
}

namespace detail {

inline Curve eigenfunction(const GridPtr& grid, const Eigen::VectorXd& unit_vector) {
    Eigen::VectorXd e = unit_vector * std::sqrt(static_cast<double>(grid->size()));
    Eigen::Index imax = 0;
    e.cwiseAbs().maxCoeff(&imax);
    if (e[imax] < 0.0) e = -e;
    return Curve(grid, std::move(e));
}

inline std::size_t positive_count(const Eigen::VectorXd& values) {
    if (values.size() == 0 || !(values[0] > 0.0)) return 0;
    const double threshold = kEigenRelativeThreshold * values[0];
    std::size_t count = 0;
    while (count < static_cast<std::size_t>(values.size()) && values[static_cast<Eigen::Index>(count)] > threshold) {
        ++count;
    }
    return count;
}

}  // namespace detail

/// Leading k eigenpairs, eigenfunctions of unit H-norm with their
/// largest-magnitude entry positive.
inline EigenSystem eigendecompose(const DiscretizedOperator& gamma, std::size_t k) {
    if (k == 0) throw std::invalid_argument("eigendecompose: k must be positive");
    const Spectrum s = full_spectrum(gamma);
    const std::size_t available = detail::positive_count(s.values);
    const std::size_t count = std::min(k, available);
    const auto lambda = [&](std::size_t j) {
        return j < static_cast<std::size_t>(s.values.size()) ? s.values[static_cast<Eigen::Index>(j)] : 0.0;
    };

    EigenSystem es;
    es.truncated = count < k;
    for (std::size_t j = 0; j < count; ++j) {
        es.eigenvalues.push_back(lambda(j));
        es.eigenfunctions.push_back(detail::eigenfunction(gamma.grid(), s.vectors.col(static_cast<Eigen::Index>(j))));
        double gap = lambda(j) - lambda(j + 1);
        if (j > 0) gap = std::min(gap, lambda(j - 1) - lambda(j));
        // Gaps at roundoff level count as ties.
        const bool separated = gap > kEigenRelativeThreshold * lambda(0);
        es.gap_factors.push_back(separated ? std::optional<double>(2.0 * std::numbers::sqrt2 / gap) : std::nullopt);
    }
    return es;
}

/// Adjoint autoregression estimate restricted to the leading k_n empirical
/// eigenfunctions. A zero covariance yields the zero operator.
inline DiscretizedOperator projection_estimator(const DiscretizedOperator& gamma, const DiscretizedOperator& delta,
                                                const ProjectionConfig& cfg) {
    require_same_grid(gamma.grid(), delta.grid(), "projection_estimator");
    if (cfg.k_n == 0) throw std::invalid_argument("projection_estimator: k_n must be positive");
    const Spectrum s = full_spectrum(gamma);
    const auto m = static_cast<std::size_t>(s.values.size());
    if (!(s.values[0] > 0.0)) return DiscretizedOperator::zero(gamma.grid());
    if (cfg.k_n > m) {
        throw NumericalError("projection estimator: k_n = " + std::to_string(cfg.k_n) + " exceeds grid size " +
                             std::to_string(m));
    }
    const auto k = static_cast<Eigen::Index>(cfg.k_n);
    const double threshold = kEigenRelativeThreshold * s.values[0];
    if (!(s.values[k - 1] >= threshold)) {
        std::ostringstream os;
        os << "projection estimator: eigenvalue lambda_" << cfg.k_n << " = " << s.values[k - 1]
           << " is below the invertibility threshold " << threshold;
        throw NumericalError(os.str());
    }
    const Eigen::MatrixXd basis = s.vectors.leftCols(k);
    const Eigen::MatrixXd inverse =
        basis * s.values.head(k).cwiseInverse().asDiagonal() * basis.transpose();
    const Eigen::MatrixXd projector = basis * basis.transpose();
    const Eigen::MatrixXd delta_adjoint_action = delta.action().transpose();
    return DiscretizedOperator::from_action(gamma.grid(), inverse * delta_adjoint_action * projector);
}

/// b_{p,alpha}(x) = x^p / (x + alpha)^{p+1}.
inline double resolvent_factor(double x, unsigned p, double alpha) {
    return std::pow(x, static_cast<double>(p)) / std::pow(x + alpha, static_cast<double>(p) + 1.0);
}

inline DiscretizedOperator resolvent_estimator(const DiscretizedOperator& gamma, const DiscretizedOperator& delta,
                                               const ResolventConfig& cfg) {
    require_same_grid(gamma.grid(), delta.grid(), "resolvent_estimator");
    if (!(cfg.alpha > 0.0)) {
        throw std::invalid_argument("resolvent estimator: alpha must be positive, got " + std::to_string(cfg.alpha));
    }
    const Spectrum s = full_spectrum(gamma);
    Eigen::VectorXd factors(s.values.size());
    for (Eigen::Index j = 0; j < factors.size(); ++j) factors[j] = resolvent_factor(s.values[j], cfg.p, cfg.alpha);
    const Eigen::MatrixXd regularised = s.vectors * factors.asDiagonal() * s.vectors.transpose();
    return DiscretizedOperator::from_action(gamma.grid(), regularised * delta.action().transpose());
}

/// Local conditional moments at one covariate value plus the resulting
/// estimate of the adjoint autoregression operator.
struct LocalFit {
    Curve mean;
    DiscretizedOperator gamma;
    DiscretizedOperator delta;
    DiscretizedOperator rho_adjoint;
};

inline LocalFit fit_at(const SeriesView& series, const CovariateVector& v, const PredictorConfig& config) {
    config.validate();
    if (series.size() < 2) throw std::invalid_argument("fit_at: need at least 2 observations");
    const std::size_t n = series.size();
    const bool conditional = is_conditional(config.estimator);

    const WeightVector wa = conditional ? kernel_weights(series.covariates, v, config.h_a, config.kernel)
                                        : uniform_weights(n);
    Curve mean = weighted_mean(series, wa);
    const WeightVector wg = conditional ? kernel_weights(series.covariates, v, config.h_gamma, config.kernel)
                                        : uniform_weights(n);
    DiscretizedOperator gamma = weighted_covariance(series, wg, mean);
    const WeightVector wd = conditional
                                ? kernel_weights(series.covariates.subspan(1), v, config.h_delta, config.kernel)
                                : uniform_weights(n - 1);
    DiscretizedOperator delta = weighted_cross_covariance(series, wd, mean);

    try {
        DiscretizedOperator rho = config.estimator == EstimatorClass::carh_resolvent
                                      ? resolvent_estimator(gamma, delta, {config.p, config.alpha})
                                      : projection_estimator(gamma, delta, {config.k_n});
        return {std::move(mean), std::move(gamma), std::move(delta), std::move(rho)};
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(to_string(config.estimator)) + ": " + e.what());
    }
}

/// One-step-ahead forecast a + rho(Z_n - a), with a, rho estimated at v_next.
inline Curve predict_next(const SeriesView& series, const CovariateVector& v_next, const PredictorConfig& config) {
    const LocalFit fit = fit_at(series, v_next, config);
    const Curve residual = series.curves.back() - fit.mean;
    return fit.mean + operator_apply(adjoint(fit.rho_adjoint), residual);
}

}  // namespace carh
