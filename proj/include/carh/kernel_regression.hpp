#pragma once

/** @file
 * Nadaraya-Watson localisation in covariate space: multivariate kernels,
 * normalised weights, and the conditional mean, covariance and
 * cross-covariance estimators built from them.
 */

#include "carh/function_space.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace carh {

class CovariateVector {
public:
    CovariateVector() = default;
    explicit CovariateVector(Eigen::VectorXd values) : values_(std::move(values)) { validate(); }
    CovariateVector(std::initializer_list<double> values)
        : values_(Eigen::Map<const Eigen::VectorXd>(values.begin(), static_cast<Eigen::Index>(values.size()))) {
        validate();
    }
    static CovariateVector scalar(double v) { return CovariateVector{v}; }

    std::size_t dim() const noexcept { return static_cast<std::size_t>(values_.size()); }
    const Eigen::VectorXd& values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

private:
    void validate() const {
        if (values_.size() == 0) throw std::invalid_argument("CovariateVector: empty");
        if (!values_.allFinite()) throw std::invalid_argument("CovariateVector: non-finite entry");
    }
    Eigen::VectorXd values_;
};

/// Non-owning view of observations (Z_1, V_1), ..., (Z_n, V_n).
struct SeriesView {
    GridPtr grid;
    std::span<const Curve> curves;
    std::span<const CovariateVector> covariates;

    std::size_t size() const noexcept { return curves.size(); }
    SeriesView head(std::size_t k) const { return {grid, curves.first(k), covariates.first(k)}; }
    SeriesView slice(std::size_t first, std::size_t count) const {
        return {grid, curves.subspan(first, count), covariates.subspan(first, count)};
    }
};

class CurveSeries {
public:
    CurveSeries(GridPtr grid, std::vector<Curve> curves, std::vector<CovariateVector> covariates)
        : grid_(std::move(grid)), curves_(std::move(curves)), covariates_(std::move(covariates)) {
        if (!grid_) throw std::invalid_argument("CurveSeries: null grid");
        if (curves_.size() != covariates_.size()) {
            throw std::invalid_argument("CurveSeries: " + std::to_string(curves_.size()) + " curves but " +
                                        std::to_string(covariates_.size()) + " covariates");
        }
        if (curves_.empty()) throw std::invalid_argument("CurveSeries: empty");
        const std::size_t d = covariates_.front().dim();
        for (std::size_t i = 0; i < curves_.size(); ++i) {
            require_same_grid(grid_, curves_[i].grid(), "CurveSeries");
            if (covariates_[i].dim() != d) {
                throw std::invalid_argument("CurveSeries: covariate " + std::to_string(i + 1) + " has dimension " +
                                            std::to_string(covariates_[i].dim()) + ", expected " +
                                            std::to_string(d));
            }
        }
    }

    const GridPtr& grid() const noexcept { return grid_; }
    const std::vector<Curve>& curves() const noexcept { return curves_; }
    const std::vector<CovariateVector>& covariates() const noexcept { return covariates_; }
    std::size_t size() const noexcept { return curves_.size(); }
    std::size_t covariate_dim() const noexcept { return covariates_.front().dim(); }

    SeriesView view() const { return {grid_, curves_, covariates_}; }
    operator SeriesView() const { return view(); }

private:
    GridPtr grid_;
    std::vector<Curve> curves_;
    std::vector<CovariateVector> covariates_;
};

enum class KernelFamily { gaussian, epanechnikov_product };

struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian;
    std::size_t dim = 1;
};

inline const char* to_string(KernelFamily f) {
    return f == KernelFamily::gaussian ? "gaussian" : "epanechnikov";
}

struct WeightVector {
    Eigen::VectorXd weights;
    bool fallback_used = false;

    std::size_t size() const noexcept { return static_cast<std::size_t>(weights.size()); }
    double operator[](std::size_t i) const { return weights[static_cast<Eigen::Index>(i)]; }
};

namespace detail {

inline void require_dim(const KernelSpec& spec, std::size_t d, const char* where) {
    if (spec.dim != d) {
        throw std::invalid_argument(std::string(where) + ": covariate dimension " + std::to_string(d) +
                                    " does not match kernel dimension " + std::to_string(spec.dim));
    }
}

inline void require_bandwidth(double h, const char* where) {
    if (!(h > 0.0) || !std::isfinite(h)) {
        throw std::invalid_argument(std::string(where) + ": bandwidth must be positive, got " + std::to_string(h));
    }
}

inline double log_gaussian(const Eigen::VectorXd& u) {
    const double d = static_cast<double>(u.size());
    return -0.5 * u.squaredNorm() - 0.5 * d * std::log(2.0 * std::numbers::pi);
}

inline double epanechnikov(const Eigen::VectorXd& u) {
    double k = 1.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double a = u[i] * u[i];
        if (a >= 1.0) return 0.0;
        k *= 0.75 * (1.0 - a);
    }
    return k;
}

}  // namespace detail

/// K(u). Gaussian: (2 pi)^{-d/2} exp(-|u|^2 / 2). Epanechnikov: prod 3/4 (1 - u_i^2)_+.
inline double kernel_eval(const KernelSpec& spec, const CovariateVector& u) {
    detail::require_dim(spec, u.dim(), "kernel_eval");
    if (spec.family == KernelFamily::gaussian) return std::exp(detail::log_gaussian(u.values()));
    return detail::epanechnikov(u.values());
}

inline WeightVector uniform_weights(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_weights: empty");
    return {Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)), false};
}

/// Normalised kernel weights w_i = K((V_i - v)/h) / sum_l K((V_l - v)/h).
///
/// Gaussian weights are formed from log-kernel values shifted by their
/// maximum, which leaves the ratios unchanged and keeps them defined when
/// every raw kernel value underflows. A vanishing denominator (only possible
/// with the compactly supported kernel) yields uniform weights and sets
/// fallback_used.
inline WeightVector kernel_weights(std::span<const CovariateVector> covariates, const CovariateVector& v, double h,
                                   const KernelSpec& spec) {
    detail::require_bandwidth(h, "kernel_weights");
    if (covariates.empty()) throw std::invalid_argument("kernel_weights: no observations");
    detail::require_dim(spec, v.dim(), "kernel_weights");

    const auto n = static_cast<Eigen::Index>(covariates.size());
    Eigen::VectorXd w(n);
    if (spec.family == KernelFamily::gaussian) {
        double max_log = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& vi = covariates[static_cast<std::size_t>(i)];
            detail::require_dim(spec, vi.dim(), "kernel_weights");
            w[i] = -0.5 * ((vi.values() - v.values()) / h).squaredNorm();
            max_log = std::max(max_log, w[i]);
        }
        for (Eigen::Index i = 0; i < n; ++i) w[i] = std::exp(w[i] - max_log);
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& vi = covariates[static_cast<std::size_t>(i)];
            detail::require_dim(spec, vi.dim(), "kernel_weights");
            w[i] = detail::epanechnikov((vi.values() - v.values()) / h);
        }
    }
    const double total = w.sum();
    if (!(total > 0.0)) return {Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)), true};
    return {w / total, false};
}

/// f_n(v) = (1 / (n h^d)) sum_i K((V_i - v)/h).
inline double estimate_density(std::span<const CovariateVector> covariates, const CovariateVector& v, double h,
                               const KernelSpec& spec) {
    detail::require_bandwidth(h, "estimate_density");
    if (covariates.empty()) throw std::invalid_argument("estimate_density: no observations");
    detail::require_dim(spec, v.dim(), "estimate_density");
    double sum = 0.0;
    for (const auto& vi : covariates) {
        detail::require_dim(spec, vi.dim(), "estimate_density");
        const Eigen::VectorXd u = (vi.values() - v.values()) / h;
        sum += spec.family == KernelFamily::gaussian ? std::exp(detail::log_gaussian(u)) : detail::epanechnikov(u);
    }
    const double n = static_cast<double>(covariates.size());
    return sum / (n * std::pow(h, static_cast<double>(spec.dim)));
}

/// Pointwise weighted mean of the curves. Accumulated as offsets from the
/// first curve so that a constant series is reproduced exactly.
inline Curve weighted_mean(const SeriesView& series, const WeightVector& w) {
    if (series.size() == 0) throw std::invalid_argument("weighted_mean: empty series");
    if (w.size() != series.size()) throw std::invalid_argument("weighted_mean: weight count mismatch");
    const Eigen::VectorXd& ref = series.curves.front().values();
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(series.grid->isize());
    for (std::size_t i = 1; i < series.size(); ++i) {
        require_same_grid(series.grid, series.curves[i].grid(), "weighted_mean");
        if (w[i] != 0.0) acc += w[i] * (series.curves[i].values() - ref);
    }
    return Curve(series.grid, ref + acc);
}

namespace detail {

// Rows are (Z_i - mean), i in [first, first + count).
inline Eigen::MatrixXd centered_rows(const SeriesView& series, std::size_t first, std::size_t count,
                                     const Curve& mean) {
    require_same_grid(series.grid, mean.grid(), "centered_rows");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(count), series.grid->isize());
    for (std::size_t i = 0; i < count; ++i) {
        x.row(static_cast<Eigen::Index>(i)) = (series.curves[first + i].values() - mean.values()).transpose();
    }
    return x;
}

}  // namespace detail

/// sum_i w_i (Z_i - mean) (x) (Z_i - mean). The kernel is exactly symmetric.
inline DiscretizedOperator weighted_covariance(const SeriesView& series, const WeightVector& w, const Curve& mean) {
    if (w.size() != series.size()) throw std::invalid_argument("weighted_covariance: weight count mismatch");
    Eigen::MatrixXd x = detail::centered_rows(series, 0, series.size(), mean);
    x.array().colwise() *= w.weights.array().sqrt();
    const Eigen::Index m = series.grid->isize();
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);
    k.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    Eigen::MatrixXd full = k.selfadjointView<Eigen::Lower>();
    return DiscretizedOperator(series.grid, std::move(full));
}

/// sum_{i=2..n} w_i (Z_{i-1} - mean) (x) (Z_i - mean); `w` holds the n-1
/// weights attached to observations 2..n.
inline DiscretizedOperator weighted_cross_covariance(const SeriesView& series, const WeightVector& w,
                                                     const Curve& mean) {
    if (series.size() < 2) throw std::invalid_argument("weighted_cross_covariance: need at least 2 observations");
    if (w.size() != series.size() - 1) {
        throw std::invalid_argument("weighted_cross_covariance: expected n-1 weights");
    }
    const std::size_t n = series.size();
    Eigen::MatrixXd lag = detail::centered_rows(series, 0, n - 1, mean);
    const Eigen::MatrixXd lead = detail::centered_rows(series, 1, n - 1, mean);
    lag.array().colwise() *= w.weights.array();
    return DiscretizedOperator(series.grid, lag.transpose() * lead);
}

inline Curve estimate_cond_mean(const SeriesView& series, const CovariateVector& v, double h_a,
                                const KernelSpec& spec) {
    return weighted_mean(series, kernel_weights(series.covariates, v, h_a, spec));
}

inline DiscretizedOperator estimate_cond_cov(const SeriesView& series, const CovariateVector& v, double h_gamma,
                                             const KernelSpec& spec, const Curve& mean) {
    return weighted_covariance(series, kernel_weights(series.covariates, v, h_gamma, spec), mean);
}

/// Weights are computed over V_2..V_n and renormalised among themselves.
inline DiscretizedOperator estimate_cond_crosscov(const SeriesView& series, const CovariateVector& v,
                                                  double h_delta, const KernelSpec& spec, const Curve& mean) {
    if (series.size() < 2) throw std::invalid_argument("estimate_cond_crosscov: need at least 2 observations");
    return weighted_cross_covariance(series, kernel_weights(series.covariates.subspan(1), v, h_delta, spec), mean);
}

}  // namespace carh
