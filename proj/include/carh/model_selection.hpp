#pragma once

/** @file
 * Chronological calibration/test splits, rolling-origin RMSE and an
 * exhaustive grid search over projection dimension, resolvent parameters
 * and bandwidths.
 */

#include "carh/function_space.hpp"
#include "carh/kernel_regression.hpp"
#include "carh/operator_algebra.hpp"
#include "carh/predictor_config.hpp"
#include "carh/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace carh {

struct SeriesSplit {
    CurveSeries calibration;
    CurveSeries test;
};

inline std::size_t calibration_size(std::size_t n, double calib_fraction) {
    if (!(calib_fraction > 0.0 && calib_fraction < 1.0)) {
        throw std::invalid_argument("split_series: calibration fraction must lie in (0, 1)");
    }
    const auto n_cal = static_cast<std::size_t>(std::lround(calib_fraction * static_cast<double>(n)));
    if (n_cal < 2) throw std::invalid_argument("split_series: calibration part needs at least 2 observations");
    if (n_cal >= n) throw std::invalid_argument("split_series: test part would be empty");
    return n_cal;
}

inline CurveSeries copy_range(const SeriesView& s, std::size_t first, std::size_t count) {
    const SeriesView part = s.slice(first, count);
    return CurveSeries(s.grid, {part.curves.begin(), part.curves.end()},
                       {part.covariates.begin(), part.covariates.end()});
}

/// Chronological prefix/suffix split; the calibration size is the rounded
/// fraction of n.
inline SeriesSplit split_series(const SeriesView& series, double calib_fraction) {
    const std::size_t n_cal = calibration_size(series.size(), calib_fraction);
    return {copy_range(series, 0, n_cal), copy_range(series, n_cal, series.size() - n_cal)};
}

/// Forecast origins, given as history lengths: origin k fits on Z_1..Z_k and
/// forecasts Z_{k+1}. Both ends inclusive.
struct OriginRange {
    std::size_t first = 2;
    std::size_t last = 2;

    std::size_t count() const noexcept { return last >= first ? last - first + 1 : 0; }
};

inline void require_origins(const SeriesView& series, const OriginRange& range) {
    if (range.first < 2) throw std::invalid_argument("rolling forecast: each origin needs 2 observations of history");
    if (range.last < range.first) throw std::invalid_argument("rolling forecast: empty origin range");
    if (range.last + 1 > series.size()) {
        throw std::invalid_argument("rolling forecast: last origin " + std::to_string(range.last) +
                                    " has no observation to forecast");
    }
}

struct RollingResult {
    double rmse = 0.0;
    std::vector<double> step_errors;  ///< H-norm error per origin
    std::vector<Curve> predictions;
};

using Forecaster = std::function<Curve(const SeriesView& history, const CovariateVector& v_next)>;

inline RollingResult rolling_forecast(const SeriesView& series, const OriginRange& range, const Forecaster& fc) {
    require_origins(series, range);
    RollingResult out;
    double sse = 0.0;
    for (std::size_t k = range.first; k <= range.last; ++k) {
        Curve pred = fc(series.head(k), series.covariates[k]);
        const Curve err = series.curves[k] - pred;
        sse += err.values().squaredNorm();
        out.step_errors.push_back(h_norm(err));
        out.predictions.push_back(std::move(pred));
    }
    out.rmse = std::sqrt(sse / (static_cast<double>(range.count()) * static_cast<double>(series.grid->size())));
    return out;
}

inline RollingResult rolling_forecast(const SeriesView& series, const OriginRange& range,
                                      const PredictorConfig& config) {
    return rolling_forecast(series, range, [&](const SeriesView& h, const CovariateVector& v) {
        return predict_next(h, v, config);
    });
}

inline double rolling_forecast_rmse(const SeriesView& series, const OriginRange& range,
                                    const PredictorConfig& config) {
    return rolling_forecast(series, range, config).rmse;
}

/// Naive forecast Z_{k+1} = Z_k.
inline RollingResult persistence_forecast(const SeriesView& series, const OriginRange& range) {
    return rolling_forecast(series, range,
                            [](const SeriesView& h, const CovariateVector&) { return h.curves.back(); });
}

/// Candidate values; empty lists are not allowed for the dimensions used by
/// the chosen class.
struct SearchGrid {
    std::vector<std::size_t> k_values;
    std::vector<unsigned> p_values;
    std::vector<double> alpha_values;
    std::vector<double> h_a;
    std::vector<double> h_gamma;
    std::vector<double> h_delta;
    KernelSpec kernel{};
};

struct ConfigResult {
    PredictorConfig config;
    bool failed = false;
    std::string failure;
    double calibration_rmse = 0.0;
};

struct EvaluationReport {
    EstimatorClass estimator = EstimatorClass::carh_projection;
    std::vector<ConfigResult> results;
    std::size_t chosen = 0;
    PredictorConfig chosen_config;
    double estimation_error = 0.0;                ///< calibration-window RMSE at the chosen config
    std::optional<double> prediction_error;       ///< test-window RMSE, when evaluated
    std::vector<double> calibration_step_errors;  ///< H-norm errors of the chosen config
    std::vector<double> test_step_errors;
    std::vector<Curve> test_predictions;
};

namespace detail {

inline std::vector<PredictorConfig> expand_grid(const SearchGrid& grid, EstimatorClass estimator) {
    const auto require = [](bool nonempty, const char* what) {
        if (!nonempty) throw std::invalid_argument(std::string("grid_search: empty candidate list for ") + what);
    };
    std::vector<PredictorConfig> out;
    PredictorConfig base;
    base.estimator = estimator;
    base.kernel = grid.kernel;
    if (estimator == EstimatorClass::arh_projection) {
        require(!grid.k_values.empty(), "k_n");
        for (std::size_t k : grid.k_values) {
            PredictorConfig c = base;
            c.k_n = k;
            out.push_back(c);
        }
        return out;
    }
    require(!grid.h_a.empty(), "h_a");
    require(!grid.h_gamma.empty(), "h_gamma");
    require(!grid.h_delta.empty(), "h_delta");
    if (estimator == EstimatorClass::carh_projection) {
        require(!grid.k_values.empty(), "k_n");
    } else {
        require(!grid.p_values.empty(), "p");
        require(!grid.alpha_values.empty(), "alpha");
    }
    for (double ha : grid.h_a) {
        for (double hg : grid.h_gamma) {
            for (double hd : grid.h_delta) {
                PredictorConfig c = base;
                c.h_a = ha;
                c.h_gamma = hg;
                c.h_delta = hd;
                if (estimator == EstimatorClass::carh_projection) {
                    for (std::size_t k : grid.k_values) {
                        c.k_n = k;
                        out.push_back(c);
                    }
                } else {
                    for (unsigned p : grid.p_values) {
                        for (double a : grid.alpha_values) {
                            c.p = p;
                            c.alpha = a;
                            out.push_back(c);
                        }
                    }
                }
            }
        }
    }
    return out;
}

// Ordering used to pick the winner: RMSE, then k_n (or p), then the
// bandwidth product, then alpha, then grid position.
inline bool better(const ConfigResult& a, std::size_t ia, const ConfigResult& b, std::size_t ib) {
    const auto key = [](const ConfigResult& r, std::size_t i) {
        const double complexity =
            is_projection(r.config.estimator) ? static_cast<double>(r.config.k_n) : static_cast<double>(r.config.p);
        return std::make_tuple(r.calibration_rmse, complexity, r.config.bandwidth_product(), r.config.alpha, i);
    };
    return key(a, ia) < key(b, ib);
}

/// Shares means, covariance spectra and cross-covariances across all
/// configurations at one forecast origin.
class OriginCache {
public:
    OriginCache(const SeriesView& history, const CovariateVector& v, const Curve& target)
        : history_(history), v_(v), target_(target) {}

    const Curve& mean(const PredictorConfig& c) {
        const auto key = mean_key(c);
        auto it = means_.find(key);
        if (it == means_.end()) {
            const WeightVector w = is_conditional(c.estimator)
                                       ? kernel_weights(history_.covariates, v_, c.h_a, c.kernel)
                                       : uniform_weights(history_.size());
            it = means_.emplace(key, weighted_mean(history_, w)).first;
        }
        return it->second;
    }

    const Spectrum& spectrum(const PredictorConfig& c) {
        const auto key = std::make_pair(mean_key(c), is_conditional(c.estimator) ? c.h_gamma : -1.0);
        auto it = spectra_.find(key);
        if (it == spectra_.end()) {
            const WeightVector w = is_conditional(c.estimator)
                                       ? kernel_weights(history_.covariates, v_, c.h_gamma, c.kernel)
                                       : uniform_weights(history_.size());
            it = spectra_.emplace(key, full_spectrum(weighted_covariance(history_, w, mean(c)))).first;
        }
        return it->second;
    }

    const Eigen::MatrixXd& delta_action(const PredictorConfig& c) {
        const auto key = std::make_pair(mean_key(c), is_conditional(c.estimator) ? c.h_delta : -1.0);
        auto it = deltas_.find(key);
        if (it == deltas_.end()) {
            const WeightVector w = is_conditional(c.estimator)
                                       ? kernel_weights(history_.covariates.subspan(1), v_, c.h_delta, c.kernel)
                                       : uniform_weights(history_.size() - 1);
            it = deltas_.emplace(key, weighted_cross_covariance(history_, w, mean(c)).action()).first;
        }
        return it->second;
    }

    /// Squared grid-point error of the forecast under config c; throws
    /// NumericalError when the estimator is undefined.
    double squared_error(const PredictorConfig& c) {
        const Curve& a = mean(c);
        const Spectrum& s = spectrum(c);
        const Eigen::MatrixXd& d = delta_action(c);
        const Eigen::VectorXd r = history_.curves.back().values() - a.values();
        const Eigen::VectorXd coords = s.vectors.transpose() * r;
        Eigen::VectorXd step = Eigen::VectorXd::Zero(r.size());

        if (c.estimator == EstimatorClass::carh_resolvent) {
            Eigen::VectorXd scaled(coords.size());
            for (Eigen::Index j = 0; j < coords.size(); ++j) {
                scaled[j] = coords[j] * resolvent_factor(s.values[j], c.p, c.alpha);
            }
            step = d * (s.vectors * scaled);
        } else if (s.values[0] > 0.0) {
            const auto k = static_cast<Eigen::Index>(c.k_n);
            if (k > s.values.size()) throw NumericalError("k_n exceeds grid size");
            const double threshold = kEigenRelativeThreshold * s.values[0];
            if (!(s.values[k - 1] >= threshold)) {
                throw NumericalError("eigenvalue lambda_" + std::to_string(c.k_n) + " below threshold");
            }
            const Eigen::MatrixXd basis = s.vectors.leftCols(k);
            const Eigen::VectorXd inv = basis * coords.head(k).cwiseQuotient(s.values.head(k));
            step = basis * (basis.transpose() * (d * inv));
        }
        return (target_.values() - a.values() - step).squaredNorm();
    }

private:
    std::pair<int, double> mean_key(const PredictorConfig& c) const {
        return is_conditional(c.estimator) ? std::make_pair(1, c.h_a) : std::make_pair(0, 0.0);
    }

    SeriesView history_;
    CovariateVector v_;
    Curve target_;
    std::map<std::pair<int, double>, Curve> means_;
    std::map<std::pair<std::pair<int, double>, double>, Spectrum> spectra_;
    std::map<std::pair<std::pair<int, double>, double>, Eigen::MatrixXd> deltas_;
};

}  // namespace detail

/// Default calibration window: origins from half the calibration length up
/// to its end.
inline OriginRange default_calibration_window(std::size_t n_cal) {
    if (n_cal < 3) throw std::invalid_argument("calibration window: need at least 3 observations");
    return {std::max<std::size_t>(2, (n_cal + 1) / 2), n_cal - 1};
}

/// Exhaustive rolling-origin evaluation of every configuration in the grid.
/// Configurations that fail at any origin are recorded, not fatal, unless
/// every one fails.
inline EvaluationReport grid_search(const SeriesView& calibration, const SearchGrid& grid, EstimatorClass estimator,
                                    std::optional<OriginRange> window = std::nullopt) {
    const OriginRange range = window.value_or(default_calibration_window(calibration.size()));
    require_origins(calibration, range);
    const std::vector<PredictorConfig> configs = detail::expand_grid(grid, estimator);

    EvaluationReport report;
    report.estimator = estimator;
    report.results.resize(configs.size());
    std::vector<double> sse(configs.size(), 0.0);
    for (std::size_t i = 0; i < configs.size(); ++i) {
        report.results[i].config = configs[i];
        try {
            configs[i].validate();
        } catch (const std::invalid_argument& e) {
            report.results[i].failed = true;
            report.results[i].failure = e.what();
        }
    }

    for (std::size_t k = range.first; k <= range.last; ++k) {
        detail::OriginCache cache(calibration.head(k), calibration.covariates[k], calibration.curves[k]);
        for (std::size_t i = 0; i < configs.size(); ++i) {
            ConfigResult& r = report.results[i];
            if (r.failed) continue;
            try {
                sse[i] += cache.squared_error(configs[i]);
            } catch (const NumericalError& e) {
                r.failed = true;
                r.failure = "origin " + std::to_string(k) + ": " + e.what();
            }
        }
    }

    const double denom = static_cast<double>(range.count()) * static_cast<double>(calibration.grid->size());
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        ConfigResult& r = report.results[i];
        if (r.failed) continue;
        r.calibration_rmse = std::sqrt(sse[i] / denom);
        if (!best || detail::better(r, i, report.results[*best], *best)) best = i;
    }
    if (!best) {
        throw NumericalError(std::string("grid_search: every ") + to_string(estimator) +
                             " configuration failed; first failure: " + report.results.front().failure);
    }
    report.chosen = *best;
    report.chosen_config = configs[*best];
    const RollingResult chosen = rolling_forecast(calibration, range, report.chosen_config);
    report.estimation_error = chosen.rmse;
    report.calibration_step_errors = chosen.step_errors;
    return report;
}

/// Log-spaced values lo * (hi/lo)^{i/(count-1)}.
inline std::vector<double> log_grid(double lo, double hi, std::size_t count) {
    if (count == 0 || !(lo > 0.0) || !(hi >= lo)) throw std::invalid_argument("log_grid: invalid range");
    std::vector<double> out;
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        out.push_back(lo * std::pow(hi / lo, t));
    }
    return out;
}

/// Bandwidth scale: mean per-coordinate covariate sd times n^{-1/(d+4)}.
inline double bandwidth_scale(const SeriesView& series) {
    const std::size_t n = series.size();
    const std::size_t d = series.covariates.front().dim();
    double sd_sum = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (const auto& v : series.covariates) mean += v[j];
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (const auto& v : series.covariates) ss += (v[j] - mean) * (v[j] - mean);
        sd_sum += std::sqrt(ss / static_cast<double>(std::max<std::size_t>(n - 1, 1)));
    }
    double sd = sd_sum / static_cast<double>(d);
    if (!(sd > 0.0)) sd = 1.0;
    return sd * std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(d) + 4.0));
}

/// Leading eigenvalue of the unweighted empirical covariance.
inline double covariance_scale(const SeriesView& series) {
    const WeightVector w = uniform_weights(series.size());
    const Spectrum s = full_spectrum(weighted_covariance(series, w, weighted_mean(series, w)));
    return s.values[0] > 0.0 ? s.values[0] : 1.0;
}

/// Default candidates: k_n in 1..8; ten log-spaced bandwidths over
/// [0.1, 10] x bandwidth_scale; alpha in 10^{-4..0} x covariance_scale; p in {0, 1}.
inline SearchGrid default_grid(const SeriesView& series, KernelSpec kernel = {}) {
    SearchGrid g;
    for (std::size_t k = 1; k <= 8; ++k) g.k_values.push_back(k);
    g.p_values = {0, 1};
    const double lambda = covariance_scale(series);
    for (double a : log_grid(1e-4, 1.0, 5)) g.alpha_values.push_back(a * lambda);
    const double h = bandwidth_scale(series);
    g.h_a = log_grid(0.1 * h, 10.0 * h, 10);
    g.h_gamma = g.h_a;
    g.h_delta = g.h_a;
    kernel.dim = series.covariates.front().dim();
    g.kernel = kernel;
    return g;
}

/// Grid search on the calibration prefix, then rolling forecasts over the
/// test suffix with the chosen configuration (history includes calibration).
inline EvaluationReport select_and_evaluate(const SeriesView& series, double calib_fraction, const SearchGrid& grid,
                                            EstimatorClass estimator) {
    const std::size_t n_cal = calibration_size(series.size(), calib_fraction);
    EvaluationReport report = grid_search(series.head(n_cal), grid, estimator);
    const RollingResult test = rolling_forecast(series, {n_cal, series.size() - 1}, report.chosen_config);
    report.prediction_error = test.rmse;
    report.test_step_errors = test.step_errors;
    report.test_predictions = test.predictions;
    return report;
}

}  // namespace carh
