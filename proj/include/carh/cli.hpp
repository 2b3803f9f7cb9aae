#pragma once

/** @file
 * Subcommands of the `carh` tool: simulate, fit, predict, evaluate, select.
 *
 * Settings come from an optional `key = value` file (--config) overridden by
 * command-line flags. Output files go to --out, else $CARH_OUTPUT_DIR, else
 * the working directory. Exit status: 0 success, 2 usage, 3 data, 4 numerical.
 */

#include "carh/errors.hpp"
#include "carh/function_space.hpp"
#include "carh/io.hpp"
#include "carh/kernel_regression.hpp"
#include "carh/model_selection.hpp"
#include "carh/operator_algebra.hpp"
#include "carh/predictor_config.hpp"
#include "carh/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace carh::cli {

enum ExitCode : int { kSuccess = 0, kUsageError = 2, kDataError = 3, kNumericalError = 4 };

class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr const char* kOutputDirEnv = "CARH_OUTPUT_DIR";

// ------------------------------------------------------------ value parsing

inline double setting_real(const io::ConfigMap& s, const std::string& key, double fallback) {
    const auto it = s.find(key);
    if (it == s.end()) return fallback;
    const auto v = io::parse_double(it->second);
    if (!v) throw UsageError("setting '" + key + "': '" + it->second + "' is not a number");
    return *v;
}

inline long long setting_int(const io::ConfigMap& s, const std::string& key, long long fallback) {
    const auto it = s.find(key);
    if (it == s.end()) return fallback;
    const auto v = io::parse_int(it->second);
    if (!v) throw UsageError("setting '" + key + "': '" + it->second + "' is not an integer");
    return *v;
}

inline std::string setting_str(const io::ConfigMap& s, const std::string& key, const std::string& fallback = "") {
    const auto it = s.find(key);
    return it == s.end() ? fallback : it->second;
}

/// "a,b,c" or "log:lo:hi:count".
inline std::vector<double> parse_real_list(const std::string& text, const std::string& key) {
    const auto bad = [&] { return UsageError("setting '" + key + "': cannot parse list '" + text + "'"); };
    if (text.rfind("log:", 0) == 0) {
        const auto parts = io::split(std::string_view(text).substr(4), ':');
        if (parts.size() != 3) throw bad();
        const auto lo = io::parse_double(parts[0]), hi = io::parse_double(parts[1]);
        const auto count = io::parse_int(parts[2]);
        if (!lo || !hi || !count || *count < 1 || !(*lo > 0.0) || *hi < *lo) throw bad();
        return log_grid(*lo, *hi, static_cast<std::size_t>(*count));
    }
    std::vector<double> out;
    for (auto item : io::split(text)) {
        const auto v = io::parse_double(item);
        if (!v) throw bad();
        out.push_back(*v);
    }
    return out;
}

/// "a,b,c" or "lo:hi" (inclusive).
inline std::vector<long long> parse_int_list(const std::string& text, const std::string& key) {
    const auto bad = [&] { return UsageError("setting '" + key + "': cannot parse list '" + text + "'"); };
    std::vector<long long> out;
    const auto colon = text.find(':');
    if (colon != std::string::npos) {
        const auto lo = io::parse_int(std::string_view(text).substr(0, colon));
        const auto hi = io::parse_int(std::string_view(text).substr(colon + 1));
        if (!lo || !hi || *hi < *lo) throw bad();
        for (long long k = *lo; k <= *hi; ++k) out.push_back(k);
        return out;
    }
    for (auto item : io::split(text)) {
        const auto v = io::parse_int(item);
        if (!v) throw bad();
        out.push_back(*v);
    }
    return out;
}

inline KernelSpec parse_kernel(const io::ConfigMap& s, std::size_t dim) {
    const std::string k = setting_str(s, "kernel", "gaussian");
    if (k == "gaussian") return {KernelFamily::gaussian, dim};
    if (k == "epanechnikov") return {KernelFamily::epanechnikov_product, dim};
    throw UsageError("unknown kernel '" + k + "' (expected gaussian or epanechnikov)");
}

inline EstimatorClass parse_class(const std::string& name) {
    const auto c = parse_estimator_class(name);
    if (!c) throw UsageError("unknown class '" + name + "' (expected arh-projection, carh-projection or carh-resolvent)");
    return *c;
}

inline std::vector<EstimatorClass> parse_classes(const io::ConfigMap& s, const std::string& fallback) {
    std::vector<EstimatorClass> out;
    const std::string text = setting_str(s, "class", fallback);
    for (auto item : io::split(text)) out.push_back(parse_class(std::string(item)));
    return out;
}

inline std::filesystem::path output_dir(const io::ConfigMap& s) {
    std::string dir = setting_str(s, "out");
    if (dir.empty()) {
        if (const char* env = std::getenv(kOutputDirEnv)) dir = env;
    }
    if (dir.empty()) dir = ".";
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
    return dir;
}

// ------------------------------------------------------------ datasets

struct Dataset {
    CurveSeries series;
    std::vector<long long> index;
};

inline Dataset load_dataset(const io::ConfigMap& s) {
    io::CurveTable curves;
    if (const auto data = setting_str(s, "data"); !data.empty()) {
        curves = io::load_wide_csv(data);
    } else if (const auto longdata = setting_str(s, "long_data"); !longdata.empty()) {
        const long long per_day = setting_int(s, "per_day", 48);
        if (per_day < 2) throw UsageError("per_day must be at least 2");
        curves = io::segment_long_csv(longdata, static_cast<std::size_t>(per_day));
    } else {
        throw UsageError("no curve data given (--data or --long-data)");
    }
    if (const auto include = setting_str(s, "include"); !include.empty()) curves = io::filter_rows(curves, include);

    io::CovariateTable covs;
    if (const auto path = setting_str(s, "covariates"); !path.empty()) {
        covs = io::load_covariate_csv(path);
    } else if (const auto cv = setting_str(s, "cv_from"); !cv.empty()) {
        const long long per_day = setting_int(s, "cv_per_day", 24);
        if (per_day < 1) throw UsageError("cv_per_day must be positive");
        covs = io::daily_cv_covariates(cv, static_cast<std::size_t>(per_day));
    } else {
        throw UsageError("no covariates given (--covariates or --cv-from)");
    }
    CurveSeries series = io::join_series(curves, covs);
    return {std::move(series), curves.index};
}

inline std::vector<long long> test_index(const Dataset& d, std::size_t n_cal) {
    return {d.index.begin() + static_cast<std::ptrdiff_t>(n_cal), d.index.end()};
}

// ------------------------------------------------------------ simulate

struct Scenario {
    io::ConfigMap resolved;
    OperatorFamily family;
    MeanFn mean;
    NoiseSpec noise;
    CovariateProcess covariates;
    std::size_t n;
    std::size_t burn_in;
};

inline Scenario build_scenario(const io::ConfigMap& s) {
    io::ConfigMap r;
    const auto m = setting_int(s, "m", 48);
    const auto n = setting_int(s, "n", 200);
    const auto burn_in = setting_int(s, "burn_in", 200);
    const auto seed = setting_int(s, "seed", 1);
    if (m < 2 || n < 2 || burn_in < 1 || seed < 0) throw UsageError("simulate: need m >= 2, n >= 2, burn_in >= 1, seed >= 0");
    const std::vector<double> intercept = parse_real_list(setting_str(s, "coef_intercept", "0.3,0.2,0.1"), "coef_intercept");
    std::vector<double> slope = parse_real_list(setting_str(s, "coef_slope", "0.5,0,0"), "coef_slope");
    const std::vector<double> noise_sd = parse_real_list(setting_str(s, "noise_sd", "1,0.7,0.5"), "noise_sd");
    if (slope.size() != intercept.size()) throw UsageError("simulate: coef_slope and coef_intercept lengths differ");
    const double bound = setting_real(s, "bound", 0.95);
    const double level = setting_real(s, "mean_level", 0.0);
    const double amplitude = setting_real(s, "mean_amplitude", 0.0);
    const double mean_slope = setting_real(s, "mean_slope", 0.0);
    const std::string cov_kind = setting_str(s, "covariate", "uniform");
    const auto dim = setting_int(s, "covariate_dim", 1);
    if (dim < 1) throw UsageError("simulate: covariate_dim must be positive");

    CovariateProcess cp;
    cp.dim = static_cast<std::size_t>(dim);
    cp.seed = static_cast<std::uint64_t>(seed) + 1000003u;
    if (cov_kind == "uniform") {
        cp.kind = CovariateKind::iid_uniform;
    } else if (cov_kind == "ar1") {
        cp.kind = CovariateKind::ar1_gaussian;
        cp.phi = setting_real(s, "ar1_phi", 0.5);
        cp.sigma = setting_real(s, "ar1_sigma", 0.2);
        r["ar1_phi"] = io::format_number(cp.phi);
        r["ar1_sigma"] = io::format_number(cp.sigma);
    } else {
        throw UsageError("simulate: unknown covariate kind '" + cov_kind + "' (expected uniform or ar1)");
    }

    const GridPtr grid = make_grid(static_cast<std::size_t>(m));
    const std::vector<Curve> basis = fourier_basis(grid, std::max(intercept.size(), noise_sd.size()));
    std::vector<CoefficientFn> coefs;
    for (std::size_t j = 0; j < intercept.size(); ++j) {
        coefs.push_back([a = intercept[j], b = slope[j]](const CovariateVector& v) { return a + b * v[0]; });
    }
    OperatorFamily family({basis.begin(), basis.begin() + static_cast<std::ptrdiff_t>(intercept.size())}, coefs, bound);
    NoiseSpec noise{{basis.begin(), basis.begin() + static_cast<std::ptrdiff_t>(noise_sd.size())}, noise_sd,
                    static_cast<std::uint64_t>(seed)};
    const Curve sin_curve = Curve::sample(grid, [](double t) { return std::sin(2.0 * std::numbers::pi * t); });
    const Curve cos_curve = Curve::sample(grid, [](double t) { return std::cos(2.0 * std::numbers::pi * t); });
    MeanFn mean = [=](const CovariateVector& v) {
        return Curve::constant(grid, level) + amplitude * sin_curve + (mean_slope * v[0]) * cos_curve;
    };

    const auto join = [](const std::vector<double>& xs) {
        std::string out;
        for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + io::format_number(xs[i]);
        return out;
    };
    r["m"] = std::to_string(m);
    r["n"] = std::to_string(n);
    r["burn_in"] = std::to_string(burn_in);
    r["seed"] = std::to_string(seed);
    r["coef_intercept"] = join(intercept);
    r["coef_slope"] = join(slope);
    r["noise_sd"] = join(noise_sd);
    r["bound"] = io::format_number(bound);
    r["mean_level"] = io::format_number(level);
    r["mean_amplitude"] = io::format_number(amplitude);
    r["mean_slope"] = io::format_number(mean_slope);
    r["covariate"] = cov_kind;
    r["covariate_dim"] = std::to_string(dim);
    r["basis"] = "fourier";
    return {std::move(r), std::move(family), std::move(mean), std::move(noise), cp,
            static_cast<std::size_t>(n), static_cast<std::size_t>(burn_in)};
}

inline int cmd_simulate(const io::ConfigMap& s, std::ostream& out) {
    Scenario sc = build_scenario(s);
    const CurveSeries series = simulate_carh(sc.family, sc.mean, sc.noise, sc.covariates, sc.n, sc.burn_in);
    std::vector<long long> index(series.size());
    for (std::size_t i = 0; i < index.size(); ++i) index[i] = static_cast<long long>(i + 1);

    const auto dir = output_dir(s);
    io::save_wide_csv((dir / "curves.csv").string(), index, series.curves());
    io::write_text((dir / "covariates.csv").string(), io::format_covariate_csv(index, series.covariates()));
    io::ConfigMap truth = sc.resolved;
    truth["contraction"] = io::format_number(check_contraction(sc.family, series.covariates()));
    io::write_text((dir / "truth.txt").string(), io::format_config(truth));
    out << "simulated " << series.size() << " curves on " << series.grid()->size() << " points into "
        << dir.string() << '\n';
    return kSuccess;
}

// ------------------------------------------------------------ configs

inline PredictorConfig single_config(const io::ConfigMap& s, const SeriesView& series) {
    PredictorConfig c;
    c.estimator = parse_class(setting_str(s, "class", "carh-projection"));
    c.kernel = parse_kernel(s, series.covariates.front().dim());
    const long long kn = setting_int(s, "kn", 1);
    const long long p = setting_int(s, "p", 0);
    if (kn < 1) throw UsageError("kn must be positive");
    if (p < 0) throw UsageError("p must be nonnegative");
    c.k_n = static_cast<std::size_t>(kn);
    c.p = static_cast<unsigned>(p);
    c.alpha = s.count("alpha") ? setting_real(s, "alpha", 0.0) : 1e-2 * covariance_scale(series);
    const double h = bandwidth_scale(series);
    c.h_a = setting_real(s, "ha", h);
    c.h_gamma = setting_real(s, "hgamma", h);
    c.h_delta = setting_real(s, "hdelta", h);
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return c;
}

inline SearchGrid search_grid(const io::ConfigMap& s, const SeriesView& calibration) {
    SearchGrid g = default_grid(calibration, parse_kernel(s, calibration.covariates.front().dim()));
    if (s.count("kn")) {
        g.k_values.clear();
        for (long long k : parse_int_list(s.at("kn"), "kn")) {
            if (k < 1) throw UsageError("kn values must be positive");
            g.k_values.push_back(static_cast<std::size_t>(k));
        }
    }
    if (s.count("p")) {
        g.p_values.clear();
        for (long long p : parse_int_list(s.at("p"), "p")) {
            if (p < 0) throw UsageError("p values must be nonnegative");
            g.p_values.push_back(static_cast<unsigned>(p));
        }
    }
    const auto reals = [&](const char* key, std::vector<double>& dst) {
        if (!s.count(key)) return;
        dst = parse_real_list(s.at(key), key);
        for (double x : dst) {
            if (!(x > 0.0)) throw UsageError(std::string(key) + " values must be positive");
        }
    };
    reals("alpha", g.alpha_values);
    reals("ha", g.h_a);
    reals("hgamma", g.h_gamma);
    reals("hdelta", g.h_delta);
    return g;
}

inline io::ConfigMap config_to_map(const PredictorConfig& c) {
    io::ConfigMap m;
    m["class"] = to_string(c.estimator);
    m["kernel"] = to_string(c.kernel.family);
    if (is_projection(c.estimator)) {
        m["kn"] = std::to_string(c.k_n);
    } else {
        m["p"] = std::to_string(c.p);
        m["alpha"] = io::format_number(c.alpha);
    }
    if (is_conditional(c.estimator)) {
        m["ha"] = io::format_number(c.h_a);
        m["hgamma"] = io::format_number(c.h_gamma);
        m["hdelta"] = io::format_number(c.h_delta);
    }
    return m;
}

inline std::string config_columns(const PredictorConfig& c) {
    std::ostringstream os;
    const bool proj = is_projection(c.estimator);
    const bool cond = is_conditional(c.estimator);
    os << to_string(c.estimator) << ',' << (proj ? std::to_string(c.k_n) : "NA") << ','
       << (proj ? "NA" : std::to_string(c.p)) << ',' << (proj ? "NA" : io::format_number(c.alpha)) << ','
       << (cond ? io::format_number(c.h_a) : "NA") << ',' << (cond ? io::format_number(c.h_gamma) : "NA") << ','
       << (cond ? io::format_number(c.h_delta) : "NA");
    return os.str();
}

inline constexpr const char* kConfigHeader = "class,k_n,p,alpha,h_a,h_gamma,h_delta";

// ------------------------------------------------------------ fit / predict

inline int cmd_fit(const io::ConfigMap& s, std::ostream& out) {
    const Dataset d = load_dataset(s);
    const PredictorConfig c = single_config(s, d.series);
    // Fails early if the configuration cannot be estimated on this data.
    const LocalFit fit = fit_at(d.series, d.series.covariates().back(), c);
    (void)fit;

    nlohmann::ordered_json j;
    j["format"] = "carh-model";
    j["version"] = 1;
    j["config"] = config_to_map(c);
    j["m"] = d.series.grid()->size();
    j["index"] = d.index;
    auto& curves = j["curves"] = nlohmann::ordered_json::array();
    for (const Curve& z : d.series.curves()) {
        curves.push_back(std::vector<double>(z.values().data(), z.values().data() + z.values().size()));
    }
    auto& covs = j["covariates"] = nlohmann::ordered_json::array();
    for (const auto& v : d.series.covariates()) {
        covs.push_back(std::vector<double>(v.values().data(), v.values().data() + v.values().size()));
    }
    const auto path = output_dir(s) / "model.json";
    io::write_text(path.string(), j.dump(1) + "\n");
    out << kConfigHeader << '\n' << config_columns(c) << '\n';
    return kSuccess;
}

struct Model {
    PredictorConfig config;
    CurveSeries series;
    std::vector<long long> index;
};

inline Model load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
        if (j.at("format") != "carh-model") throw DataError(path + ": not a carh model file");
        const auto m = j.at("m").get<std::size_t>();
        const GridPtr grid = make_grid(m);
        std::vector<Curve> curves;
        for (const auto& row : j.at("curves")) {
            const auto v = row.get<std::vector<double>>();
            curves.emplace_back(grid, Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
        std::vector<CovariateVector> covs;
        for (const auto& row : j.at("covariates")) {
            const auto v = row.get<std::vector<double>>();
            covs.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
        CurveSeries series(grid, std::move(curves), std::move(covs));
        io::ConfigMap cfg;
        for (const auto& [k, v] : j.at("config").items()) cfg[k] = v.get<std::string>();
        const PredictorConfig c = single_config(cfg, series);
        return {c, std::move(series), j.at("index").get<std::vector<long long>>()};
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(path + ": " + e.what());
    }
}

inline int cmd_predict(const io::ConfigMap& s, std::ostream& out) {
    const std::string model_path = setting_str(s, "model");
    if (model_path.empty()) throw UsageError("predict: --model is required");
    const std::string next = setting_str(s, "next_covariate");
    if (next.empty()) throw UsageError("predict: --next-covariate is required");
    const Model model = load_model(model_path);
    const std::vector<double> v = parse_real_list(next, "next_covariate");
    if (v.size() != model.series.covariate_dim()) {
        throw DataError("predict: next covariate has dimension " + std::to_string(v.size()) + ", model expects " +
                        std::to_string(model.series.covariate_dim()));
    }
    const CovariateVector vnext(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    const Curve pred = predict_next(model.series, vnext, model.config);
    const long long k = model.index.empty() ? static_cast<long long>(model.series.size() + 1) : model.index.back() + 1;
    const std::string text = io::format_wide_csv({k}, {pred});
    io::write_text((output_dir(s) / "prediction.csv").string(), text);
    out << text;
    return kSuccess;
}

// ------------------------------------------------------------ evaluate / select

inline double calib_fraction(const io::ConfigMap& s) {
    const double f = setting_real(s, "calib_fraction", 0.8);
    if (!(f > 0.0 && f < 1.0)) throw UsageError("calib_fraction must lie in (0, 1)");
    return f;
}

inline int cmd_evaluate(const io::ConfigMap& s, std::ostream& out) {
    const Dataset d = load_dataset(s);
    const double fraction = calib_fraction(s);
    const std::size_t n_cal = calibration_size(d.series.size(), fraction);
    const SeriesView calibration = d.series.view().head(n_cal);

    std::ostringstream report;
    report << kConfigHeader << ",estimation_error,prediction_error\n";
    std::ostringstream plot;
    plot << "class,k,j,t,actual,predicted\n";
    const auto test_idx = test_index(d, n_cal);

    for (EstimatorClass cls : parse_classes(s, "arh-projection,carh-projection")) {
        const EvaluationReport r = select_and_evaluate(d.series, fraction, search_grid(s, calibration), cls);
        report << config_columns(r.chosen_config) << ',' << io::format_number(r.estimation_error) << ','
               << io::format_number(*r.prediction_error) << '\n';
        for (std::size_t i = 0; i < r.test_predictions.size(); ++i) {
            const Curve& actual = d.series.curves()[n_cal + i];
            for (std::size_t j = 0; j < actual.size(); ++j) {
                plot << to_string(cls) << ',' << test_idx[i] << ',' << j + 1 << ','
                     << io::format_number(actual.grid()->point(j)) << ',' << io::format_number(actual[j]) << ','
                     << io::format_number(r.test_predictions[i][j]) << '\n';
            }
        }
    }
    if (setting_str(s, "baseline") == "true") {
        const SeriesView full = d.series.view();
        const double est = persistence_forecast(full, default_calibration_window(n_cal)).rmse;
        const double pred = persistence_forecast(full, {n_cal, d.series.size() - 1}).rmse;
        report << "persistence,NA,NA,NA,NA,NA,NA," << io::format_number(est) << ',' << io::format_number(pred) << '\n';
    }
    const auto dir = output_dir(s);
    io::write_text((dir / "report.csv").string(), report.str());
    if (setting_str(s, "plot") == "true") io::write_text((dir / "plot.csv").string(), plot.str());
    out << report.str();
    return kSuccess;
}

inline int cmd_select(const io::ConfigMap& s, std::ostream& out) {
    const Dataset d = load_dataset(s);
    const std::size_t n_cal = calibration_size(d.series.size(), calib_fraction(s));
    const SeriesView calibration = d.series.view().head(n_cal);
    const auto dir = output_dir(s);

    std::ostringstream table;
    table << kConfigHeader << ",calibration_rmse,status\n";
    std::ostringstream best;
    best << kConfigHeader << ",estimation_error\n";
    for (EstimatorClass cls : parse_classes(s, "carh-projection")) {
        const EvaluationReport r = grid_search(calibration, search_grid(s, calibration), cls);
        for (const ConfigResult& res : r.results) {
            table << config_columns(res.config) << ','
                  << (res.failed ? "NA" : io::format_number(res.calibration_rmse)) << ','
                  << (res.failed ? "failed" : "ok") << '\n';
        }
        io::write_text((dir / (std::string("best_") + to_string(cls) + ".cfg")).string(),
                       io::format_config(config_to_map(r.chosen_config)));
        best << config_columns(r.chosen_config) << ',' << io::format_number(r.estimation_error) << '\n';
    }
    io::write_text((dir / "select_report.csv").string(), table.str());
    out << best.str();
    return kSuccess;
}

// ------------------------------------------------------------ entry point

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Conditional functional autoregression: simulate, fit, predict, evaluate, select", "carh"};
    app.require_subcommand(1);

    std::map<std::string, std::string> flags;
    std::vector<std::string> overrides;
    std::string config_path;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key = value settings file");
        sub->add_option("--out", flags["out"], "output directory (default $CARH_OUTPUT_DIR or .)");
        sub->add_option("--set", overrides, "extra key=value setting (repeatable)");
    };
    const auto add_data = [&](CLI::App* sub) {
        sub->add_option("--data", flags["data"], "wide curve CSV (k,t_1,...,t_m)");
        sub->add_option("--long-data", flags["long_data"], "long CSV (timestamp,value) segmented into days");
        sub->add_option("--per-day", flags["per_day"], "records per day for --long-data (default 48)");
        sub->add_option("--covariates", flags["covariates"], "covariate CSV (k,v_1,...,v_d)");
        sub->add_option("--cv-from", flags["cv_from"], "long CSV whose daily coefficient of variation is the covariate");
        sub->add_option("--cv-per-day", flags["cv_per_day"], "records per day for --cv-from (default 24)");
        sub->add_option("--include", flags["include"], "comma list of curve indices or ISO dates to keep");
    };
    const auto add_model = [&](CLI::App* sub) {
        sub->add_option("--class", flags["class"], "arh-projection | carh-projection | carh-resolvent (comma list)");
        sub->add_option("--kn", flags["kn"], "projection dimension (list: a,b or lo:hi)");
        sub->add_option("--alpha", flags["alpha"], "resolvent regularisation (list: a,b or log:lo:hi:count)");
        sub->add_option("--p", flags["p"], "resolvent power");
        sub->add_option("--ha", flags["ha"], "bandwidth for the conditional mean");
        sub->add_option("--hgamma", flags["hgamma"], "bandwidth for the conditional covariance");
        sub->add_option("--hdelta", flags["hdelta"], "bandwidth for the conditional cross-covariance");
        sub->add_option("--kernel", flags["kernel"], "gaussian | epanechnikov");
        sub->add_option("--calib-fraction", flags["calib_fraction"], "chronological calibration share (default 0.8)");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "generate a seeded synthetic dataset");
    add_common(simulate);
    simulate->add_option("--seed", flags["seed"], "random seed");
    simulate->add_option("--n", flags["n"], "number of curves");

    CLI::App* fit = app.add_subcommand("fit", "fit one configuration and write model.json");
    add_common(fit);
    add_data(fit);
    add_model(fit);

    CLI::App* predict = app.add_subcommand("predict", "forecast the next curve from a fitted model");
    add_common(predict);
    predict->add_option("--model", flags["model"], "model.json written by fit");
    predict->add_option("--next-covariate", flags["next_covariate"], "covariate of the day to forecast (comma list)");

    CLI::App* evaluate = app.add_subcommand("evaluate", "select per class on calibration, score on test");
    add_common(evaluate);
    add_data(evaluate);
    add_model(evaluate);
    bool baseline = false;
    bool plot = false;
    evaluate->add_flag("--baseline", baseline, "append a persistence row");
    evaluate->add_flag("--plot", plot, "write plot.csv with actual vs predicted test curves");

    CLI::App* select = app.add_subcommand("select", "grid search on the calibration window");
    add_common(select);
    add_data(select);
    add_model(select);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsageError;
    }

    try {
        io::ConfigMap settings;
        if (!config_path.empty()) settings = io::load_config(config_path);
        for (const auto& o : overrides) {
            const auto eq = o.find('=');
            if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + o + "'");
            settings[std::string(io::trim(o.substr(0, eq)))] = std::string(io::trim(o.substr(eq + 1)));
        }
        for (const auto& [k, v] : flags) {
            if (!v.empty()) settings[k] = v;
        }
        if (baseline) settings["baseline"] = "true";
        if (plot) settings["plot"] = "true";

        if (simulate->parsed()) return cmd_simulate(settings, out);
        if (fit->parsed()) return cmd_fit(settings, out);
        if (predict->parsed()) return cmd_predict(settings, out);
        if (evaluate->parsed()) return cmd_evaluate(settings, out);
        if (select->parsed()) return cmd_select(settings, out);
        return kUsageError;
    } catch (const UsageError& e) {
        err << "carh: " << e.what() << '\n';
        return kUsageError;
    } catch (const NumericalError& e) {
        err << "carh: numerical error: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::exception& e) {
        err << "carh: data error: " << e.what() << '\n';
        return kDataError;
    }
}

}  // namespace carh::cli
