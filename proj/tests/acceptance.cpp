// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include "carh/carh.hpp"
#include "carh/io.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#ifndef CARH_CLI_PATH
#error "CARH_CLI_PATH must point at the carh executable"
#endif

using namespace carh;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

std::string fmt_list(const std::vector<double>& xs) {
    std::string out = "[";
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + fmt(xs[i]);
    return out + "]";
}

bool strictly_decreasing(const std::vector<double>& xs) {
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (!(xs[i] < xs[i - 1])) return false;
    return true;
}

// Diagonal CARH on the first three Fourier functions, c_j(v) = a_j + b_j v,
// noise sd sigma_j on the same functions, V ~ U[0, 1] i.i.d. Everything at a
// fixed v has a closed form:
//   C_jj = sigma_j^2 / (1 - E c_j^2),  E c_j^2 = a^2 + a b + b^2 / 3,
//   Gamma_v = sum (sigma_j^2 + c_j(v)^2 C_jj) phi_j (x) phi_j,
//   Delta_v = sum c_j(v) C_jj phi_j (x) phi_j.
struct DiagonalScenario {
    GridPtr grid;
    std::vector<double> a, b, sd;

    OperatorFamily family() const { return fixture::diagonal_family(grid, a, b); }
    NoiseSpec noise(std::uint64_t seed) const { return fixture::noise(grid, sd, seed); }
    std::vector<Curve> basis() const { return fourier_basis(grid, a.size()); }

    double coef(std::size_t j, double v) const { return a[j] + b[j] * v; }
    double stationary(std::size_t j) const {
        const double ec2 = a[j] * a[j] + a[j] * b[j] + b[j] * b[j] / 3.0;
        return sd[j] * sd[j] / (1.0 - ec2);
    }
    std::vector<double> gamma_eigenvalues(double v) const {
        std::vector<double> out;
        for (std::size_t j = 0; j < a.size(); ++j) out.push_back(sd[j] * sd[j] + std::pow(coef(j, v), 2) * stationary(j));
        return out;
    }
    DiscretizedOperator diagonal(const std::vector<double>& d) const {
        const auto phi = basis();
        Eigen::MatrixXd k = Eigen::MatrixXd::Zero(grid->isize(), grid->isize());
        for (std::size_t j = 0; j < d.size(); ++j)
            for (Eigen::Index s = 0; s < k.rows(); ++s)
                for (Eigen::Index t = 0; t < k.cols(); ++t)
                    k(s, t) += d[j] * phi[j].values()[s] * phi[j].values()[t];
        return DiscretizedOperator(grid, k);
    }
    DiscretizedOperator rho(double v) const {
        std::vector<double> d;
        for (std::size_t j = 0; j < a.size(); ++j) d.push_back(coef(j, v));
        return diagonal(d);
    }
    DiscretizedOperator gamma(double v) const { return diagonal(gamma_eigenvalues(v)); }
    DiscretizedOperator delta(double v) const {
        std::vector<double> d;
        for (std::size_t j = 0; j < a.size(); ++j) d.push_back(coef(j, v) * stationary(j));
        return diagonal(d);
    }
};

// ---------------------------------------------------------------- 1

Outcome weight_law() {
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> count(2, 40);
    std::size_t bad_sum = 0, negative = 0, wrong_argmax = 0, fallbacks = 0, bad_fallback = 0;
    for (int draw = 0; draw < 1000; ++draw) {
        const bool gaussian = draw % 2 == 0;
        // The product kernel's argmax is the Euclidean nearest point only for d = 1.
        const std::size_t d = gaussian ? 1 + static_cast<std::size_t>(draw / 2 % 3) : 1;
        const KernelSpec spec{gaussian ? KernelFamily::gaussian : KernelFamily::epanechnikov_product, d};
        const int n = count(rng);
        std::vector<CovariateVector> sample;
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd x(static_cast<Eigen::Index>(d));
            for (auto& c : x) c = unit(rng);
            sample.emplace_back(x);
        }
        Eigen::VectorXd v(static_cast<Eigen::Index>(d));
        for (auto& c : v) c = 1.4 * unit(rng) - 0.2;
        const double h = std::exp(std::log(1e-3) + (std::log(2.0) - std::log(1e-3)) * unit(rng));
        const WeightVector w = kernel_weights(sample, CovariateVector(v), h, spec);

        double total = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            total += w[i];
            if (w[i] < 0.0) ++negative;
        }
        if (std::abs(total - 1.0) > 1e-12) ++bad_sum;

        std::size_t nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            double dist = 0.0;
            for (std::size_t c = 0; c < d; ++c) dist += std::pow(sample[static_cast<std::size_t>(i)][c] - v[static_cast<Eigen::Index>(c)], 2);
            if (dist < best) best = dist, nearest = static_cast<std::size_t>(i);
        }
        if (w.fallback_used) {
            ++fallbacks;
            if (gaussian || std::sqrt(best) < h) ++bad_fallback;
            for (std::size_t i = 0; i < w.size(); ++i)
                if (w[i] != 1.0 / n) ++bad_fallback;
            continue;
        }
        std::size_t argmax = 0;
        for (std::size_t i = 1; i < w.size(); ++i)
            if (w[i] > w[argmax]) argmax = i;
        if (argmax != nearest) ++wrong_argmax;
    }

    // All points outside the compact support.
    const std::vector<CovariateVector> far = {CovariateVector::scalar(0.0), CovariateVector::scalar(0.5),
                                              CovariateVector::scalar(1.0)};
    const WeightVector fb = kernel_weights(far, CovariateVector::scalar(10.0), 0.5, {KernelFamily::epanechnikov_product, 1});
    const bool explicit_fallback = fb.fallback_used && fb.weights.isApproxToConstant(1.0 / 3.0, 0.0);

    Outcome o;
    o.pass = bad_sum == 0 && negative == 0 && wrong_argmax == 0 && bad_fallback == 0 && explicit_fallback;
    o.detail = "sum violations " + std::to_string(bad_sum) + ", negative " + std::to_string(negative) +
               ", argmax mismatches " + std::to_string(wrong_argmax) + ", random fallbacks " +
               std::to_string(fallbacks) + ", explicit fallback " + (explicit_fallback ? "ok" : "wrong");
    return o;
}

// ---------------------------------------------------------------- 2

Outcome brute_force_equivalence() {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto g = make_grid(4);
    double worst_mean = 0.0, worst_cov = 0.0, worst_cross = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const bool gaussian = trial % 2 == 0;
        const KernelSpec spec{gaussian ? KernelFamily::gaussian : KernelFamily::epanechnikov_product, 1};
        std::vector<Curve> z;
        std::vector<CovariateVector> covs;
        std::vector<double> vs;
        for (int i = 0; i < 3; ++i) {
            Eigen::VectorXd x(4);
            for (auto& c : x) c = normal(rng);
            z.emplace_back(g, x);
            vs.push_back(unit(rng));
            covs.push_back(CovariateVector::scalar(vs.back()));
        }
        const double v = unit(rng);
        // Wide enough that the compact kernel covers every point.
        const double ha = 1.0 + unit(rng), hg = 1.0 + unit(rng), hd = 1.0 + unit(rng);
        const auto k = [&](double u) {
            return gaussian ? std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi) : 0.75 * (1.0 - u * u);
        };
        const auto weights = [&](std::size_t first, double h) {
            std::vector<double> w;
            double total = 0.0;
            for (std::size_t i = first; i < 3; ++i) {
                w.push_back(k((vs[i] - v) / h));
                total += w.back();
            }
            for (double& x : w) x /= total;
            return w;
        };

        const std::vector<double> wa = weights(0, ha), wg = weights(0, hg), wd = weights(1, hd);
        double mean[4] = {0, 0, 0, 0};
        for (int s = 0; s < 4; ++s)
            for (int i = 0; i < 3; ++i) mean[s] += wa[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
        double cov[4][4] = {}, cross[4][4] = {};
        for (int s = 0; s < 4; ++s)
            for (int t = 0; t < 4; ++t) {
                for (int i = 0; i < 3; ++i) {
                    const auto iu = static_cast<std::size_t>(i);
                    cov[s][t] += wg[iu] * (z[iu][static_cast<std::size_t>(s)] - mean[s]) * (z[iu][static_cast<std::size_t>(t)] - mean[t]);
                }
                for (int i = 0; i < 2; ++i) {
                    const auto iu = static_cast<std::size_t>(i);
                    cross[s][t] += wd[iu] * (z[iu][static_cast<std::size_t>(s)] - mean[s]) *
                                   (z[iu + 1][static_cast<std::size_t>(t)] - mean[t]);
                }
            }

        const CurveSeries series(g, z, covs);
        const CovariateVector at = CovariateVector::scalar(v);
        const Curve a_hat = estimate_cond_mean(series, at, ha, spec);
        const DiscretizedOperator g_hat = estimate_cond_cov(series, at, hg, spec, a_hat);
        const DiscretizedOperator d_hat = estimate_cond_crosscov(series, at, hd, spec, a_hat);
        for (int s = 0; s < 4; ++s) {
            worst_mean = std::max(worst_mean, std::abs(a_hat[static_cast<std::size_t>(s)] - mean[s]));
            for (int t = 0; t < 4; ++t) {
                worst_cov = std::max(worst_cov, std::abs(g_hat.kernel()(s, t) - cov[s][t]));
                worst_cross = std::max(worst_cross, std::abs(d_hat.kernel()(s, t) - cross[s][t]));
            }
        }
    }
    Outcome o;
    o.pass = worst_mean <= 1e-12 && worst_cov <= 1e-12 && worst_cross <= 1e-12;
    o.detail = "200 instances, max deviation a " + fmt(worst_mean) + ", gamma " + fmt(worst_cov) + ", delta " +
               fmt(worst_cross);
    return o;
}

// ---------------------------------------------------------------- 3

Outcome yule_walker() {
    const DiagonalScenario sc{make_grid(16), {0.4, 0.3, 0.2}, {0.2, 0.0, 0.0}, {1.0, 0.7, 0.5}};
    const auto family = sc.family();
    const double v = 0.5;
    const DiscretizedOperator rho = sc.rho(v);
    const double scale = hs_norm(sc.delta(v));
    const KernelSpec spec{};
    std::vector<double> medians;
    for (std::size_t n : {250u, 1000u, 4000u}) {
        std::vector<double> ratios;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const auto s = simulate_carh(family, fixture::zero_mean(sc.grid), sc.noise(seed),
                                         fixture::uniform_covariates(seed + 100), n);
            const double h = 0.5 * std::pow(static_cast<double>(n), -0.2);
            const CovariateVector at = CovariateVector::scalar(v);
            const Curve mu = estimate_cond_mean(s, at, h, spec);
            const DiscretizedOperator gam = estimate_cond_cov(s, at, h, spec, mu);
            const DiscretizedOperator del = estimate_cond_crosscov(s, at, h, spec, mu);
            ratios.push_back(hs_norm(del - compose(rho, gam)) / scale);
        }
        medians.push_back(oracle::median(ratios));
    }
    Outcome o;
    o.pass = strictly_decreasing(medians) && medians.back() <= 0.30;
    o.detail = "median ratio at n = 250, 1000, 4000: " + fmt_list(medians) + " (bound 0.30)";
    return o;
}

// ---------------------------------------------------------------- 4

Outcome convergence_slopes() {
    const DiagonalScenario sc{make_grid(16), {0.4, 0.3, 0.2}, {0.2, 0.0, 0.0}, {1.0, 0.7, 0.5}};
    const auto family = sc.family();
    const double v = 0.5;
    // v-dependent mean, so the bias of a_hat is exercised too.
    const Curve cos_curve = Curve::sample(sc.grid, [](double t) { return std::cos(2.0 * std::numbers::pi * t); });
    const MeanFn mean = [&](const CovariateVector& x) { return Curve::constant(sc.grid, 1.0) + (2.0 * x[0]) * cos_curve; };
    const Curve a_true = mean(CovariateVector::scalar(v));
    const DiscretizedOperator g_true = sc.gamma(v);
    const KernelSpec spec{};

    std::vector<double> log_n, log_mean_err, log_cov_err;
    for (std::size_t n : {250u, 500u, 1000u, 2000u, 4000u}) {
        const double dn = static_cast<double>(n);
        const double h = 0.5 * std::pow(std::log(dn) / dn, 0.2);
        std::vector<double> mean_err, cov_err;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const auto s = simulate_carh(family, mean, sc.noise(seed + 300), fixture::uniform_covariates(seed + 400), n);
            const CovariateVector at = CovariateVector::scalar(v);
            const Curve mu = estimate_cond_mean(s, at, h, spec);
            mean_err.push_back(h_norm(mu - a_true));
            cov_err.push_back(hs_norm(estimate_cond_cov(s, at, h, spec, mu) - g_true));
        }
        log_n.push_back(std::log(dn));
        log_mean_err.push_back(std::log(oracle::median(mean_err)));
        log_cov_err.push_back(std::log(oracle::median(cov_err)));
    }
    const double slope_a = oracle::slope(log_n, log_mean_err);
    const double slope_g = oracle::slope(log_n, log_cov_err);
    const auto inside = [](double x) { return x >= -0.65 && x <= -0.15; };
    Outcome o;
    o.pass = inside(slope_a) && inside(slope_g);
    o.detail = "slope a " + fmt(slope_a) + ", slope Gamma " + fmt(slope_g) + " (interval [-0.65, -0.15])";
    return o;
}

// ---------------------------------------------------------------- 5

Outcome eigen_structure() {
    // Noise scaled so that Gamma_v at v = 0.5 has eigenvalues 1, 0.5, 0.25.
    DiagonalScenario sc{make_grid(16), {0.4, 0.3, 0.2}, {0.2, 0.0, 0.0}, {1.0, 1.0, 1.0}};
    const double v = 0.5;
    const std::vector<double> lambda{1.0, 0.5, 0.25};
    const std::vector<double> unit = sc.gamma_eigenvalues(v);
    for (std::size_t j = 0; j < 3; ++j) sc.sd[j] = std::sqrt(lambda[j] / unit[j]);
    const auto family = sc.family();
    const auto phi = sc.basis();
    const KernelSpec spec{};

    std::vector<std::vector<double>> fn_medians(3);
    std::vector<double> value_medians;
    for (std::size_t n : {250u, 1000u, 4000u}) {
        const double h = 0.5 * std::pow(static_cast<double>(n), -0.2);
        std::vector<double> value_err;
        std::vector<std::vector<double>> fn_err(3);
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const auto s = simulate_carh(family, fixture::zero_mean(sc.grid), sc.noise(seed + 500),
                                         fixture::uniform_covariates(seed + 600), n);
            const CovariateVector at = CovariateVector::scalar(v);
            const Curve mu = estimate_cond_mean(s, at, h, spec);
            const EigenSystem es = eigendecompose(estimate_cond_cov(s, at, h, spec, mu), 3);
            double worst = 0.0;
            for (std::size_t j = 0; j < 3; ++j) {
                worst = std::max(worst, std::abs(es.eigenvalues[j] - lambda[j]));
                fn_err[j].push_back(h_norm(align_sign(es.eigenfunctions[j], phi[j]) - phi[j]));
            }
            value_err.push_back(worst);
        }
        value_medians.push_back(oracle::median(value_err));
        for (std::size_t j = 0; j < 3; ++j) fn_medians[j].push_back(oracle::median(fn_err[j]));
    }
    Outcome o;
    o.pass = value_medians.back() <= 0.1;
    o.detail = "median max eigenvalue error " + fmt_list(value_medians);
    for (std::size_t j = 0; j < 3; ++j) {
        o.pass = o.pass && fn_medians[j].back() <= 0.3 && strictly_decreasing(fn_medians[j]);
        o.detail += ", e" + std::to_string(j + 1) + " " + fmt_list(fn_medians[j]);
    }
    o.detail += " at n = 250, 1000, 4000";
    return o;
}

// ---------------------------------------------------------------- 6

Outcome predictor_consistency() {
    const DiagonalScenario sc{make_grid(20), {0.5, 0.4, 0.3}, {0.2, 0.0, 0.0}, {2.0, 1.5, 1.2}};
    const auto family = sc.family();
    const double v = 0.5;
    const DiscretizedOperator truth = adjoint(sc.rho(v));
    const double scale = sup_norm(truth);
    std::vector<double> proj_medians, res_medians;
    for (std::size_t n : {500u, 4000u}) {
        const double dn = static_cast<double>(n);
        PredictorConfig cfg;
        cfg.estimator = EstimatorClass::carh_projection;
        cfg.k_n = 3;
        cfg.h_a = cfg.h_gamma = cfg.h_delta = 0.5 * std::pow(dn, -0.2);
        std::vector<double> proj, res;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const auto s = simulate_carh(family, fixture::zero_mean(sc.grid), sc.noise(seed + 700),
                                         fixture::uniform_covariates(seed + 800), n);
            const LocalFit fit = fit_at(s, CovariateVector::scalar(v), cfg);
            const DiscretizedOperator r = resolvent_estimator(fit.gamma, fit.delta, {0, std::pow(dn, -1.0 / 3.0)});
            proj.push_back(sup_norm(fit.rho_adjoint - truth) / scale);
            res.push_back(sup_norm(r - truth) / scale);
        }
        proj_medians.push_back(oracle::median(proj));
        res_medians.push_back(oracle::median(res));
    }
    Outcome o;
    o.pass = proj_medians[1] <= 0.25 && res_medians[1] <= 0.50 && strictly_decreasing(proj_medians) &&
             strictly_decreasing(res_medians);
    o.detail = "median relative sup error at n = 500, 4000: projection " + fmt_list(proj_medians) + " (bound 0.25), resolvent " +
               fmt_list(res_medians) + " (bound 0.50)";
    return o;
}

// ---------------------------------------------------------------- CLI helpers

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

int run_cli(const std::string& args) {
    const std::string cmd = std::string("'") + CARH_CLI_PATH + "' " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// prediction_error column of report.csv, keyed by class.
std::vector<std::pair<std::string, double>> report_errors(const fs::path& report) {
    std::vector<std::pair<std::string, double>> out;
    std::istringstream in(slurp(report));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto cells = io::split(line);
        out.emplace_back(std::string(cells.front()), io::parse_double(cells.back()).value_or(std::nan("")));
    }
    return out;
}

double lookup(const std::vector<std::pair<std::string, double>>& rows, const std::string& name) {
    for (const auto& [k, v] : rows)
        if (k == name) return v;
    return std::nan("");
}

struct ScratchDir {
    fs::path path;
    explicit ScratchDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("carh_acceptance_" + tag + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~ScratchDir() { fs::remove_all(path); }
    fs::path sub(const std::string& name) const {
        fs::create_directories(path / name);
        return path / name;
    }
};

// ---------------------------------------------------------------- 7

Outcome protocol_reproduction() {
    const ScratchDir scratch("protocol");
    std::size_t wins = 0;
    std::vector<double> arh, carh, persistence;
    for (int seed = 1; seed <= 20; ++seed) {
        const fs::path dir = scratch.sub("seed" + std::to_string(seed));
        // c_1(v) = 0.3 + 0.5 v with the covariate also shifting the mean curve.
        if (run_cli("simulate --seed " + std::to_string(seed) +
                    " --n 200 --set coef_intercept=0.3,0.2,0.1 --set coef_slope=0.5,0,0 --set mean_slope=3 --out " +
                    quote(dir)) != 0 ||
            run_cli("evaluate --data " + quote(dir / "curves.csv") + " --covariates " + quote(dir / "covariates.csv") +
                    " --class arh-projection,carh-projection --calib-fraction 0.8 --baseline --out " + quote(dir)) != 0) {
            return {false, "CLI run failed for seed " + std::to_string(seed)};
        }
        const auto rows = report_errors(dir / "report.csv");
        arh.push_back(lookup(rows, "arh-projection"));
        carh.push_back(lookup(rows, "carh-projection"));
        persistence.push_back(lookup(rows, "persistence"));
        if (carh.back() < arh.back()) ++wins;
    }
    const double m_arh = oracle::median(arh), m_carh = oracle::median(carh), m_pers = oracle::median(persistence);
    Outcome o;
    o.pass = wins >= 15 && m_arh < m_pers && m_carh < m_pers;
    o.detail = "CARH beats ARH in " + std::to_string(wins) + "/20 seeds; median test RMSE ARH " + fmt(m_arh) + ", CARH " +
               fmt(m_carh) + ", persistence " + fmt(m_pers);
    return o;
}

// ---------------------------------------------------------------- 8

Outcome norm_chain() {
    std::mt19937_64 rng(8080);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> size(2, 30);
    std::size_t violations = 0, oracle_mismatch = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const int m = size(rng);
        const int rank = std::uniform_int_distribution<int>(1, m)(rng);
        const auto g = make_grid(static_cast<std::size_t>(m));
        Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);
        for (int r = 0; r < rank; ++r) {
            Eigen::VectorXd u(m), w(m);
            for (auto& x : u) x = normal(rng);
            for (auto& x : w) x = normal(rng);
            k += std::exp(normal(rng)) * u * w.transpose();
        }
        const DiscretizedOperator a(g, k);
        const OperatorNorms n = operator_norms(a);
        const double slack = 1e-10 * n.trace;
        if (n.hilbert_schmidt > n.trace + slack || n.sup > n.hilbert_schmidt + slack) ++violations;

        oracle::Matrix scaled = oracle::zeros(static_cast<std::size_t>(m));
        for (int s = 0; s < m; ++s)
            for (int t = 0; t < m; ++t) scaled[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)] = k(s, t) * g->weight();
        const std::vector<double> sv = oracle::singular_values(scaled);
        double tr = 0.0, hs = 0.0;
        for (double x : sv) tr += x, hs += x * x;
        hs = std::sqrt(hs);
        const auto close = [](double x, double y) { return std::abs(x - y) <= 1e-8 * std::max(1.0, std::abs(y)); };
        if (!close(n.trace, tr) || !close(n.hilbert_schmidt, hs) || !close(n.sup, sv.front())) ++oracle_mismatch;
    }
    Outcome o;
    o.pass = violations == 0 && oracle_mismatch == 0;
    o.detail = "500 operators, chain violations " + std::to_string(violations) + ", disagreements with Jacobi SVD " +
               std::to_string(oracle_mismatch);
    return o;
}

// ---------------------------------------------------------------- 9

Outcome series_solution_check() {
    const auto g = make_grid(16);
    // sup over v in [0, 1] of max_j |c_j(v)| is 0.8.
    const auto family = fixture::diagonal_family(g, {0.3, 0.2, 0.1}, {0.5, 0.0, 0.0}, 0.8);
    // v-dependent mean.
    const MeanFn mean = [g](const CovariateVector& v) { return Curve::constant(g, v[0]); };
    const auto trace = simulate_carh_trace(family, mean, fixture::noise(g, {1.0, 0.7, 0.5}, 9),
                                           fixture::uniform_covariates(10), 300, 200);
    double worst = 0.0;
    for (std::size_t t = 100; t < trace.states.size(); ++t)
        worst = std::max(worst, sup_abs(series_solution(trace, family, mean, t, 50) - trace.states[t]));
    const double contraction = check_contraction(family, trace.covariates);
    Outcome o;
    o.pass = worst <= 1e-4 && contraction <= 0.8 + 1e-12;
    o.detail = "max sup error over t = 100..500 " + fmt(worst) + ", observed contraction " + fmt(contraction);
    return o;
}

// ---------------------------------------------------------------- 10

Outcome determinism() {
    const ScratchDir scratch("determinism");
    const fs::path a = scratch.sub("a"), b = scratch.sub("b");
    for (const fs::path& dir : {a, b}) {
        if (run_cli("simulate --seed 11 --n 80 --set m=12 --out " + quote(dir)) != 0 ||
            run_cli("evaluate --data " + quote(dir / "curves.csv") + " --covariates " + quote(dir / "covariates.csv") +
                    " --class arh-projection,carh-projection,carh-resolvent --baseline --plot --out " + quote(dir)) != 0) {
            return {false, "CLI run failed"};
        }
    }
    std::vector<std::string> differing;
    for (const char* f : {"curves.csv", "covariates.csv", "truth.txt", "report.csv", "plot.csv"}) {
        const std::string x = slurp(a / f), y = slurp(b / f);
        if (x.empty() || x != y) differing.push_back(f);
    }
    Outcome o;
    o.pass = differing.empty();
    o.detail = "simulate and evaluate outputs ";
    if (differing.empty()) {
        o.detail += "byte-identical";
    } else {
        o.detail += "differ in";
        for (const auto& f : differing) o.detail += " " + f;
    }
    return o;
}

struct Criterion {
    const char* name;
    std::function<Outcome()> check;
    double budget_seconds;  // 0 = no stated limit
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"weight law", weight_law, 5.0},
        {"brute-force estimator equivalence", brute_force_equivalence, 0.0},
        {"Yule-Walker residual", yule_walker, 120.0},
        {"convergence-rate slope", convergence_slopes, 300.0},
        {"eigen-structure", eigen_structure, 0.0},
        {"predictor consistency", predictor_consistency, 0.0},
        {"protocol reproduction via CLI", protocol_reproduction, 600.0},
        {"operator norm chain", norm_chain, 0.0},
        {"series solution", series_solution_check, 0.0},
        {"determinism", determinism, 0.0},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (criteria[i].budget_seconds > 0.0 && secs > criteria[i].budget_seconds) {
            o.pass = false;
            o.detail += "; over the " + fmt(criteria[i].budget_seconds) + " s budget";
        }
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << i + 1 << ". " << criteria[i].name << ": " << o.detail
                  << " (" << fmt(secs) << " s)" << std::endl;
    }
    std::cout << criteria.size() - static_cast<std::size_t>(failures) << "/" << criteria.size() << " criteria passed"
              << std::endl;
    return failures == 0 ? 0 : 1;
}
