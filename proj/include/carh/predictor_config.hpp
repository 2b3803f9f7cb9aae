#pragma once

#include "carh/kernel_regression.hpp"

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace carh {

enum class EstimatorClass { arh_projection, carh_projection, carh_resolvent };

inline const char* to_string(EstimatorClass c) {
    switch (c) {
        case EstimatorClass::arh_projection: return "arh-projection";
        case EstimatorClass::carh_projection: return "carh-projection";
        case EstimatorClass::carh_resolvent: return "carh-resolvent";
    }
    return "unknown";
}

inline std::optional<EstimatorClass> parse_estimator_class(std::string_view s) {
    if (s == "arh-projection") return EstimatorClass::arh_projection;
    if (s == "carh-projection") return EstimatorClass::carh_projection;
    if (s == "carh-resolvent") return EstimatorClass::carh_resolvent;
    return std::nullopt;
}

inline bool is_projection(EstimatorClass c) { return c != EstimatorClass::carh_resolvent; }
inline bool is_conditional(EstimatorClass c) { return c != EstimatorClass::arh_projection; }

/// Everything needed to turn a history of (curve, covariate) pairs into a
/// one-step-ahead forecast. Bandwidths are ignored by arh-projection, which
/// weights all observations equally.
struct PredictorConfig {
    EstimatorClass estimator = EstimatorClass::carh_projection;
    std::size_t k_n = 1;
    unsigned p = 0;
    double alpha = 1e-2;
    double h_a = 1.0;
    double h_gamma = 1.0;
    double h_delta = 1.0;
    KernelSpec kernel{};

    void validate() const {
        if (is_projection(estimator) && k_n == 0) {
            throw std::invalid_argument("PredictorConfig: k_n must be positive");
        }
        if (estimator == EstimatorClass::carh_resolvent && !(alpha > 0.0)) {
            throw std::invalid_argument("PredictorConfig: alpha must be positive");
        }
        if (is_conditional(estimator)) {
            for (double h : {h_a, h_gamma, h_delta}) {
                if (!(h > 0.0)) throw std::invalid_argument("PredictorConfig: bandwidths must be positive");
            }
        }
    }

    double bandwidth_product() const { return is_conditional(estimator) ? h_a * h_gamma * h_delta : 0.0; }
};

}  // namespace carh
