#pragma once

#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace d2d {

enum class Method { thm1_exact, cor2_approx, cor3_fast, thm2, thm3, thm4, monte_carlo };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::thm1_exact: return "thm1_exact";
        case Method::cor2_approx: return "cor2_approx";
        case Method::cor3_fast: return "cor3_fast";
        case Method::thm2: return "thm2";
        case Method::thm3: return "thm3";
        case Method::thm4: return "thm4";
        case Method::monte_carlo: return "monte_carlo";
    }
    return "unknown";
}

/// Ordered key/value run metadata.
using Meta = std::vector<std::pair<std::string, std::string>>;

template <class T>
std::string meta_value(const T& v) {
    std::ostringstream os;
    os.precision(9);
    os << v;
    return os.str();
}

struct CoverageEstimate {
    double value = 0.0;
    Method method = Method::thm3;
    std::optional<double> std_error;  ///< present only for Monte Carlo estimates
    Meta meta;

    CoverageEstimate() = default;
    CoverageEstimate(double v, Method m, std::optional<double> se = std::nullopt, Meta md = {})
        : value(v), method(m), std_error(se), meta(std::move(md)) {
        if (!(value >= 0.0 && value <= 1.0)) throw std::domain_error("coverage outside [0, 1]");
        if (std_error.has_value() != (method == Method::monte_carlo)) {
            throw std::invalid_argument("std_error must be present exactly for Monte Carlo estimates");
        }
    }
};

}  // namespace d2d
