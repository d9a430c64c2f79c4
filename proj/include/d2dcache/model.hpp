#pragma once

// Domain types shared by every module: physical parameters of the clustered
// D2D network, the placement case in force, and the content library.
//
// Units: lengths in meters, densities per square meter, SIR threshold linear.
// Conversions from the figure-caption units (clusters per km^2, dB) happen
// once, in the helpers below, before a SystemParams is built.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>

namespace d2d {

class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NonConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double per_km2(double clusters_per_km2) { return clusters_per_km2 * 1e-6; }
inline constexpr double to_per_km2(double clusters_per_m2) { return clusters_per_m2 * 1e6; }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

struct SystemParams {
    double lambda_c = per_km2(50.0);  ///< cluster centers per m^2
    double sigma_a = 30.0;            ///< dense-subcluster scattering std, m
    double sigma_b = 30.0;            ///< sparse-subcluster scattering std, m
    int n_t = 40;                     ///< potential transmitters per cluster
    int n_r = 40;                     ///< potential receivers per cluster
    double m_a = 5.0;                 ///< mean active transmitters, dense subcluster
    double m_b = 0.0;                 ///< mean active transmitters, sparse subcluster
    double alpha = 4.0;               ///< path-loss exponent
    double beta = 1.0;                ///< SIR threshold, linear
    double p_d = 1.0;                 ///< transmit power; SIR does not depend on it

    bool operator==(const SystemParams&) const = default;
};

struct KTx {
    int k = 1;
    bool operator==(const KTx&) const = default;
};
struct LRx {
    int l = 1;
    bool operator==(const LRx&) const = default;
};
struct Baseline {
    bool operator==(const Baseline&) const = default;
};
struct DoubleVariance {
    bool rx_in_dense = true;
    bool tx_in_dense = true;
    bool operator==(const DoubleVariance&) const = default;
};

using PlacementCase = std::variant<KTx, LRx, Baseline, DoubleVariance>;

inline std::string to_string(const PlacementCase& c) {
    struct Visitor {
        std::string operator()(const KTx& v) const { return "ktx(k=" + std::to_string(v.k) + ")"; }
        std::string operator()(const LRx& v) const { return "lrx(l=" + std::to_string(v.l) + ")"; }
        std::string operator()(const Baseline&) const { return "baseline"; }
        std::string operator()(const DoubleVariance& v) const {
            return std::string("double(rx=") + (v.rx_in_dense ? "dense" : "sparse") +
                   ",tx=" + (v.tx_in_dense ? "dense" : "sparse") + ")";
        }
    };
    return std::visit(Visitor{}, c);
}

/// Distances around the representative cluster. Unpopulated fields are NaN.
struct Geometry {
    double nu0 = NAN;    ///< receiver of interest to its cluster center
    double t_k = NAN;    ///< serving transmitter to cluster center
    double t_l = NAN;    ///< receiver of interest (as l-th closest) to cluster center
    double t_in = NAN;   ///< an intra-cluster interferer nearer the center than the server
    double t_out = NAN;  ///< an intra-cluster interferer farther from the center
    double w = NAN;      ///< intra-cluster interferer to receiver
    double u = NAN;      ///< inter-cluster interferer to receiver
    double r = NAN;      ///< serving link length
};

inline bool is_consistent(const Geometry& g) {
    for (double v : {g.nu0, g.t_k, g.t_l, g.t_in, g.t_out, g.w, g.u, g.r}) {
        if (!std::isnan(v) && v < 0.0) return false;
    }
    if (!std::isnan(g.t_in) && !std::isnan(g.t_k) && !(g.t_in < g.t_k)) return false;
    if (!std::isnan(g.t_out) && !std::isnan(g.t_k) && !(g.t_k < g.t_out)) return false;
    return true;
}

struct ZipfLibrary {
    int j_total = 40;
    double gamma = 0.0;
};

namespace detail {
inline void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}
}  // namespace detail

/// Checks every parameter invariant against the placement case and returns
/// the parameters unchanged. Throws ValidationError naming the first violation.
inline SystemParams validate(const SystemParams& p, const PlacementCase& c) {
    using detail::require;
    require(std::isfinite(p.lambda_c) && p.lambda_c > 0.0, "lambda_c must be positive");
    require(std::isfinite(p.sigma_a) && p.sigma_a > 0.0, "sigma_a must be positive");
    require(std::isfinite(p.sigma_b) && p.sigma_b >= p.sigma_a, "sigma_b must be at least sigma_a");
    require(std::isfinite(p.alpha) && p.alpha > 2.0, "alpha must exceed 2");
    require(std::isfinite(p.beta) && p.beta > 0.0, "beta must be positive");
    require(p.n_t >= 1, "n_t must be at least 1");
    require(p.n_r >= 1, "n_r must be at least 1");
    require(std::isfinite(p.p_d) && p.p_d > 0.0, "p_d must be positive");
    require(std::isfinite(p.m_b) && p.m_b >= 0.0, "m_b must be nonnegative");
    require(std::isfinite(p.m_a) && p.m_a <= p.n_t, "m_a must not exceed n_t");

    const auto* dv = std::get_if<DoubleVariance>(&c);
    if (dv != nullptr && !dv->tx_in_dense) {
        // the serving device comes from the sparse subcluster, so it carries the unit of activity
        require(p.m_a >= 0.0, "m_a must be nonnegative");
        require(p.m_b >= 1.0, "m_b must be at least 1 when the serving device is in the sparse subcluster");
    } else {
        require(p.m_a >= 1.0, "m_a must be at least 1");
    }
    if (dv == nullptr) {
        require(p.m_b == 0.0, "m_b must be 0 outside the double-variance model");
    }

    if (const auto* k = std::get_if<KTx>(&c)) {
        require(k->k >= 1, "rank must be at least 1");
        require(k->k <= p.n_t, "rank exceeds N_t");
    } else if (const auto* l = std::get_if<LRx>(&c)) {
        require(l->l >= 1, "rank must be at least 1");
        require(l->l <= p.n_r, "rank exceeds N_r");
    }
    return p;
}

inline ZipfLibrary validate(const ZipfLibrary& lib, int n_t) {
    detail::require(lib.j_total >= 1, "library size must be positive");
    detail::require(lib.j_total >= n_t, "library size must be at least N_t");
    detail::require(std::isfinite(lib.gamma) && lib.gamma >= 0.0, "zipf exponent must be nonnegative");
    return lib;
}

inline std::string describe(const SystemParams& p) {
    std::ostringstream os;
    os.precision(9);
    os << "lambda_c_per_km2=" << to_per_km2(p.lambda_c) << " sigma_a=" << p.sigma_a
       << " sigma_b=" << p.sigma_b << " n_t=" << p.n_t << " n_r=" << p.n_r << " m_a=" << p.m_a
       << " m_b=" << p.m_b << " alpha=" << p.alpha << " beta_db=" << linear_to_db(p.beta);
    return os.str();
}

}  // namespace d2d
