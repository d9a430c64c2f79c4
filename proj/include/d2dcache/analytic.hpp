#pragma once

// Coverage probability from the analytic theorems, area spectral efficiency
// and total hit probability.
//
// A CoverageEngine owns one parameter set. It caches the inter-cluster
// exponent as a log-log table over the serving distance r, and the
// single-interferer intra-cluster kernels as one table per receiver distance
// nu0, so that ranks, cases and Zipf sums at the same parameters share work.

#include "d2dcache/dist.hpp"
#include "d2dcache/estimate.hpp"
#include "d2dcache/laplace.hpp"
#include "d2dcache/model.hpp"
#include "d2dcache/quadrature.hpp"

#include <boost/random/sobol.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

namespace d2d::analytic {

struct EngineSettings {
    laplace::Settings laplace;
    quad::Options outer{1e-6, 1e-12, 400, true};  ///< nu0 and rank-distance integrals
    quad::Options inner{1e-7, 1e-13, 400, true};  ///< serving-distance integrals
    int table_nodes = 96;
    laplace::IntraMode intra_mode = laplace::IntraMode::exact_sum;
    std::uint64_t qmc_seed = 1;
    std::uint64_t qmc_min_points = std::uint64_t{1} << 16;
    std::uint64_t qmc_max_points = std::uint64_t{1} << 20;
    double qmc_tolerance = 5e-4;
};

/// Method used by default for a placement case.
inline Method default_method(const PlacementCase& c) {
    if (std::holds_alternative<KTx>(c)) return Method::cor2_approx;
    if (std::holds_alternative<LRx>(c)) return Method::thm2;
    if (std::holds_alternative<Baseline>(c)) return Method::thm3;
    return Method::thm4;
}

class CoverageEngine {
public:
    explicit CoverageEngine(const SystemParams& p, EngineSettings set = {})
        : p_(validate(p, DoubleVariance{})), set_(set), count_(p_) {
        r_lo_ = 1e-3 * p_.sigma_a;
        r_hi_ = dist::kEnvelopeSigmas * p_.sigma_b + 10.0 * p_.sigma_a;
    }

    const SystemParams& params() const { return p_; }
    const EngineSettings& settings() const { return set_; }

    /// Baseline case: serving device and receiver uniform in the cluster.
    CoverageEstimate baseline() {
        require_single(Baseline{});
        const double v = rician_mixture(p_.sigma_a, [&](double r, double nu0) { return single_link(r, nu0); });
        return make(v, Method::thm3);
    }

    /// k-Tx case with the intra-cluster transform conditioned on nu0 only.
    CoverageEstimate ktx_approx(int k) {
        require_single(KTx{k});
        auto cached = approx_.find(k);
        if (cached != approx_.end()) return make(cached->second, Method::cor2_approx);
        const auto [t_lo, t_hi] = rank_support(k, p_.n_t);
        auto over_nu0 = [&](double nu0) {
            auto over_t = [&](double t) {
                auto over_theta = [&](double theta) {
                    return single_link(dist::triangle_distance(nu0, t, theta), nu0);
                };
                const double mean = quad::integral(over_theta, 0.0, std::numbers::pi, set_.inner) / std::numbers::pi;
                return dist::order_stat_pdf(t, k, p_.n_t, p_.sigma_a) * mean;
            };
            return dist::rayleigh_pdf(nu0, p_.sigma_a) * quad::integral(over_t, t_lo, t_hi, set_.outer);
        };
        const double v = quad::integral(over_nu0, 0.0, nu0_max(p_.sigma_a), set_.outer);
        approx_[k] = clamp01(v);
        return make(v, Method::cor2_approx);
    }

    /// k-Tx case ignoring correlation between intra-cluster distances.
    CoverageEstimate ktx_fast(int k) {
        require_single(KTx{k});
        if (unc_.empty()) {
            unc_ = quad::LogLogTable(
                [&](double r) { return laplace::uncorrelated_kernel(s_at(r), p_, set_.laplace); }, r_lo_, r_hi_,
                set_.table_nodes);
        }
        const double mean = p_.m_a - 1.0;
        const double xi = count_.xi();
        auto link = [&](double r) {
            const double intra = mean > 0.0 ? std::exp(-mean * std::min(unc_(r), 1.0)) / xi : 1.0;
            return std::exp(-inter_exponent(r)) * intra;
        };
        const auto [t_lo, t_hi] = rank_support(k, p_.n_t);
        auto over_t = [&](double t) {
            return dist::order_stat_pdf(t, k, p_.n_t, p_.sigma_a) * rician_expectation(t, p_.sigma_a, link);
        };
        return make(quad::integral(over_t, t_lo, t_hi, set_.outer), Method::cor3_fast);
    }

    /// k-Tx case with the exact intra-cluster transform, by randomly shifted
    /// Sobol points over (t_k, nu0, theta).
    CoverageEstimate ktx_exact(int k) {
        require_single(KTx{k});
        const auto weights = laplace::ktx_weights(k, p_);
        boost::random::sobol qrng(3);
        std::mt19937_64 shift_rng(set_.qmc_seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double shift[3] = {unit(shift_rng), unit(shift_rng), unit(shift_rng)};
        const double scale = static_cast<double>(qrng.max() - qrng.min()) + 1.0;

        quad::Options kernel_opt = set_.laplace.outer;
        kernel_opt.rel_tol = std::max(kernel_opt.rel_tol, 1e-6);
        laplace::Settings kset = set_.laplace;
        kset.outer = kernel_opt;

        auto point = [&] {
            double u[3];
            for (int d = 0; d < 3; ++d) {
                double x = static_cast<double>(qrng() - qrng.min()) / scale + shift[d];
                x -= std::floor(x);
                u[d] = std::clamp(x, 1e-16, 1.0 - 1e-16);
            }
            const double t = dist::order_stat_quantile(u[0], k, p_.n_t, p_.sigma_a);
            const double nu0 = dist::rayleigh_quantile(u[1], p_.sigma_a);
            const double r = dist::triangle_distance(nu0, t, std::numbers::pi * u[2]);
            const double s = s_at(r);
            const double intra = laplace::intra_ktx_from_kernels(laplace::ktx_kernels(s, nu0, t, k, p_, kset), weights);
            return std::exp(-inter_exponent(r)) * intra;
        };

        double sum = 0.0;
        std::uint64_t n = 0;
        auto extend = [&](std::uint64_t target) {
            for (; n < target; ++n) sum += point();
            return sum / static_cast<double>(n);
        };
        double prev = extend(set_.qmc_min_points);
        for (;;) {
            if (2 * n > set_.qmc_max_points) {
                throw NonConvergenceError("quasi-Monte Carlo estimate did not settle within the point budget");
            }
            const double next = extend(2 * n);
            if (std::abs(next - prev) < set_.qmc_tolerance) {
                auto est = make(next, Method::thm1_exact);
                est.meta.emplace_back("qmc_points", meta_value(n));
                est.meta.emplace_back("qmc_seed", meta_value(set_.qmc_seed));
                return est;
            }
            prev = next;
        }
    }

    /// l-Rx case: the receiver of interest is the l-th closest receiver to the center.
    CoverageEstimate lrx(int l) {
        require_single(LRx{l});
        const auto [t_lo, t_hi] = rank_support(l, p_.n_r);
        auto over_t = [&](double t) {
            auto link = [&](double r) { return single_link(r, t); };
            return dist::order_stat_pdf(t, l, p_.n_r, p_.sigma_a) * rician_expectation(t, p_.sigma_a, link);
        };
        return make(quad::integral(over_t, t_lo, t_hi, set_.outer), Method::thm2);
    }

    /// Double-variance model with the serving device in the dense subcluster.
    CoverageEstimate double_variance(bool rx_in_dense) {
        validate(p_, DoubleVariance{rx_in_dense, true});
        const double sigma_rx = rx_in_dense ? p_.sigma_a : p_.sigma_b;
        const double v = rician_mixture(sigma_rx, [&](double r, double nu0) {
            const auto& k = kernels_at(nu0);
            double e = inter_exponent(r);
            if (p_.m_a > 1.0) e += (p_.m_a - 1.0) * std::min(k.dense(r), 1.0);
            if (p_.m_b > 0.0) e += p_.m_b * std::min(k.sparse(r), 1.0);
            return std::exp(-e);
        });
        auto est = make(v, Method::thm4);
        est.meta.emplace_back("rx_in_dense", rx_in_dense ? "true" : "false");
        return est;
    }

    CoverageEstimate coverage(const PlacementCase& c, std::optional<Method> method = std::nullopt) {
        const Method m = method.value_or(default_method(c));
        if (const auto* k = std::get_if<KTx>(&c)) {
            if (m == Method::thm1_exact) return ktx_exact(k->k);
            if (m == Method::cor3_fast) return ktx_fast(k->k);
            if (m == Method::cor2_approx) return ktx_approx(k->k);
        } else if (const auto* l = std::get_if<LRx>(&c)) {
            if (m == Method::thm2) return lrx(l->l);
        } else if (std::holds_alternative<Baseline>(c)) {
            if (m == Method::thm3) return baseline();
        } else if (const auto* dv = std::get_if<DoubleVariance>(&c)) {
            if (!dv->tx_in_dense) {
                throw ValidationError("the analytic model requires the serving device in the dense subcluster");
            }
            if (m == Method::thm4) return double_variance(dv->rx_in_dense);
        }
        throw ValidationError(std::string("method ") + to_string(m) + " does not apply to " + to_string(c));
    }

    /// Inter-cluster transform at serving distance r, through the table.
    double inter_transform(double r) { return std::exp(-inter_exponent(r)); }

private:
    struct Kernels {
        quad::LogLogTable dense;
        quad::LogLogTable sparse;
    };

    static double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

    void require_single(const PlacementCase& c) const {
        validate(p_, c);
    }

    double s_at(double r) const { return p_.beta * std::pow(r, p_.alpha); }
    static double nu0_max(double sigma) { return dist::kEnvelopeSigmas * sigma; }

    /// Integration range for the rank-th order statistic of n Rayleigh distances.
    std::pair<double, double> rank_support(int rank, int n) const {
        return {dist::order_stat_quantile(1e-16, rank, n, p_.sigma_a),
                dist::order_stat_tail_quantile(1e-16, rank, n, p_.sigma_a)};
    }

    double inter_exponent(double r) {
        if (inter_.empty()) {
            inter_ = quad::LogLogTable(
                [&](double x) {
                    return laplace::inter_exponent<2>(
                        s_at(x), p_.lambda_c, p_.alpha,
                        {laplace::Subcluster{p_.m_a, p_.sigma_a}, laplace::Subcluster{p_.m_b, p_.sigma_b}},
                        set_.laplace);
                },
                r_lo_, r_hi_, set_.table_nodes);
        }
        return inter_(r);
    }

    const Kernels& kernels_at(double nu0) {
        auto it = kernels_.find(nu0);
        if (it != kernels_.end()) return it->second;
        Kernels k;
        auto table = [&](double sigma) {
            return quad::LogLogTable(
                [&](double r) { return laplace::interference_kernel(s_at(r), nu0, sigma, p_.alpha, set_.laplace); },
                r_lo_, r_hi_, set_.table_nodes);
        };
        if (p_.m_a > 1.0) k.dense = table(p_.sigma_a);
        if (p_.m_b > 0.0) k.sparse = table(p_.sigma_b);
        return kernels_.emplace(nu0, std::move(k)).first->second;
    }

    /// Product of the inter- and intra-cluster transforms at r given nu0.
    double single_link(double r, double nu0) {
        if (!(r > 0.0)) return 1.0;
        double intra = 1.0;
        if (p_.m_a > 1.0) intra = count_(std::min(kernels_at(nu0).dense(r), 1.0), set_.intra_mode);
        return std::exp(-inter_exponent(r)) * intra;
    }

    /// E[link(R)] for R ~ Rice(., nu, sigma).
    template <class Link>
    double rician_expectation(double nu, double sigma, Link&& link) {
        const double lo = std::max(0.0, nu - dist::kEnvelopeSigmas * sigma);
        const double hi = nu + dist::kEnvelopeSigmas * sigma;
        auto f = [&](double r) { return dist::rice_pdf(r, nu, sigma) * link(r); };
        return quad::integral(f, lo, hi, set_.inner);
    }

    /// nu0 ~ Rayleigh(sigma_rx), serving distance Rice(., nu0, sigma_a).
    template <class Link>
    double rician_mixture(double sigma_rx, Link&& link) {
        auto over_nu0 = [&](double nu0) {
            auto at = [&](double r) { return link(r, nu0); };
            return dist::rayleigh_pdf(nu0, sigma_rx) * rician_expectation(nu0, p_.sigma_a, at);
        };
        return quad::integral(over_nu0, 0.0, nu0_max(sigma_rx), set_.outer);
    }

    CoverageEstimate make(double v, Method m) const {
        Meta meta{{"outer_rel_tol", meta_value(set_.outer.rel_tol)},
                  {"inner_rel_tol", meta_value(set_.inner.rel_tol)},
                  {"kernel_rel_tol", meta_value(set_.laplace.kernel.rel_tol)},
                  {"envelope_sigmas", meta_value(dist::kEnvelopeSigmas)},
                  {"truncation_radius_m", meta_value(dist::kEnvelopeSigmas * p_.sigma_b)},
                  {"table_nodes", meta_value(set_.table_nodes)},
                  {"intra_mode", set_.intra_mode == laplace::IntraMode::exact_sum ? "exact_sum" : "exp_approx"}};
        return CoverageEstimate(clamp01(v), m, std::nullopt, std::move(meta));
    }

    SystemParams p_;
    EngineSettings set_;
    laplace::IntraCount count_;
    double r_lo_ = 0.0, r_hi_ = 0.0;
    quad::LogLogTable inter_;
    quad::LogLogTable unc_;
    std::map<double, Kernels> kernels_;
    std::map<int, double> approx_;
};

inline CoverageEstimate coverage_ktx_exact(int k, const SystemParams& p, const EngineSettings& set = {}) {
    return CoverageEngine(p, set).ktx_exact(k);
}
inline CoverageEstimate coverage_ktx_approx(int k, const SystemParams& p, const EngineSettings& set = {}) {
    return CoverageEngine(p, set).ktx_approx(k);
}
inline CoverageEstimate coverage_ktx_fast(int k, const SystemParams& p, const EngineSettings& set = {}) {
    return CoverageEngine(p, set).ktx_fast(k);
}
inline CoverageEstimate coverage_lrx(int l, const SystemParams& p, const EngineSettings& set = {}) {
    return CoverageEngine(p, set).lrx(l);
}
inline CoverageEstimate coverage_baseline(const SystemParams& p, const EngineSettings& set = {}) {
    return CoverageEngine(p, set).baseline();
}
inline CoverageEstimate coverage_double(bool rx_in_dense, const SystemParams& p, const EngineSettings& set = {}) {
    return CoverageEngine(p, set).double_variance(rx_in_dense);
}

/// Area spectral efficiency in bits/s/Hz/m^2.
inline double ase(const CoverageEstimate& pc, const SystemParams& p) {
    return (p.m_a + p.m_b) * p.lambda_c * std::log2(1.0 + p.beta) * pc.value;
}

struct AseOptimum {
    int m_star = 0;
    double ase_star = 0.0;
    std::vector<double> ase_by_m;  ///< indexed from m_lo
};

/// Exhaustive scan of integer m_a over [m_lo, m_hi]; ties go to the smaller m_a.
inline AseOptimum optimize_ase(const PlacementCase& c, const SystemParams& p, int m_lo, int m_hi,
                               std::optional<Method> method = std::nullopt, const EngineSettings& set = {}) {
    if (m_lo > m_hi) throw ValidationError("empty m_a range");
    if (m_lo < 1 || m_hi > p.n_t) throw ValidationError("m_a range must lie within [1, N_t]");
    AseOptimum best;
    best.ase_star = -1.0;
    for (int m = m_lo; m <= m_hi; ++m) {
        SystemParams q = p;
        q.m_a = m;
        CoverageEngine engine(q, set);
        const double value = ase(engine.coverage(c, method), q);
        best.ase_by_m.push_back(value);
        if (value > best.ase_star) {
            best.ase_star = value;
            best.m_star = m;
        }
    }
    return best;
}

/// Total hit probability when the N_t most popular files are spread uniformly.
inline double hit_uniform(CoverageEngine& engine, const ZipfLibrary& lib) {
    const auto& p = engine.params();
    validate(lib, p.n_t);
    return dist::zipf_head_mass(p.n_t, lib) * engine.baseline().value;
}

/// Total hit probability when file j is cached at the j-th closest transmitter.
inline double hit_cluster_centric(CoverageEngine& engine, const ZipfLibrary& lib) {
    const auto& p = engine.params();
    validate(lib, p.n_t);
    double total = 0.0;
    for (int j = p.n_t; j >= 1; --j) total += dist::zipf_pmf(j, lib) * engine.ktx_approx(j).value;
    return total;
}

inline double hit_uniform(const SystemParams& p, const ZipfLibrary& lib, const EngineSettings& set = {}) {
    CoverageEngine engine(p, set);
    return hit_uniform(engine, lib);
}

inline double hit_cluster_centric(const SystemParams& p, const ZipfLibrary& lib, const EngineSettings& set = {}) {
    CoverageEngine engine(p, set);
    return hit_cluster_centric(engine, lib);
}

}  // namespace d2d::analytic
