#pragma once

// Laplace transforms E[exp(-s I)] of the intra- and inter-cluster
// interference at the receiver of interest. s is in units of m^alpha
// (coverage integrals evaluate at s = beta r^alpha).

#include "d2dcache/dist.hpp"
#include "d2dcache/model.hpp"
#include "d2dcache/quadrature.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace d2d::laplace {

enum class IntraMode { exact_sum, exp_approx };

struct Settings {
    quad::Options kernel{1e-8, 0.0, 200, true};  ///< single-fading-kernel integrals
    quad::Options outer{1e-7, 1e-14, 400, true};  ///< PGFL and nested integrals
    double envelope_sigmas = dist::kEnvelopeSigmas;
};

/// Per-interferer path-loss attenuation s w^-a / (1 + s w^-a), written so that
/// w = 0 is finite.
inline double attenuation(double s, double w, double alpha) {
    const double wa = std::pow(w, alpha);
    return s / (s + wa);
}

namespace detail {
/// Integral over [lo, hi] split at the knee w = s^(1/alpha) of the attenuation,
/// which is sharp when s is small.
template <class F>
double kernel_integral(F&& f, double lo, double hi, double s, double alpha, const quad::Options& opt) {
    const double knee = std::pow(s, 1.0 / alpha);
    if (knee <= lo || knee >= hi) return quad::integral(f, lo, hi, opt);
    return quad::integral(f, lo, knee, opt) + quad::integral(f, knee, hi, opt);
}
}  // namespace detail

/// E[s W^-a / (1 + s W^-a)] for W ~ Rice(nu, sigma): the interference kernel,
/// i.e. one minus the survival kernel M.
inline double interference_kernel(double s, double nu, double sigma, double alpha, const Settings& set = {}) {
    if (s <= 0.0) return 0.0;
    const double lo = std::max(0.0, nu - set.envelope_sigmas * sigma);
    const double hi = nu + set.envelope_sigmas * sigma;
    auto f = [&](double w) { return attenuation(s, w, alpha) * dist::rice_pdf(w, nu, sigma); };
    return std::clamp(detail::kernel_integral(f, lo, hi, s, alpha, set.kernel), 0.0, 1.0);
}

/// M = E[1 / (1 + s W^-a)] for W ~ Rice(nu, sigma).
inline double survival_kernel(double s, double nu, double sigma, double alpha, const Settings& set = {}) {
    if (s <= 0.0) return 1.0;
    const double lo = std::max(0.0, nu - set.envelope_sigmas * sigma);
    const double hi = nu + set.envelope_sigmas * sigma;
    auto f = [&](double w) {
        const double wa = std::pow(w, alpha);
        return wa / (s + wa) * dist::rice_pdf(w, nu, sigma);
    };
    return std::clamp(detail::kernel_integral(f, lo, hi, s, alpha, set.kernel), 0.0, 1.0);
}

/// P(N <= max_count) for N ~ Poisson(mean); the truncated-Poisson normalizer xi.
inline double truncated_poisson_normalizer(double mean, int max_count) {
    if (mean <= 0.0) return 1.0;
    return boost::math::gamma_q(max_count + 1.0, mean);
}

/// Poisson(mean) pmf for n = 0..max_count, renormalized to sum to one.
inline std::vector<double> truncated_poisson_pmf(double mean, int max_count) {
    std::vector<double> pmf(max_count + 1, 0.0);
    if (mean <= 0.0) {
        pmf[0] = 1.0;
        return pmf;
    }
    const double xi = truncated_poisson_normalizer(mean, max_count);
    for (int n = 0; n <= max_count; ++n) {
        pmf[n] = std::exp(n * std::log(mean) - mean - std::lgamma(n + 1.0)) / xi;
    }
    return pmf;
}

/// Generating function E[z^N] of the truncated-Poisson interferer count, and
/// its exponential approximation exp(-mean (1 - z)) / xi.
class IntraCount {
public:
    IntraCount() = default;
    explicit IntraCount(const SystemParams& p)
        : mean_(p.m_a - 1.0), xi_(truncated_poisson_normalizer(mean_, p.n_t - 1)),
          pmf_(truncated_poisson_pmf(mean_, p.n_t - 1)) {}

    double mean() const { return mean_; }
    double xi() const { return xi_; }

    /// Transform value given the single-interferer kernel h = 1 - M.
    double operator()(double h, IntraMode mode) const {
        if (mean_ <= 0.0) return 1.0;
        if (mode == IntraMode::exp_approx) return std::exp(-mean_ * h) / xi_;
        const double z = 1.0 - h;
        double acc = 0.0;
        for (auto it = pmf_.rbegin(); it != pmf_.rend(); ++it) acc = acc * z + *it;
        return acc;
    }

private:
    double mean_ = 0.0;
    double xi_ = 1.0;
    std::vector<double> pmf_{1.0};
};

/// Conditional intra-cluster transform when the serving device is uniform in
/// the cluster and the receiver sits nu0 from its center.
inline double intra_from_kernel(double h, const SystemParams& p, IntraMode mode) {
    return IntraCount(p)(h, mode);
}

inline double intra_conditional(double s, double nu0, const SystemParams& p, IntraMode mode,
                                const Settings& set = {}) {
    return intra_from_kernel(interference_kernel(s, nu0, p.sigma_a, p.alpha, set), p, mode);
}

/// Kernel of the uncorrelated-distance approximation: intra-cluster distances
/// taken i.i.d. Rayleigh with scale sqrt(2) sigma_a.
inline double uncorrelated_kernel(double s, const SystemParams& p, const Settings& set = {}) {
    if (s <= 0.0) return 0.0;
    const double scale = std::numbers::sqrt2 * p.sigma_a;
    auto f = [&](double w) { return attenuation(s, w, p.alpha) * dist::rayleigh_pdf(w, scale); };
    return std::clamp(detail::kernel_integral(f, 0.0, set.envelope_sigmas * scale, s, p.alpha, set.kernel), 0.0, 1.0);
}

inline double intra_uncorrelated(double s, const SystemParams& p, const Settings& set = {}) {
    const double mean = p.m_a - 1.0;
    if (mean <= 0.0) return 1.0;
    return std::exp(-mean * uncorrelated_kernel(s, p, set)) / truncated_poisson_normalizer(mean, p.n_t - 1);
}

/// One family of simultaneously active devices sharing a scattering scale.
struct Subcluster {
    double mean_active;
    double sigma;
};

/// Exponent of the intra-cluster transform in the double-variance model.
inline double intra_double_exponent(double s, double nu0, const SystemParams& p, const Settings& set = {}) {
    double e = 0.0;
    if (p.m_a - 1.0 > 0.0) e += (p.m_a - 1.0) * interference_kernel(s, nu0, p.sigma_a, p.alpha, set);
    if (p.m_b > 0.0) e += p.m_b * interference_kernel(s, nu0, p.sigma_b, p.alpha, set);
    return e;
}

inline double intra_double(double s, double nu0, const SystemParams& p, const Settings& set = {}) {
    return std::exp(-intra_double_exponent(s, nu0, p, set));
}

/// -log of the inter-cluster transform: 2 pi lambda_c times the integral over
/// cluster-center distance nu of (1 - exp(-sum_c m_c phi_c(nu))) nu.
template <std::size_t N>
double inter_exponent(double s, double lambda_c, double alpha, const std::array<Subcluster, N>& parts,
                      const Settings& set = {}) {
    if (s <= 0.0) return 0.0;
    double sigma_max = 0.0;
    bool any = false;
    for (const auto& c : parts) {
        if (c.mean_active > 0.0) {
            any = true;
            sigma_max = std::max(sigma_max, c.sigma);
        }
    }
    if (!any || lambda_c <= 0.0) return 0.0;

    auto integrand = [&](double nu) {
        double e = 0.0;
        for (const auto& c : parts) {
            if (c.mean_active > 0.0) e += c.mean_active * interference_kernel(s, nu, c.sigma, alpha, set);
        }
        return -std::expm1(-e) * nu;
    };
    // beyond nu_c the tail is mapped onto a finite interval; no truncation
    const double nu_c = 10.0 * sigma_max + 2.0 * std::pow(s, 1.0 / alpha);
    const double body = quad::integral(integrand, 0.0, nu_c, set.outer);
    const double tail = quad::integral_to_infinity(integrand, nu_c, nu_c, set.outer);
    return 2.0 * std::numbers::pi * lambda_c * (body + tail);
}

inline double inter(double s, const SystemParams& p, const Settings& set = {}) {
    return std::exp(-inter_exponent<1>(s, p.lambda_c, p.alpha, {Subcluster{p.m_a, p.sigma_a}}, set));
}

inline double inter_double(double s, const SystemParams& p, const Settings& set = {}) {
    return std::exp(-inter_exponent<2>(s, p.lambda_c, p.alpha,
                                       {Subcluster{p.m_a, p.sigma_a}, Subcluster{p.m_b, p.sigma_b}}, set));
}

// ---------------------------------------------------------------------------
// k-Tx exact intra-cluster transform

/// Combinatorics of the k-Tx active set: n interferers drawn from the
/// truncated Poisson, l of them nearer the center than the server.
struct KTxCombinatorics {
    double p = 0.0;   ///< (k-1)/(N_t-1)
    int g_m = 0;      ///< min(n, k-1)
    double xi = 1.0;  ///< truncated-Poisson normalizer
    int n = 0;
    int l = 0;
    double weight = 0.0;  ///< P(L = l | L <= g_m) P(N = n | N <= N_t - 1)
};

/// Probability lattice over (n, l), truncated once the cumulative weight
/// exceeds 1 - tail.
inline std::vector<KTxCombinatorics> ktx_weights(int k, const SystemParams& prm, double tail = 1e-8) {
    std::vector<KTxCombinatorics> out;
    const double mean = prm.m_a - 1.0;
    const int n_max = prm.n_t - 1;
    const double p = prm.n_t > 1 ? static_cast<double>(k - 1) / (prm.n_t - 1) : 0.0;
    const double xi = truncated_poisson_normalizer(mean, n_max);
    const auto pn = truncated_poisson_pmf(mean, n_max);
    double cumulative = 0.0;
    for (int n = 0; n <= n_max; ++n) {
        if (pn[n] == 0.0 && n > 0) continue;
        const int g_m = std::min(n, k - 1);
        // P(L <= g_m) under Binomial(n, p); a zero first shape parameter means
        // the event is certain
        const double norm = (n - g_m == 0) ? 1.0 : dist::reg_inc_beta(1.0 - p, n - g_m, 1.0 + g_m);
        for (int l = 0; l <= g_m; ++l) {
            const double log_binom = std::lgamma(n + 1.0) - std::lgamma(l + 1.0) - std::lgamma(n - l + 1.0);
            double b = std::exp(log_binom);
            b *= (l == 0 ? 1.0 : std::pow(p, l)) * (n - l == 0 ? 1.0 : std::pow(1.0 - p, n - l));
            const double w = b / norm * pn[n];
            if (w > 0.0) out.push_back({p, g_m, xi, n, l, w});
            cumulative += w;
        }
        if (cumulative > 1.0 - tail) break;
    }
    return out;
}

/// Survival kernels for interferers nearer (in) and farther (out) than the
/// server from the cluster center, given nu0 and t_k.
struct KTxKernels {
    double m_in = 1.0;
    double m_out = 1.0;
};

inline KTxKernels ktx_kernels(double s, double nu0, double t_k, int k, const SystemParams& p,
                              const Settings& set = {}) {
    KTxKernels out;
    if (s <= 0.0) return out;
    const double sigma = p.sigma_a;
    auto survive_at = [&](double t) {
        auto g = [&](double theta) {
            const double w = dist::triangle_distance(nu0, t, theta);
            const double wa = std::pow(w, p.alpha);
            return wa / (s + wa);
        };
        return quad::integral(g, 0.0, std::numbers::pi, set.outer) / std::numbers::pi;
    };
    if (k > 1) {
        // inner distances: inverse CDF of the Rayleigh law truncated to (0, t_k)
        const double f_cut = dist::rayleigh_cdf(t_k, sigma);
        auto inner = [&](double v) { return survive_at(dist::rayleigh_quantile(v * f_cut, sigma)); };
        out.m_in = quad::integral(inner, 0.0, 1.0, set.outer);
    }
    if (k < p.n_t) {
        // outer distances: t^2 = t_k^2 + 2 sigma^2 y with y ~ Exp(1)
        auto outer = [&](double y) {
            const double t = std::sqrt(t_k * t_k + 2.0 * sigma * sigma * y);
            return survive_at(t) * std::exp(-y);
        };
        out.m_out = quad::integral(outer, 0.0, 40.0, set.outer);
    }
    return out;
}

inline double intra_ktx_from_kernels(const KTxKernels& kern, const std::vector<KTxCombinatorics>& weights) {
    double acc = 0.0;
    double total = 0.0;
    for (const auto& w : weights) {
        acc += w.weight * std::pow(kern.m_in, w.l) * std::pow(kern.m_out, w.n - w.l);
        total += w.weight;
    }
    return acc / total;
}

inline double intra_ktx_exact(double s, double nu0, double t_k, int k, const SystemParams& p,
                              const Settings& set = {}) {
    if (k < 1 || k > p.n_t) throw ValidationError("rank exceeds N_t");
    if (s <= 0.0) return 1.0;
    return intra_ktx_from_kernels(ktx_kernels(s, nu0, t_k, k, p, set), ktx_weights(k, p));
}

}  // namespace d2d::laplace
