#pragma once

// Distance densities and the special functions behind them.
//
// Every density here is a function of distances in meters and returns a
// density in 1/m. The Rician density is evaluated through the exponentially
// scaled Bessel function so that arguments y z / sigma^2 in the tens of
// thousands stay finite.

#include "d2dcache/model.hpp"

#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace d2d::dist {

/// Truncation of Gaussian/Rayleigh envelopes, in standard deviations.
/// At 8 sigma the Rayleigh density has fallen below 1e-12 of its peak.
inline constexpr double kEnvelopeSigmas = 8.0;

namespace detail {
using fast_policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;
}  // namespace detail

/// exp(-x) I0(x) for x >= 0.
inline double bessel_i0_scaled(double x) {
    x = std::abs(x);
    if (x < 500.0) return boost::math::cyl_bessel_i(0, x, detail::fast_policy()) * std::exp(-x);
    // Hankel asymptotic series; at x >= 500 the fifth term is below 1e-17
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 12; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= odd * odd / (8.0 * k * x);
        sum += term;
        if (term < 1e-17) break;
    }
    return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

inline double rayleigh_cdf(double v, double sigma) { return -std::expm1(-v * v / (2.0 * sigma * sigma)); }
inline double rayleigh_ccdf(double v, double sigma) { return std::exp(-v * v / (2.0 * sigma * sigma)); }
inline double rayleigh_quantile(double q, double sigma) { return sigma * std::sqrt(-2.0 * std::log1p(-q)); }

inline double rayleigh_pdf(double v, double sigma) {
    if (v < 0.0 || !(sigma > 0.0)) throw std::domain_error("rayleigh_pdf: negative distance or scale");
    const double s2 = sigma * sigma;
    return v / s2 * std::exp(-v * v / (2.0 * s2));
}

/// Density of |z + g| where |z| = z and g is a 2-D Gaussian with per-axis std sigma.
inline double rice_pdf(double y, double z, double sigma) {
    if (y < 0.0 || z < 0.0 || !(sigma > 0.0)) throw std::domain_error("rice_pdf: negative argument");
    if (y == 0.0) return 0.0;
    const double s2 = sigma * sigma;
    const double d = y - z;
    return y / s2 * std::exp(-d * d / (2.0 * s2)) * bessel_i0_scaled(y * z / s2);
}

/// Density of |x0 + a| given |x0| = nu0, |a| = t, uniform relative angle.
/// Zero outside (|nu0 - t|, nu0 + t).
inline double triangle_pdf(double w, double nu0, double t) {
    if (!(w > std::abs(nu0 - t)) || !(w < nu0 + t)) return 0.0;
    const double c = (nu0 * nu0 + t * t - w * w) / (2.0 * nu0 * t);
    const double root = std::sqrt(1.0 - c * c);
    if (!(root > 0.0)) return 0.0;
    return w / (nu0 * t) / (std::numbers::pi * root);
}

/// Law-of-cosines distance for the angular form of triangle_pdf:
/// with theta uniform on (0, pi) this has density triangle_pdf(., nu0, t).
inline double triangle_distance(double nu0, double t, double theta) {
    const double w2 = nu0 * nu0 + t * t - 2.0 * nu0 * t * std::cos(theta);
    return std::sqrt(std::max(w2, 0.0));
}

/// Density of the k-th smallest of n i.i.d. Rayleigh(sigma) samples.
inline double order_stat_pdf(double t, int k, int n, double sigma) {
    if (k < 1 || k > n) throw std::domain_error("order_stat_pdf: rank out of range");
    if (t < 0.0) throw std::domain_error("order_stat_pdf: negative distance");
    if (t == 0.0) return 0.0;
    const double F = rayleigh_cdf(t, sigma);
    const double log_prefactor = std::lgamma(n + 1.0) - std::lgamma(static_cast<double>(k)) -
                                 std::lgamma(static_cast<double>(n - k + 1));
    const double log_ccdf = -t * t / (2.0 * sigma * sigma);
    double log_val = log_prefactor + std::log(rayleigh_pdf(t, sigma)) + (n - k) * log_ccdf;
    if (k > 1) log_val += (k - 1) * std::log(F);
    return std::exp(log_val);
}

/// P(T_k <= t) for the k-th order statistic of n Rayleigh samples.
inline double order_stat_cdf(double t, int k, int n, double sigma) {
    if (t <= 0.0) return 0.0;
    return boost::math::ibeta(static_cast<double>(k), static_cast<double>(n - k + 1), rayleigh_cdf(t, sigma));
}

/// t with P(T_k > t) = tail; 1 - F(T_k) is Beta(n - k + 1, k).
inline double order_stat_tail_quantile(double tail, int k, int n, double sigma) {
    const double v = boost::math::ibeta_inv(static_cast<double>(n - k + 1), static_cast<double>(k), tail);
    return sigma * std::sqrt(-2.0 * std::log(v));
}

inline double order_stat_quantile(double q, int k, int n, double sigma) {
    if (q > 0.5) return order_stat_tail_quantile(1.0 - q, k, n, sigma);
    const double u = boost::math::ibeta_inv(static_cast<double>(k), static_cast<double>(n - k + 1), q);
    return rayleigh_quantile(u, sigma);
}

enum class Side { inner, outer };

/// Rayleigh density conditioned on lying below (inner) or above (outer) t_cut.
inline double truncated_rayleigh_pdf(double t, double t_cut, Side side, double sigma) {
    if (t < 0.0) return 0.0;
    if (side == Side::inner) {
        if (t >= t_cut) return 0.0;
        return rayleigh_pdf(t, sigma) / rayleigh_cdf(t_cut, sigma);
    }
    if (t <= t_cut) return 0.0;
    // ratio of Gaussians computed as one exponential so deep tails stay finite
    const double s2 = sigma * sigma;
    return t / s2 * std::exp(-(t * t - t_cut * t_cut) / (2.0 * s2));
}

/// First-order Marcum Q function, evaluated as the upper tail of a noncentral
/// chi-square with two degrees of freedom and noncentrality a^2 at b^2.
inline double marcum_q1(double a, double b) {
    if (a < 0.0 || b < 0.0) throw std::domain_error("marcum_q1: negative argument");
    if (b == 0.0) return 1.0;
    if (a == 0.0) return std::exp(-0.5 * b * b);
    const boost::math::non_central_chi_squared_distribution<double> chi2(2.0, a * a);
    return boost::math::cdf(boost::math::complement(chi2, b * b));
}

/// Regularized incomplete beta I(x; a, b).
inline double reg_inc_beta(double x, double a, double b) {
    if (!(x >= 0.0 && x <= 1.0) || !(a > 0.0) || !(b > 0.0)) {
        throw std::domain_error("reg_inc_beta: argument out of domain");
    }
    return boost::math::ibeta(a, b, x);
}

inline double zipf_pmf(int j, const ZipfLibrary& lib) {
    if (j < 1 || j > lib.j_total) throw std::domain_error("zipf_pmf: rank out of range");
    double norm = 0.0;
    for (int i = lib.j_total; i >= 1; --i) norm += std::pow(static_cast<double>(i), -lib.gamma);
    return std::pow(static_cast<double>(j), -lib.gamma) / norm;
}

/// Probability mass of the n_max most popular files.
inline double zipf_head_mass(int n_max, const ZipfLibrary& lib) {
    std::vector<double> w(lib.j_total);
    double norm = 0.0;
    for (int i = lib.j_total; i >= 1; --i) {
        w[i - 1] = std::pow(static_cast<double>(i), -lib.gamma);
        norm += w[i - 1];
    }
    double head = 0.0;
    for (int i = std::min(n_max, lib.j_total); i >= 1; --i) head += w[i - 1];
    return head / norm;
}

}  // namespace d2d::dist
