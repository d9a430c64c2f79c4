#include "d2dcache/dist.hpp"
#include "d2dcache/quadrature.hpp"
#include "support/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace d2d;
using namespace d2d::dist;

namespace {

double integrate(const std::function<double(double)>& f, double a, double b, double rel = 1e-10) {
    return quad::integral(f, a, b, quad::Options{rel, 1e-15, 2000, true});
}

}  // namespace

TEST(Rice, ZeroOffsetIsRayleigh) {
    for (double y : {0.0, 1.0, 15.0, 30.0, 90.0, 250.0}) {
        EXPECT_DOUBLE_EQ(rice_pdf(y, 0.0, 30.0), rayleigh_pdf(y, 30.0));
    }
}

TEST(Rice, Normalized) {
    EXPECT_NEAR(integrate([](double y) { return rice_pdf(y, 100.0, 30.0); }, 0.0, 400.0), 1.0, 1e-6);
}

TEST(Rice, FiniteFarFromOrigin) {
    const double sigma = 30.0, y = 3000.0 * sigma, z = 3000.0 * sigma;
    const double v = rice_pdf(y, z, sigma);
    ASSERT_TRUE(std::isfinite(v));
    // log-space oracle with the leading Hankel term for I0
    const double x = y * z / (sigma * sigma);
    const double log_oracle = std::log(y / (sigma * sigma)) - (y - z) * (y - z) / (2 * sigma * sigma) -
                              0.5 * std::log(2 * std::numbers::pi * x) + std::log1p(1.0 / (8.0 * x));
    EXPECT_NEAR(std::log(v), log_oracle, 1e-9);
}

TEST(Rice, ConvergesToRayleighAsOffsetVanishes) {
    for (double y : {5.0, 30.0, 80.0}) {
        EXPECT_NEAR(rice_pdf(y, 1e-6, 30.0), rayleigh_pdf(y, 30.0), 1e-12);
    }
}

TEST(Rice, RejectsNegativeArguments) {
    EXPECT_THROW(rice_pdf(-1.0, 1.0, 1.0), std::domain_error);
    EXPECT_THROW(rice_pdf(1.0, -1.0, 1.0), std::domain_error);
    EXPECT_THROW(rice_pdf(1.0, 1.0, 0.0), std::domain_error);
}

TEST(Rayleigh, ModeAtSigma) {
    const double sigma = 30.0;
    EXPECT_GT(rayleigh_pdf(sigma, sigma), rayleigh_pdf(sigma * 0.99, sigma));
    EXPECT_GT(rayleigh_pdf(sigma, sigma), rayleigh_pdf(sigma * 1.01, sigma));
}

TEST(Rayleigh, Normalized) {
    EXPECT_NEAR(integrate([](double v) { return rayleigh_pdf(v, 30.0); }, 0.0, 400.0), 1.0, 1e-9);
}

TEST(Rayleigh, RejectsNegatives) {
    EXPECT_THROW(rayleigh_pdf(-1.0, 1.0), std::domain_error);
    EXPECT_THROW(rayleigh_pdf(1.0, -1.0), std::domain_error);
}

TEST(Triangle, ZeroOutsideSupport) {
    EXPECT_EQ(triangle_pdf(4.0, 10.0, 5.0), 0.0);
    EXPECT_EQ(triangle_pdf(5.0, 10.0, 5.0), 0.0);
    EXPECT_EQ(triangle_pdf(15.0, 10.0, 5.0), 0.0);
    EXPECT_EQ(triangle_pdf(16.0, 10.0, 5.0), 0.0);
    EXPECT_GT(triangle_pdf(10.0, 10.0, 5.0), 0.0);
}

TEST(Triangle, NormalizedThroughAngle) {
    // w = w(theta) has density triangle_pdf; dw/dtheta = nu0 t sin(theta) / w
    for (auto [nu0, t] : {std::pair{30.0, 10.0}, std::pair{5.0, 40.0}, std::pair{20.0, 20.0}}) {
        auto f = [&](double theta) {
            const double w = triangle_distance(nu0, t, theta);
            return triangle_pdf(w, nu0, t) * nu0 * t * std::sin(theta) / w;
        };
        EXPECT_NEAR(integrate(f, 0.0, std::numbers::pi), 1.0, 1e-6);
    }
}

TEST(Triangle, MatchesSampledDistances) {
    const double nu0 = 30.0, t = 20.0;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
    std::vector<double> w(1000000);
    for (auto& x : w) {
        const double phi = angle(rng);
        x = std::hypot(nu0 + t * std::cos(phi), t * std::sin(phi));
    }
    // CDF through the angular form: P(W <= w) = theta(w) / pi
    auto cdf = [&](double x) {
        if (x <= std::abs(nu0 - t)) return 0.0;
        if (x >= nu0 + t) return 1.0;
        return std::acos((nu0 * nu0 + t * t - x * x) / (2 * nu0 * t)) / std::numbers::pi;
    };
    EXPECT_GT(d2d::testing::ks_pvalue(w, cdf), 0.01);
}

TEST(Triangle, RayleighMixtureIsRician) {
    const double sigma = 30.0, nu0 = 25.0;
    for (double w : {5.0, 20.0, 40.0, 80.0}) {
        // mix over t ~ Rayleigh(sigma) in the angular form: t enters through w(theta)
        auto over_t = [&](double t) {
            if (t <= std::abs(w - nu0) || t >= w + nu0) return 0.0;
            return rayleigh_pdf(t, sigma) * triangle_pdf(w, nu0, t);
        };
        // the inner density has integrable endpoint singularities in t; split at them
        const double lo = std::abs(w - nu0), hi = w + nu0;
        auto g = [&](double phi) {
            const double t = 0.5 * (lo + hi) - 0.5 * (hi - lo) * std::cos(phi);
            return over_t(t) * 0.5 * (hi - lo) * std::sin(phi);
        };
        EXPECT_NEAR(integrate(g, 0.0, std::numbers::pi, 1e-9), rice_pdf(w, nu0, sigma), 1e-5);
    }
}

TEST(OrderStatistics, SingleSampleIsRayleigh) {
    for (double t : {1.0, 20.0, 70.0}) EXPECT_NEAR(order_stat_pdf(t, 1, 1, 30.0), rayleigh_pdf(t, 30.0), 1e-15);
}

TEST(OrderStatistics, RankAverageIsRayleigh) {
    const int n = 40;
    for (double t : {0.5, 10.0, 30.0, 60.0, 120.0}) {
        double sum = 0.0;
        for (int k = 1; k <= n; ++k) sum += order_stat_pdf(t, k, n, 30.0);
        EXPECT_NEAR(sum / n, rayleigh_pdf(t, 30.0), 1e-10);
    }
}

TEST(OrderStatistics, LargeCountsStayFinite) {
    EXPECT_TRUE(std::isfinite(order_stat_pdf(30.0, 250, 500, 30.0)));
    EXPECT_NEAR(integrate([](double t) { return order_stat_pdf(t, 250, 500, 30.0); }, 0.0, 300.0), 1.0, 1e-6);
}

TEST(OrderStatistics, RejectsRankOutOfRange) {
    EXPECT_THROW(order_stat_pdf(1.0, 0, 5, 1.0), std::domain_error);
    EXPECT_THROW(order_stat_pdf(1.0, 6, 5, 1.0), std::domain_error);
}

TEST(OrderStatistics, MatchesSortedSamples) {
    const int n = 30, k = 5;
    const double sigma = 30.0;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, sigma);
    std::vector<double> kth(100000), draw(n);
    for (auto& x : kth) {
        for (auto& d : draw) d = std::hypot(g(rng), g(rng));
        std::nth_element(draw.begin(), draw.begin() + (k - 1), draw.end());
        x = draw[k - 1];
    }
    EXPECT_GT(d2d::testing::ks_pvalue(kth, [&](double t) { return order_stat_cdf(t, k, n, sigma); }), 0.01);
}

TEST(OrderStatistics, QuantileInvertsCdf) {
    for (double q : {1e-12, 0.1, 0.5, 0.9, 1.0 - 1e-9}) {
        const double t = order_stat_quantile(q, 7, 30, 30.0);
        EXPECT_NEAR(order_stat_cdf(t, 7, 30, 30.0), q, 1e-9);
    }
    EXPECT_TRUE(std::isfinite(order_stat_tail_quantile(1e-16, 30, 30, 30.0)));
}

TEST(TruncatedRayleigh, SupportAndNormalization) {
    EXPECT_EQ(truncated_rayleigh_pdf(25.0, 25.0, Side::inner, 30.0), 0.0);
    EXPECT_EQ(truncated_rayleigh_pdf(40.0, 25.0, Side::inner, 30.0), 0.0);
    EXPECT_EQ(truncated_rayleigh_pdf(10.0, 25.0, Side::outer, 30.0), 0.0);
    auto inner = [](double t) { return truncated_rayleigh_pdf(t, 25.0, Side::inner, 30.0); };
    auto outer = [](double t) { return truncated_rayleigh_pdf(t, 25.0, Side::outer, 30.0); };
    EXPECT_NEAR(integrate(inner, 0.0, 25.0), 1.0, 1e-8);
    EXPECT_NEAR(integrate(outer, 25.0, 400.0), 1.0, 1e-8);
}

TEST(TruncatedRayleigh, TotalProbability) {
    const double cut = 25.0, sigma = 30.0;
    const double f = rayleigh_cdf(cut, sigma);
    for (double t : {3.0, 24.9, 25.1, 60.0, 200.0}) {
        const double mixed = f * truncated_rayleigh_pdf(t, cut, Side::inner, sigma) +
                             (1.0 - f) * truncated_rayleigh_pdf(t, cut, Side::outer, sigma);
        EXPECT_NEAR(mixed, rayleigh_pdf(t, sigma), 1e-15);
    }
}

TEST(MarcumQ, Boundaries) {
    for (double a : {0.0, 0.3, 2.0, 7.0}) EXPECT_EQ(marcum_q1(a, 0.0), 1.0);
    for (double b : {0.1, 1.0, 3.0}) EXPECT_DOUBLE_EQ(marcum_q1(0.0, b), std::exp(-0.5 * b * b));
}

TEST(MarcumQ, MatchesDefiningIntegral) {
    const double a = 1.0, b = 2.0;
    auto f = [&](double y) { return y * std::exp(-0.5 * (y - a) * (y - a)) * bessel_i0_scaled(a * y); };
    EXPECT_NEAR(marcum_q1(a, b), integrate(f, b, 40.0, 1e-13), 1e-10);
}

TEST(MarcumQ, NondecreasingInFirstArgument) {
    for (double b : {0.5, 1.0, 2.0}) {
        double prev = 0.0;
        for (int i = 0; i <= 100; ++i) {
            const double q = marcum_q1(0.05 * i, b);
            EXPECT_GE(q, prev - 1e-15);
            EXPECT_LE(q, 1.0);
            prev = q;
        }
    }
}

TEST(IncompleteBeta, Examples) {
    for (double x : {0.0, 0.2, 0.7, 1.0}) EXPECT_NEAR(reg_inc_beta(x, 1.0, 1.0), x, 1e-15);
    EXPECT_EQ(reg_inc_beta(1.0, 3.5, 0.7), 1.0);
    // t (1 - t)^4 has integral B(2, 5) = 1/30 over (0, 1)
    const double oracle = 30.0 * integrate([](double t) { return t * std::pow(1.0 - t, 4); }, 0.0, 0.3, 1e-13);
    EXPECT_NEAR(reg_inc_beta(0.3, 2.0, 5.0), oracle, 1e-10);
    EXPECT_THROW(reg_inc_beta(1.5, 1.0, 1.0), std::domain_error);
    EXPECT_THROW(reg_inc_beta(0.5, 0.0, 1.0), std::domain_error);
}

TEST(IncompleteBeta, MonotoneInX) {
    double prev = 0.0;
    for (int i = 0; i <= 50; ++i) {
        const double v = reg_inc_beta(i / 50.0, 2.5, 4.0);
        EXPECT_GE(v, prev);
        prev = v;
    }
}

TEST(Zipf, Examples) {
    for (int j = 1; j <= 4; ++j) EXPECT_DOUBLE_EQ(zipf_pmf(j, {4, 0.0}), 0.25);
    EXPECT_NEAR(zipf_pmf(1, {2, 1.0}), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(zipf_pmf(2, {2, 1.0}), 1.0 / 3.0, 1e-15);
    double sum = 0.0;
    for (int j = 1; j <= 40; ++j) sum += zipf_pmf(j, {40, 0.8});
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_THROW(zipf_pmf(0, {4, 1.0}), std::domain_error);
    EXPECT_THROW(zipf_pmf(5, {4, 1.0}), std::domain_error);
}

TEST(Zipf, HeadMass) {
    double head = 0.0;
    for (int j = 1; j <= 30; ++j) head += zipf_pmf(j, {40, 0.8});
    EXPECT_NEAR(zipf_head_mass(30, {40, 0.8}), head, 1e-12);
    EXPECT_DOUBLE_EQ(zipf_head_mass(30, {40, 0.0}), 0.75);
}
