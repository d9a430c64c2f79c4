#pragma once

// A quick pass over the library's invariants, small enough to run from the
// command line in well under a minute.

#include "d2dcache/analytic.hpp"
#include "d2dcache/dist.hpp"
#include "d2dcache/laplace.hpp"
#include "d2dcache/montecarlo.hpp"
#include "d2dcache/quadrature.hpp"
#include "d2dcache/sweep.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace d2d::selftest {

using sweep::Check;

inline std::vector<Check> run() {
    std::vector<Check> out;
    auto record = [&](const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
        try {
            auto [ok, detail] = body();
            out.push_back({name, ok, detail});
        } catch (const std::exception& e) {
            out.push_back({name, false, e.what()});
        }
    };
    auto err = [](double e) { return "max error " + sweep::format_number(e); };

    record("densities integrate to one", [&] {
        double worst = 0.0;
        worst = std::max(worst, std::abs(quad::integral([](double v) { return dist::rayleigh_pdf(v, 30.0); }, 0.0, 400.0) - 1.0));
        worst = std::max(worst, std::abs(quad::integral([](double y) { return dist::rice_pdf(y, 100.0, 30.0); }, 0.0, 400.0) - 1.0));
        for (auto side : {dist::Side::inner, dist::Side::outer}) {
            auto f = [&](double t) { return dist::truncated_rayleigh_pdf(t, 25.0, side, 30.0); };
            const double v = side == dist::Side::inner ? quad::integral(f, 0.0, 25.0) : quad::integral(f, 25.0, 400.0);
            worst = std::max(worst, std::abs(v - 1.0));
        }
        return std::pair{worst < 1e-6, err(worst)};
    });

    record("order statistics average to the Rayleigh density", [&] {
        double worst = 0.0;
        for (double t : {1.0, 10.0, 30.0, 60.0, 120.0}) {
            double sum = 0.0;
            for (int k = 1; k <= 40; ++k) sum += dist::order_stat_pdf(t, k, 40, 30.0);
            worst = std::max(worst, std::abs(sum / 40.0 - dist::rayleigh_pdf(t, 30.0)));
        }
        return std::pair{worst < 1e-10, err(worst)};
    });

    record("Marcum Q1 nondecreasing in its first argument", [&] {
        bool ok = true;
        for (double b : {0.5, 1.0, 2.0}) {
            double prev = -1.0;
            for (int i = 0; i <= 50; ++i) {
                const double q = dist::marcum_q1(0.1 * i, b);
                ok = ok && q >= prev - 1e-15;
                prev = q;
            }
        }
        return std::pair{ok, std::string()};
    });

    record("transforms equal one at s = 0 and decrease in s", [&] {
        SystemParams p;
        bool ok = laplace::inter(0.0, p) == 1.0 && laplace::intra_ktx_exact(0.0, 30.0, 10.0, 1, p) == 1.0;
        double prev_inter = 1.0, prev_intra = 1.0;
        for (int i = 0; i < 30; ++i) {
            const double s = std::pow(10.0, -2.0 + 10.0 * i / 29.0);
            const double a = laplace::inter(s, p);
            const double b = laplace::intra_conditional(s, 30.0, p, laplace::IntraMode::exact_sum);
            ok = ok && a <= prev_inter + 1e-12 && b <= prev_intra + 1e-12 && a > 0.0 && b > 0.0;
            prev_inter = a;
            prev_intra = b;
        }
        return std::pair{ok, std::string()};
    });

    record("inter-cluster transform is the single-subcluster case of the double one", [&] {
        SystemParams p;
        double worst = 0.0;
        for (double s : {1e2, 1e5, 1e7}) worst = std::max(worst, std::abs(laplace::inter(s, p) - laplace::inter_double(s, p)));
        return std::pair{worst <= 1e-12, err(worst)};
    });

    record("rank mixtures reproduce the baseline", [&] {
        SystemParams p;
        p.n_t = p.n_r = 8;
        p.m_a = 3;
        analytic::CoverageEngine e(p);
        const double base = e.baseline().value;
        double k_mix = 0.0, l_mix = 0.0;
        for (int k = 1; k <= p.n_t; ++k) k_mix += e.ktx_approx(k).value / p.n_t;
        for (int l = 1; l <= p.n_r; ++l) l_mix += e.lrx(l).value / p.n_r;
        const double worst = std::max(std::abs(k_mix - base), std::abs(l_mix - base));
        return std::pair{worst < 2e-3, err(worst)};
    });

    record("simulation is identical across worker counts", [&] {
        SystemParams p;
        mc::SimConfig one;
        one.trials = 2000;
        mc::SimConfig many = one;
        many.workers = 3;
        const double a = mc::simulate_coverage(Baseline{}, p, one).value;
        const double b = mc::simulate_coverage(Baseline{}, p, many).value;
        return std::pair{a == b, sweep::format_number(a) + " vs " + sweep::format_number(b)};
    });

    return out;
}

}  // namespace d2d::selftest
