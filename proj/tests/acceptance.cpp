// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "d2dcache/d2dcache.hpp"
#include "support/stats.hpp"

#include <boost/math/distributions/non_central_chi_squared.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace d2d;

namespace {

struct Outcome {
    bool passed = true;
    std::ostringstream detail;
    int failures = 0;

    void expect(bool ok, const std::string& what) {
        if (ok) return;
        passed = false;
        if (++failures <= 4) detail << (failures > 1 ? "; " : "") << what;
    }
};

std::string fmt(double v) { return sweep::format_number(v); }

SystemParams caption(int n, double m_a) {
    SystemParams p;
    p.lambda_c = per_km2(50.0);
    p.sigma_a = p.sigma_b = 30.0;
    p.n_t = p.n_r = n;
    p.m_a = m_a;
    p.alpha = 4.0;
    p.beta = db_to_linear(0.0);
    return p;
}

mc::SimConfig trials(std::uint64_t n, std::uint64_t seed = 1) {
    mc::SimConfig cfg;
    cfg.trials = n;
    cfg.seed = seed;
    cfg.workers = std::max(1u, std::thread::hardware_concurrency());
    return cfg;
}

void criterion1(Outcome& o) {
    double worst = 0.0;
    for (double m : {1.0, 2.0, 4.0, 6.0, 8.0, 10.0}) {
        const auto p = caption(40, m);
        analytic::CoverageEngine engine(p);
        const std::vector<std::pair<PlacementCase, double>> rows{
            {Baseline{}, engine.baseline().value}, {LRx{1}, engine.lrx(1).value}, {LRx{10}, engine.lrx(10).value}};
        for (const auto& [c, value] : rows) {
            const auto sim = mc::simulate_coverage(c, p, trials(100000));
            const double gap = std::abs(value - sim.value);
            const double allowed = 3.0 * *sim.std_error + 0.01;
            worst = std::max(worst, gap / allowed);
            o.expect(gap <= allowed, to_string(c) + " m=" + fmt(m) + " analytic " + fmt(value) + " vs MC " +
                                         fmt(sim.value) + " +- " + fmt(*sim.std_error));
        }
    }
    if (o.passed) o.detail << "worst gap " << fmt(worst) << " of allowance";
}

void criterion2(Outcome& o) {
    double worst_mc = 0.0, worst_fast = 0.0;
    for (double m : {2.0, 6.0, 10.0}) {
        const auto p = caption(30, m);
        analytic::CoverageEngine engine(p);
        for (int k : {1, 5, 10, 20}) {
            const double approx = engine.ktx_approx(k).value;
            const double fast = engine.ktx_fast(k).value;
            const auto sim = mc::simulate_coverage(KTx{k}, p, trials(100000));
            worst_mc = std::max(worst_mc, std::abs(approx - sim.value));
            worst_fast = std::max(worst_fast, std::abs(fast - approx));
            o.expect(std::abs(approx - sim.value) <= 0.03,
                     "k=" + std::to_string(k) + " m=" + fmt(m) + " approx " + fmt(approx) + " vs MC " + fmt(sim.value));
            o.expect(std::abs(fast - approx) <= 0.03,
                     "k=" + std::to_string(k) + " m=" + fmt(m) + " fast " + fmt(fast) + " vs approx " + fmt(approx));
        }
    }
    if (o.passed) o.detail << "max |approx-MC| " << fmt(worst_mc) << ", max |fast-approx| " << fmt(worst_fast);
}

void criterion3(Outcome& o) {
    double worst = 0.0;
    for (double m : {2.0, 6.0}) {
        const auto p = caption(20, m);
        analytic::CoverageEngine engine(p);
        double tx = 0.0, rx = 0.0;
        for (int k = 1; k <= p.n_t; ++k) tx += engine.ktx_approx(k).value;
        for (int l = 1; l <= p.n_r; ++l) rx += engine.lrx(l).value;
        const double base = engine.baseline().value;
        for (double mix : {tx / p.n_t, rx / p.n_r}) {
            worst = std::max(worst, std::abs(mix - base));
            o.expect(std::abs(mix - base) <= 2e-3, "m=" + fmt(m) + " mixture " + fmt(mix) + " vs baseline " + fmt(base));
        }
    }
    if (o.passed) o.detail << "max deviation " << fmt(worst);
}

void criterion4(Outcome& o) {
    auto a = caption(20, 2);
    auto b = caption(20, 6);
    b.beta = db_to_linear(3.0);
    auto c = caption(30, 4);
    c.sigma_a = c.sigma_b = 20.0;
    double margin = 1.0;
    for (const auto& p : {a, b, c}) {
        analytic::CoverageEngine engine(p);
        const double first = engine.ktx_approx(1).value;
        for (int k = 2; k <= p.n_t; ++k) {
            const double v = engine.ktx_approx(k).value;
            o.expect(first >= v, "k=" + std::to_string(k) + " exceeds k=1 at " + describe(p));
        }
        const double last = engine.ktx_approx(p.n_t).value;
        margin = std::min(margin, first - last);
        o.expect(first - last > 0.005, "margin against k=N_t only " + fmt(first - last));
    }
    if (o.passed) o.detail << "smallest k=1 vs k=N_t margin " << fmt(margin);
}

void criterion5(Outcome& o) {
    const auto p = caption(30, 1);
    auto k1 = analytic::optimize_ase(KTx{1}, p, 1, 15);
    auto k10 = analytic::optimize_ase(KTx{10}, p, 1, 15);
    auto k20 = analytic::optimize_ase(KTx{20}, p, 1, 15);
    auto base = analytic::optimize_ase(Baseline{}, p, 1, 15);
    o.expect(k1.m_star >= k10.m_star && k10.m_star >= k20.m_star,
             "argmax " + std::to_string(k1.m_star) + ", " + std::to_string(k10.m_star) + ", " +
                 std::to_string(k20.m_star));
    o.expect(k1.ase_star > base.ase_star && base.ase_star > k20.ase_star,
             "peak ASE " + fmt(k1.ase_star) + ", baseline " + fmt(base.ase_star) + ", k=20 " + fmt(k20.ase_star));
    o.detail << (o.passed ? "" : "; ") << "m* = " << k1.m_star << " / " << k10.m_star << " / " << k20.m_star
             << ", ASE* k=1 " << fmt(k1.ase_star) << " > baseline " << fmt(base.ase_star) << " > k=20 "
             << fmt(k20.ase_star);
}

void criterion6(Outcome& o) {
    double worst_zero = 0.0;
    for (int m = 1; m <= 10; ++m) {
        analytic::CoverageEngine engine(caption(30, m));
        double prev = 0.0;
        for (double g : {0.0, 0.5, 1.0}) {
            const ZipfLibrary lib{40, g};
            const double centric = analytic::hit_cluster_centric(engine, lib);
            const double uniform = analytic::hit_uniform(engine, lib);
            if (g == 0.0) {
                worst_zero = std::max(worst_zero, std::abs(centric - uniform));
                o.expect(std::abs(centric - uniform) <= 2e-3, "gamma=0 m=" + std::to_string(m) + " centric " +
                                                                   fmt(centric) + " vs uniform " + fmt(uniform));
            } else {
                o.expect(centric > uniform, "gamma=" + fmt(g) + " m=" + std::to_string(m) + " centric " +
                                                fmt(centric) + " not above uniform " + fmt(uniform));
            }
            o.expect(centric >= prev, "cluster-centric decreases in gamma at m=" + std::to_string(m));
            prev = centric;
        }
    }
    if (o.passed) o.detail << "gamma=0 max gap " << fmt(worst_zero);
}

SystemParams fig10(double m_a, double m_b, int n_t = 40) {
    auto p = caption(n_t, m_a);
    p.sigma_a = 10.0;
    p.sigma_b = 30.0;
    p.m_b = m_b;
    return p;
}

void criterion7(Outcome& o) {
    // (a) reduction to the single-variance model
    auto red = fig10(4, 0, 500);
    red.sigma_b = red.sigma_a;
    const double thm4 = analytic::coverage_double(true, red).value;
    const double thm3 = analytic::coverage_baseline(red).value;
    o.expect(std::abs(thm4 - thm3) <= 1e-3, "(a) " + fmt(thm4) + " vs " + fmt(thm3));

    // (b) and (c): shifting activity to the sparse subcluster helps, a dense receiver beats a sparse one
    for (double total : {4.0, 8.0}) {
        std::vector<std::pair<double, double>> splits{{total, 0.0}, {total / 2, total / 2}, {1.0, total - 1.0}};
        double prev_dense = -1.0, prev_sparse = -1.0;
        for (const auto& [ma, mb] : splits) {
            const auto p = fig10(ma, mb);
            analytic::CoverageEngine engine(p);
            const double dense = engine.double_variance(true).value;
            const double sparse = engine.double_variance(false).value;
            o.expect(dense > prev_dense && sparse > prev_sparse,
                     "(b) total " + fmt(total) + " m_b=" + fmt(mb) + " does not increase coverage");
            o.expect(dense >= sparse, "(c) m_a=" + fmt(ma) + " m_b=" + fmt(mb) + " dense " + fmt(dense) +
                                          " below sparse " + fmt(sparse));
            prev_dense = dense;
            prev_sparse = sparse;
        }
    }

    // (d) agreement with simulation
    double worst = 0.0;
    for (const auto& [ma, mb] : std::vector<std::pair<double, double>>{{2, 2}, {4, 4}, {2, 6}}) {
        const auto p = fig10(ma, mb);
        for (bool dense : {true, false}) {
            const double v = analytic::coverage_double(dense, p).value;
            const auto sim = mc::simulate_coverage(DoubleVariance{dense, true}, p, trials(100000));
            const double allowed = 3.0 * *sim.std_error + 0.01;
            worst = std::max(worst, std::abs(v - sim.value) / allowed);
            o.expect(std::abs(v - sim.value) <= allowed, "(d) m_a=" + fmt(ma) + " m_b=" + fmt(mb) + " analytic " +
                                                             fmt(v) + " vs MC " + fmt(sim.value));
        }
    }
    if (o.passed) o.detail << "(a) gap " << fmt(std::abs(thm4 - thm3)) << ", (d) worst " << fmt(worst) << " of allowance";
}

void criterion8(Outcome& o) {
    const auto p = caption(40, 5);
    auto dv = fig10(4, 3);
    using laplace::IntraMode;
    const std::vector<std::pair<std::string, std::function<double(double)>>> fns{
        {"intra_ktx_exact", [&](double s) { return laplace::intra_ktx_exact(s, 30.0, 20.0, 4, p); }},
        {"intra_conditional", [&](double s) { return laplace::intra_conditional(s, 30.0, p, IntraMode::exact_sum); }},
        {"intra_conditional(exp)", [&](double s) { return laplace::intra_conditional(s, 30.0, p, IntraMode::exp_approx); }},
        {"intra_uncorrelated", [&](double s) { return laplace::intra_uncorrelated(s, p); }},
        {"inter", [&](double s) { return laplace::inter(s, p); }},
        {"intra_double", [&](double s) { return laplace::intra_double(s, 10.0, dv); }},
        {"inter_double", [&](double s) { return laplace::inter_double(s, dv); }},
    };
    for (const auto& [name, f] : fns) {
        o.expect(std::abs(f(0.0) - 1.0) <= 1e-12, name + " at s=0 is " + fmt(f(0.0)));
        double prev = f(0.0);
        for (int i = 0; i < 30; ++i) {
            const double s = std::pow(10.0, -2.0 + 10.0 * i / 29.0);
            const double v = f(s);
            o.expect(v <= prev + 1e-12 && v > 0.0, name + " increases at s=" + fmt(s));
            prev = v;
        }
    }
    double worst = 0.0;
    for (int i = 0; i < 30; ++i) {
        const double s = std::pow(10.0, -2.0 + 10.0 * i / 29.0);
        worst = std::max(worst, std::abs(laplace::inter(s, p) - laplace::inter_double(s, p)));
    }
    o.expect(worst <= 1e-12, "inter vs inter_double differ by " + fmt(worst));
    if (o.passed) o.detail << "7 evaluators on a 30-point grid; inter vs inter_double max gap " << fmt(worst);
}

double rayleigh_cdf(double v, double sigma) { return 1.0 - std::exp(-v * v / (2 * sigma * sigma)); }

void criterion9(Outcome& o) {
    const quad::Options tight{1e-10, 1e-15, 2000, true};
    auto norm_check = [&](const std::string& name, const std::function<double(double)>& f, double a, double b) {
        const double v = quad::integral(f, a, b, tight);
        o.expect(std::abs(v - 1.0) <= 1e-6, name + " integrates to " + fmt(v));
    };
    norm_check("rayleigh", [](double v) { return dist::rayleigh_pdf(v, 30.0); }, 0.0, 400.0);
    norm_check("rice", [](double y) { return dist::rice_pdf(y, 100.0, 30.0); }, 0.0, 400.0);
    norm_check("order statistic", [](double t) { return dist::order_stat_pdf(t, 7, 40, 30.0); }, 0.0, 400.0);
    norm_check("truncated inner", [](double t) { return dist::truncated_rayleigh_pdf(t, 25.0, dist::Side::inner, 30.0); }, 0.0, 25.0);
    norm_check("truncated outer", [](double t) { return dist::truncated_rayleigh_pdf(t, 25.0, dist::Side::outer, 30.0); }, 25.0, 400.0);
    norm_check("triangle", [](double th) {
        const double w = dist::triangle_distance(30.0, 20.0, th);
        return dist::triangle_pdf(w, 30.0, 20.0) * 30.0 * 20.0 * std::sin(th) / w;
    }, 0.0, std::numbers::pi);

    for (double y : {5.0, 30.0, 80.0}) {
        o.expect(std::abs(dist::rice_pdf(y, 1e-6, 30.0) - dist::rayleigh_pdf(y, 30.0)) <= 1e-12, "rice to rayleigh at " + fmt(y));
    }
    for (double t : {1.0, 20.0, 60.0, 150.0}) {
        double sum = 0.0;
        for (int k = 1; k <= 40; ++k) sum += dist::order_stat_pdf(t, k, 40, 30.0);
        o.expect(std::abs(sum / 40 - dist::rayleigh_pdf(t, 30.0)) <= 1e-10, "order statistic mixture at " + fmt(t));
        const double f = dist::rayleigh_cdf(25.0, 30.0);
        const double total = f * dist::truncated_rayleigh_pdf(t, 25.0, dist::Side::inner, 30.0) +
                             (1 - f) * dist::truncated_rayleigh_pdf(t, 25.0, dist::Side::outer, 30.0);
        o.expect(std::abs(total - dist::rayleigh_pdf(t, 30.0)) <= 1e-14, "truncated total probability at " + fmt(t));
    }
    for (double b : {0.5, 1.0, 2.0}) {
        double prev = 0.0;
        for (int i = 0; i <= 100; ++i) {
            const double q = dist::marcum_q1(0.05 * i, b);
            o.expect(q >= prev - 1e-15, "marcum q1 decreases at b=" + fmt(b));
            prev = q;
        }
    }

    // sampled representative clusters against their closed forms
    const auto p = caption(40, 5);
    mc::SimConfig bare;
    bare.disk_radius = 1.0;
    mc::Rng rng(2718);
    std::vector<double> nu0(100000), served(100000);
    for (auto& v : nu0) v = mc::generate_realization(p, Baseline{}, bare, rng).nu0();
    const double p_nu0 = d2d::testing::ks_pvalue(nu0, [&](double x) { return rayleigh_cdf(x, p.sigma_a); });
    o.expect(p_nu0 > 0.01, "baseline center distance KS p=" + fmt(p_nu0));

    const int l = 10;
    for (auto& v : served) v = mc::generate_realization(p, LRx{l}, bare, rng).serving_distance();
    auto served_cdf = [&](double r) {
        auto f = [&](double t) {
            const boost::math::non_central_chi_squared_distribution<double> chi2(2.0, t * t / (p.sigma_a * p.sigma_a));
            return boost::math::cdf(chi2, r * r / (p.sigma_a * p.sigma_a)) * dist::order_stat_pdf(t, l, p.n_r, p.sigma_a);
        };
        return quad::integral(f, 0.0, 10.0 * p.sigma_a, {1e-9, 1e-14, 400, true});
    };
    const double p_served = d2d::testing::ks_pvalue(served, served_cdf);
    o.expect(p_served > 0.01, "l-Rx serving distance KS p=" + fmt(p_served));

    bool closest = true;
    for (int i = 0; i < 10000; ++i) {
        const auto rz = mc::generate_realization(p, KTx{1}, bare, rng);
        const double s = mc::norm(rz.offsets_t[rz.serving]);
        for (const auto& q : rz.offsets_t) closest = closest && s <= mc::norm(q);
    }
    o.expect(closest, "k-Tx(1) serving device is not always the closest");
    if (o.passed) o.detail << "KS p-values " << fmt(p_nu0) << ", " << fmt(p_served);
}

void criterion10(Outcome& o) {
    sweep::FigureOptions opt;
    opt.trials = 2000;
    opt.seed = 11;
    opt.workers = std::max(1u, std::thread::hardware_concurrency());
    const auto first = sweep::to_csv(sweep::reproduce_figure("fig3", opt).table);
    opt.workers = 1;
    const auto second = sweep::to_csv(sweep::reproduce_figure("fig3", opt).table);
    o.expect(first == second, "fig3 CSV bodies differ between reruns");
    if (o.passed) o.detail << "fig3 rerun, " << std::count(first.begin(), first.end(), '\n') - 1 << " identical rows";
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, void (*)(Outcome&)>> criteria{
        {"analytic vs simulation, baseline and l-Rx", criterion1},
        {"k-Tx approximations tight", criterion2},
        {"rank mixtures reproduce the baseline", criterion3},
        {"closest transmitter maximizes coverage", criterion4},
        {"ASE trade-off orderings", criterion5},
        {"hit probability orderings", criterion6},
        {"double-variance reductions and orderings", criterion7},
        {"transform sanity", criterion8},
        {"distribution suite", criterion9},
        {"determinism", criterion10},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto start = std::chrono::steady_clock::now();
        try {
            criteria[i].second(o);
        } catch (const std::exception& e) {
            o.passed = false;
            o.detail << "exception: " << e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!o.passed) ++failed;
        std::printf("%s  %2zu %s (%s) [%.1fs]\n", o.passed ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.str().c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
