#pragma once

// Globally adaptive 21-point Gauss-Kronrod quadrature and a log-log cubic
// interpolation table used to cache smooth one-dimensional transforms.

#include "d2dcache/model.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <sstream>
#include <vector>

namespace d2d::quad {

struct Options {
    double rel_tol = 1e-7;
    double abs_tol = 1e-13;
    int max_intervals = 400;
    bool throw_on_failure = true;
};

struct Result {
    double value = 0.0;
    double abs_error = 0.0;
    int evaluations = 0;
    bool converged = true;
};

namespace detail {

// Kronrod abscissae; odd indices are the 10-point Gauss nodes.
inline constexpr double xgk[11] = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
inline constexpr double wgk[11] = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208343174997, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
inline constexpr double wg[5] = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gk21(F& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double resk = fc * wgk[10];
    double resg = 0.0;
    double fv1[10], fv2[10];
    for (int j = 0; j < 10; ++j) {
        const double dx = half * xgk[j];
        fv1[j] = f(center - dx);
        fv2[j] = f(center + dx);
        const double pair = fv1[j] + fv2[j];
        resk += wgk[j] * pair;
        if (j % 2 == 1) resg += wg[j / 2] * pair;
    }
    // QUADPACK error heuristic
    const double reskh = resk * 0.5;
    double resasc = wgk[10] * std::abs(fc - reskh);
    for (int j = 0; j < 10; ++j) {
        resasc += wgk[j] * (std::abs(fv1[j] - reskh) + std::abs(fv2[j] - reskh));
    }
    resasc *= std::abs(half);
    double err = std::abs((resk - resg) * half);
    if (resasc != 0.0 && err != 0.0) {
        err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    }
    return {a, b, resk * half, err};
}

}  // namespace detail

/// Integrates f over the finite interval [a, b].
template <class F>
Result integrate(F&& f, double a, double b, const Options& opt = {}) {
    Result out;
    if (a == b) return out;
    std::priority_queue<detail::Segment> heap;
    auto first = detail::gk21(f, a, b);
    out.evaluations = 21;
    double total = first.value;
    double err = first.error;
    heap.push(first);
    int intervals = 1;
    while (err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total))) {
        if (intervals >= opt.max_intervals) {
            out.converged = false;
            break;
        }
        auto worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        auto left = detail::gk21(f, worst.a, mid);
        auto right = detail::gk21(f, mid, worst.b);
        out.evaluations += 42;
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++intervals;
    }
    // re-sum to shed accumulated cancellation
    total = 0.0;
    err = 0.0;
    while (!heap.empty()) {
        total += heap.top().value;
        err += heap.top().error;
        heap.pop();
    }
    out.value = total;
    out.abs_error = err;
    if (!out.converged && opt.throw_on_failure) {
        std::ostringstream os;
        os << "quadrature did not converge on [" << a << ", " << b << "]: estimate " << total
           << ", error " << err;
        throw NonConvergenceError(os.str());
    }
    return out;
}

template <class F>
double integral(F&& f, double a, double b, const Options& opt = {}) {
    return integrate(std::forward<F>(f), a, b, opt).value;
}

/// Integrates f over [a, inf) through the substitution x = a + c (1 - t) / t.
template <class F>
double integral_to_infinity(F&& f, double a, double scale, const Options& opt = {}) {
    auto g = [&](double t) {
        if (t <= 0.0) return 0.0;
        const double x = a + scale * (1.0 - t) / t;
        return f(x) * scale / (t * t);
    };
    return integrate(g, 0.0, 1.0, opt).value;
}

/// Cubic B-spline of log(y) against log(x) on a uniform grid, with linear
/// extrapolation in log-log space. Stores y = 0 exactly when every sample is 0.
class LogLogTable {
public:
    LogLogTable() = default;

    template <class F>
    LogLogTable(F&& fn, double x_lo, double x_hi, int nodes) : lo_(std::log(x_lo)), hi_(std::log(x_hi)) {
        step_ = (hi_ - lo_) / (nodes - 1);
        std::vector<double> ys(nodes);
        bool any_zero = false;
        for (int i = 0; i < nodes; ++i) {
            const double y = fn(std::exp(lo_ + i * step_));
            if (!(y > 0.0)) any_zero = true;
            ys[i] = y;
        }
        if (any_zero) {
            all_zero_ = std::all_of(ys.begin(), ys.end(), [](double y) { return y == 0.0; });
            if (!all_zero_) throw NonConvergenceError("log-log table sampled a nonpositive value");
            return;
        }
        for (auto& y : ys) y = std::log(y);
        spline_ = boost::math::interpolators::cardinal_cubic_b_spline<double>(ys.begin(), ys.end(), lo_, step_);
        slope_lo_ = spline_.prime(lo_);
        slope_hi_ = spline_.prime(hi_);
        y_lo_ = ys.front();
        y_hi_ = ys.back();
    }

    double operator()(double x) const {
        if (all_zero_) return 0.0;
        const double lx = std::log(x);
        if (lx <= lo_) return std::exp(y_lo_ + slope_lo_ * (lx - lo_));
        if (lx >= hi_) return std::exp(y_hi_ + slope_hi_ * (lx - hi_));
        return std::exp(spline_(lx));
    }

    bool empty() const { return step_ == 0.0 && !all_zero_; }

private:
    double lo_ = 0.0, hi_ = 0.0, step_ = 0.0;
    bool all_zero_ = false;
    boost::math::interpolators::cardinal_cubic_b_spline<double> spline_;
    double slope_lo_ = 0.0, slope_hi_ = 0.0, y_lo_ = 0.0, y_hi_ = 0.0;
};

}  // namespace d2d::quad
