#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "copula_bounds/common.hpp"

namespace copula_bounds {

struct IntegrationConfig {
    double truncation_quantile = 1e-9;  // mass ignored in each marginal tail
    double abs_tol = 1e-8;
    double rel_tol = 1e-6;
    int max_depth = 15;  // adaptive bisection depth per panel

    void validate() const {
        if (!(truncation_quantile > 0.0) || !(abs_tol > 0.0) || !(rel_tol > 0.0) ||
            max_depth < 1)
            throw invalid_input("integration config: tolerances must be positive");
    }
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;  // estimate reported by the adaptive rule

    bool within(const IntegrationConfig& cfg) const {
        return error <= std::max(cfg.abs_tol, cfg.rel_tol * std::abs(value));
    }
};

namespace detail {

// One 15-point Gauss-Kronrod panel; the error estimate is the (conservative)
// discrepancy against the embedded 7-point Gauss rule.  Node and weight tables
// come from boost; the adaptive driver is ours because boost's only offers a
// purely estimate-relative tolerance, which never converges on panels whose
// integral is dominated by rounding noise around zero.
template <typename F>
QuadratureResult gk15_panel(const F& f, double a, double b) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    using G7 = boost::math::quadrature::gauss<double, 7>;
    const auto& x = GK::abscissa();   // 8 nonnegative nodes, even slots shared with G7
    const auto& wk = GK::weights();
    const auto& wg = G7::weights();
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    const double f0 = f(mid);
    double k15 = wk[0] * f0;
    double g7 = wg[0] * f0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double pair = f(mid + half * x[i]) + f(mid - half * x[i]);
        k15 += wk[i] * pair;
        if (i % 2 == 0) g7 += wg[i / 2] * pair;
    }
    return {half * k15, half * std::abs(k15 - g7)};
}

template <typename F>
void adaptive_gk15(const F& f, double a, double b, double abs_floor, double rel_tol, int depth,
                   QuadratureResult& out) {
    const auto panel = gk15_panel(f, a, b);
    if (depth <= 0 || panel.error <= std::max(abs_floor, rel_tol * std::abs(panel.value))) {
        out.value += panel.value;
        out.error += panel.error;
        return;
    }
    const double mid = 0.5 * (a + b);
    adaptive_gk15(f, a, mid, 0.5 * abs_floor, rel_tol, depth - 1, out);
    adaptive_gk15(f, mid, b, 0.5 * abs_floor, rel_tol, depth - 1, out);
}

}  // namespace detail

template <typename F>
QuadratureResult integrate(F&& f, double a, double b, const IntegrationConfig& cfg = {}) {
    cfg.validate();
    if (!(a < b)) return {0.0, 0.0};
    QuadratureResult r;
    detail::adaptive_gk15(f, a, b, cfg.abs_tol, cfg.rel_tol, cfg.max_depth, r);
    return r;
}

// Integrate while forcing panel boundaries at the given interior breakpoints
// (kinks of the integrand: strikes, cell edges, prescription points).  The
// absolute error budget is split across panels by width.
template <typename F>
QuadratureResult integrate_with_breakpoints(F&& f, double a, double b,
                                            std::vector<double> breakpoints,
                                            const IntegrationConfig& cfg = {}) {
    cfg.validate();
    if (!(a < b)) return {0.0, 0.0};
    breakpoints.erase(std::remove_if(breakpoints.begin(), breakpoints.end(),
                                     [&](double x) { return !(x > a && x < b); }),
                      breakpoints.end());
    breakpoints.push_back(a);
    breakpoints.push_back(b);
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
    QuadratureResult total;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        const double lo = breakpoints[i], hi = breakpoints[i + 1];
        detail::adaptive_gk15(f, lo, hi, cfg.abs_tol * (hi - lo) / (b - a), cfg.rel_tol,
                              cfg.max_depth, total);
    }
    return total;
}

}  // namespace copula_bounds
