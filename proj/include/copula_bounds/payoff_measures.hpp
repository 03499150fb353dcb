#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "copula_bounds/core.hpp"
#include "copula_bounds/normal.hpp"
#include "copula_bounds/quadrature.hpp"

namespace copula_bounds {

// ---- payoff taxonomy ----------------------------------------------------------

enum class PayoffKind {
    digital_put_on_max,
    digital_call_on_min,
    call_on_min,
    put_on_min,
    call_on_max,
    put_on_max,
    generic,
};

inline const char* to_string(PayoffKind k) {
    switch (k) {
        case PayoffKind::digital_put_on_max: return "digital-put-on-max";
        case PayoffKind::digital_call_on_min: return "digital-call-on-min";
        case PayoffKind::call_on_min: return "call-on-min";
        case PayoffKind::put_on_min: return "put-on-min";
        case PayoffKind::call_on_max: return "call-on-max";
        case PayoffKind::put_on_max: return "put-on-max";
        case PayoffKind::generic: return "generic";
    }
    return "?";
}

inline PayoffKind payoff_kind_from_string(std::string_view s) {
    for (auto k : {PayoffKind::digital_put_on_max, PayoffKind::digital_call_on_min,
                   PayoffKind::call_on_min, PayoffKind::put_on_min, PayoffKind::call_on_max,
                   PayoffKind::put_on_max, PayoffKind::generic})
        if (s == to_string(k)) return k;
    throw invalid_input("unknown payoff kind '" + std::string(s) + "'");
}

// Direction of the volume signs of f itself (plain) or of -f (negated).
enum class Tonicity {
    delta_monotonic,
    delta_antitonic,
    negated_monotonic,  // -f is delta-monotonic
    negated_antitonic,  // -f is delta-antitonic
};

inline const char* to_string(Tonicity t) {
    switch (t) {
        case Tonicity::delta_monotonic: return "delta-monotonic";
        case Tonicity::delta_antitonic: return "delta-antitonic";
        case Tonicity::negated_monotonic: return "negated-monotonic";
        case Tonicity::negated_antitonic: return "negated-antitonic";
    }
    return "?";
}

// ---- marginal distributions ----------------------------------------------------

struct MarginalDistribution {
    std::function<double(double)> cdf;       // nondecreasing, right-continuous on [0, inf)
    std::function<double(double)> quantile;  // generalized inverse inf{x : F(x) >= u}
    std::vector<double> kinks;               // density breakpoints (quadrature panel edges)

    // Smallest point carrying all but q of the mass; integration truncates here.
    double upper_support(double q) const { return quantile(1.0 - q); }
};

inline MarginalDistribution uniform_marginal(double a, double b) {
    if (!(a >= 0.0 && b > a)) throw invalid_input("uniform marginal needs 0 <= a < b");
    MarginalDistribution m;
    m.cdf = [a, b](double x) { return std::clamp((x - a) / (b - a), 0.0, 1.0); };
    m.quantile = [a, b](double u) { return a + std::clamp(u, 0.0, 1.0) * (b - a); };
    m.kinks = {a, b};
    return m;
}

// Martingale lognormal: S = spot * exp(-vol^2/2 + vol Z), so E[S] = spot.
inline MarginalDistribution lognormal_marginal(double spot, double vol) {
    if (!(spot > 0.0 && vol > 0.0)) throw invalid_input("lognormal marginal needs spot, vol > 0");
    MarginalDistribution m;
    m.cdf = [spot, vol](double x) {
        if (x <= 0.0) return 0.0;
        return normal_cdf((std::log(x / spot) + 0.5 * vol * vol) / vol);
    };
    m.quantile = [spot, vol](double u) {
        if (u <= 0.0) return 0.0;
        return spot * std::exp(-0.5 * vol * vol + vol * normal_quantile(u));
    };
    return m;
}

// Equal mass 1/n on each cell [edges[k], edges[k+1]); continuous piecewise-linear CDF.
inline MarginalDistribution piecewise_uniform_marginal(std::vector<double> edges) {
    const int n = static_cast<int>(edges.size()) - 1;
    if (n < 1) throw invalid_input("piecewise-uniform marginal needs at least one cell");
    for (int k = 0; k < n; ++k)
        if (!(edges[k] < edges[k + 1]) || edges[0] < 0.0)
            throw invalid_input("piecewise-uniform marginal edges must increase within [0, inf)");
    MarginalDistribution m;
    m.kinks = edges;
    m.cdf = [edges, n](double x) {
        if (x <= edges.front()) return 0.0;
        if (x >= edges.back()) return 1.0;
        const auto it = std::upper_bound(edges.begin(), edges.end(), x);
        const int k = static_cast<int>(it - edges.begin()) - 1;
        return (k + (x - edges[k]) / (edges[k + 1] - edges[k])) / n;
    };
    m.quantile = [edges, n](double u) {
        u = std::clamp(u, 0.0, 1.0);
        const double t = u * n;
        const int k = std::min(static_cast<int>(t), n - 1);
        return edges[k] + (t - k) * (edges[k + 1] - edges[k]);
    };
    return m;
}

// ---- generic payoffs -------------------------------------------------------------

// Signed measure supported on a parametric curve in R_+^{|I|}, plus point atoms.
// Covers every closed form used here: diagonal segments for min/max payoffs,
// the anti-diagonal line for two-asset baskets, point masses for digitals.
struct CurveMeasure {
    double t_lo = 0.0;
    double t_hi = 0.0;
    std::function<Point(double)> path;     // null => atoms only
    std::function<double(double)> weight;  // density w.r.t. dt; null => 1
    std::vector<double> t_breaks;          // parameter values of integrand kinks
    std::vector<std::pair<Point, double>> atoms;
};

struct GenericPayoff {
    Tonicity tonicity = Tonicity::delta_monotonic;
    double at_origin = 0.0;                                // f(0,...,0)
    std::vector<std::function<double(double)>> on_axis;    // x -> f(0,..,x,..,0), slot i
    std::map<std::vector<int>, CurveMeasure> subset_measures;  // sorted subsets, |I| >= 2
    std::function<double(std::span<const double>)> pointwise;  // optional, for simulation
};

struct PayoffDescriptor {
    PayoffKind kind = PayoffKind::generic;
    double strike = 0.0;
    std::optional<GenericPayoff> generic;

    Tonicity tonicity() const {
        switch (kind) {
            case PayoffKind::digital_put_on_max: return Tonicity::delta_antitonic;
            case PayoffKind::digital_call_on_min: return Tonicity::delta_monotonic;
            case PayoffKind::call_on_min: return Tonicity::delta_monotonic;
            case PayoffKind::put_on_min: return Tonicity::negated_monotonic;
            case PayoffKind::call_on_max: return Tonicity::negated_antitonic;
            case PayoffKind::put_on_max: return Tonicity::delta_antitonic;
            case PayoffKind::generic:
                if (!generic) throw invalid_input("generic payoff descriptor lacks its spec");
                return generic->tonicity;
        }
        throw invalid_input("bad payoff kind");
    }

    void validate(int d) const {
        if (!(strike >= 0.0)) throw invalid_input("payoff strike must be >= 0");
        if (kind == PayoffKind::generic) {
            if (!generic) throw invalid_input("generic payoff descriptor lacks its spec");
            if (static_cast<int>(generic->on_axis.size()) != d)
                throw invalid_input("generic payoff: need one on-axis restriction per marginal");
            for (const auto& h : generic->on_axis)
                if (!h) throw invalid_input("generic payoff: empty on-axis restriction");
            for (const auto& [subset, meas] : generic->subset_measures) {
                if (subset.size() < 2 || !std::is_sorted(subset.begin(), subset.end()) ||
                    std::adjacent_find(subset.begin(), subset.end()) != subset.end() ||
                    subset.front() < 0 || subset.back() >= d)
                    throw invalid_input("generic payoff: malformed measure subset");
                if (meas.path && !(meas.t_hi >= meas.t_lo))
                    throw invalid_input("generic payoff: curve range must be finite");
                for (const auto& [pt, w] : meas.atoms) {
                    (void)w;
                    if (pt.size() != subset.size())
                        throw invalid_input("generic payoff: atom dimension mismatch");
                }
            }
        }
    }
};

// Text form used by config files and the command line: "kind:K".
inline PayoffDescriptor parse_payoff(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos)
        throw invalid_input("payoff text must look like kind:strike, got '" + std::string(text) +
                            "'");
    PayoffDescriptor f;
    f.kind = payoff_kind_from_string(text.substr(0, colon));
    if (f.kind == PayoffKind::generic)
        throw invalid_input("generic payoffs cannot be built from text form");
    const auto num = text.substr(colon + 1);
    const char* begin = num.data();
    const char* end = num.data() + num.size();
    const auto [ptr, ec] = std::from_chars(begin, end, f.strike);
    if (ec != std::errc() || ptr != end || !(f.strike >= 0.0))
        throw invalid_input("bad strike in payoff text '" + std::string(text) + "'");
    return f;
}

inline std::string to_string(const PayoffDescriptor& f) {
    return std::string(to_string(f.kind)) + ":" + std::to_string(f.strike);
}

// Basket payoff (sum of assets vs strike).  Its volume signs are mixed for three
// or more assets, so no orthant-monotonicity contract is available there; the
// two-asset case is supermodular and admitted as a generic payoff.
inline PayoffDescriptor make_basket_payoff(int d, double strike) {
    check_dimension(d);
    if (!(strike >= 0.0)) throw invalid_input("basket strike must be >= 0");
    if (d >= 3)
        throw unsupported_payoff_order(
            "basket payoffs in dimension >= 3 are neither delta-monotonic nor delta-antitonic");
    GenericPayoff g;
    g.tonicity = Tonicity::delta_monotonic;
    g.at_origin = 0.0;
    for (int i = 0; i < 2; ++i)
        g.on_axis.push_back([strike](double x) { return std::max(x - strike, 0.0); });
    CurveMeasure line;  // second distributional derivative of (x1+x2-K)^+
    line.t_lo = 0.0;
    line.t_hi = strike;
    line.path = [strike](double t) { return Point{t, strike - t}; };
    g.subset_measures.emplace(std::vector<int>{0, 1}, std::move(line));
    g.pointwise = [strike](std::span<const double> xs) {
        double sum = 0.0;
        for (double x : xs) sum += x;
        return std::max(sum - strike, 0.0);
    };
    PayoffDescriptor f;
    f.kind = PayoffKind::generic;
    f.strike = strike;
    f.generic = std::move(g);
    return f;
}

// ---- quasi-expectation ------------------------------------------------------------

namespace detail {

inline std::vector<double> merged_kinks(const std::vector<MarginalDistribution>& marginals,
                                        std::initializer_list<double> extra = {}) {
    std::vector<double> pts(extra);
    for (const auto& m : marginals) pts.insert(pts.end(), m.kinks.begin(), m.kinks.end());
    return pts;
}

// Quantile-ladder breakpoints.  Heavy-tailed marginals make the integration
// range orders of magnitude wider than the region that carries mass; a single
// adaptive panel can then place every node past a sharply supported integrand
// and accept 0 (the Gauss/Kronrod discrepancy cannot see what no node samples).
// Panels pinned at marginal quantile decades keep every scale sampled.
inline void append_quantile_ladder(std::vector<double>& pts,
                                   const std::vector<MarginalDistribution>& marginals) {
    static constexpr double qs[] = {0.5, 0.1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
    for (const auto& m : marginals)
        for (double q : qs) {
            pts.push_back(m.quantile(q));
            pts.push_back(m.upper_support(q));
        }
}

// Integral over [lo, inf) truncated at the marginal tail quantile, with one
// escalation by 1e-3 in the truncation mass; still-growing tails are refused.
template <typename G>
QuadratureResult upper_tail_integral(G&& g, double lo,
                                     const std::vector<MarginalDistribution>& marginals,
                                     std::vector<double> breakpoints,
                                     const IntegrationConfig& cfg) {
    double x1 = lo, x2 = lo, x3 = lo;
    for (const auto& m : marginals) {
        x1 = std::max(x1, m.upper_support(cfg.truncation_quantile));
        x2 = std::max(x2, m.upper_support(cfg.truncation_quantile * 1e-3));
        x3 = std::max(x3, m.upper_support(cfg.truncation_quantile * 1e-6));
    }
    append_quantile_ladder(breakpoints, marginals);
    auto result = integrate_with_breakpoints(g, lo, x1, std::move(breakpoints), cfg);
    if (x2 > x1) {
        const auto tail = integrate(g, x1, x2, cfg);
        const double tol = std::max(cfg.abs_tol, cfg.rel_tol * std::abs(result.value));
        if (std::abs(tail.value) > tol) {
            result.value += tail.value;
            result.error += tail.error;
            const auto probe = integrate(g, x2, x3, cfg);
            if (std::abs(probe.value) > tol)
                throw integrability_failure(
                    "tail integral keeps growing past the escalated truncation point");
            result.error += std::abs(probe.value);
        } else {
            result.error += std::abs(tail.value);
        }
    }
    return result;
}

inline std::vector<int> mask_to_subset(std::uint32_t mask) {
    std::vector<int> subset;
    for (int i = 0; mask >> i; ++i)
        if ((mask >> i) & 1) subset.push_back(i);
    return subset;
}

// Survival value of the J-margin composed with the marginals on the diagonal.
inline double diag_margin_survival(const DependenceFunction& q, const std::vector<int>& subset,
                                   const std::vector<MarginalDistribution>& marginals, double x) {
    Point v(subset.size());
    for (std::size_t k = 0; k < subset.size(); ++k) v[k] = marginals[subset[k]].cdf(x);
    return margin_survival_value(q, subset, v);
}

}  // namespace detail

// pi_f with the quadrature error estimate attached.
inline QuadratureResult quasi_expectation_with_error(
    const PayoffDescriptor& f, const DependenceFunction& q,
    const std::vector<MarginalDistribution>& marginals, const IntegrationConfig& cfg = {});

// Quasi-expectation operator: expectation of the payoff against the dependence
// function, defined through the survival-integral recursion so that proper
// quasi-copulas are admissible integrators.
inline double quasi_expectation(const PayoffDescriptor& f, const DependenceFunction& q,
                                const std::vector<MarginalDistribution>& marginals,
                                const IntegrationConfig& cfg = {}) {
    return quasi_expectation_with_error(f, q, marginals, cfg).value;
}

// phi^I: the recursive building block of the quasi-expectation (generic kind).
// |I| = 1 integrates the axis restriction against its marginal; |I| = 2 adds the
// two singles minus the origin value to the survival integral; larger subsets
// add the alternating sum over proper subsets, the empty set contributing
// f(0,...,0) with sign (-1)^{|I|+1}.
inline double phi_recursion(const PayoffDescriptor& f, const DependenceFunction& q,
                            const std::vector<MarginalDistribution>& marginals,
                            const std::vector<int>& index_set,
                            const IntegrationConfig& cfg = {});

namespace detail {

struct PhiEvaluator {
    const GenericPayoff& g;
    const DependenceFunction& q;
    const std::vector<MarginalDistribution>& marginals;
    const IntegrationConfig& cfg;
    std::map<std::uint32_t, QuadratureResult> memo;

    QuadratureResult survival_against_measure(std::uint32_t mask) {
        const auto subset = mask_to_subset(mask);
        const auto it = g.subset_measures.find(subset);
        if (it == g.subset_measures.end()) {
            std::string key;
            for (int i : subset) key += std::to_string(i) + ",";
            throw invalid_input("generic payoff: no marginal measure for subset {" + key + "}");
        }
        const CurveMeasure& meas = it->second;
        QuadratureResult r;
        for (const auto& [pt, w] : meas.atoms) {
            Point v(subset.size());
            for (std::size_t k = 0; k < subset.size(); ++k)
                v[k] = marginals[subset[k]].cdf(pt[k]);
            r.value += w * margin_survival_value(q, subset, v);
        }
        if (meas.path && meas.t_hi > meas.t_lo) {
            auto integrand = [&](double t) {
                const Point x = meas.path(t);
                Point v(subset.size());
                for (std::size_t k = 0; k < subset.size(); ++k)
                    v[k] = marginals[subset[k]].cdf(x[k]);
                const double s = margin_survival_value(q, subset, v);
                return meas.weight ? meas.weight(t) * s : s;
            };
            auto part =
                integrate_with_breakpoints(integrand, meas.t_lo, meas.t_hi, meas.t_breaks, cfg);
            r.value += part.value;
            r.error += part.error;
        }
        return r;
    }

    QuadratureResult single(int i) {
        // quantile-space form: atoms in the marginal need no special casing
        auto integrand = [&](double u) { return g.on_axis[i](marginals[i].quantile(u)); };
        // decade breakpoints keep narrowly supported integrands visible
        std::vector<double> ubreaks{1e-3, 1e-2, 0.1, 0.5, 0.9, 0.99, 0.999};
        for (double x : marginals[i].kinks) ubreaks.push_back(marginals[i].cdf(x));
        const double u1 = 1.0 - cfg.truncation_quantile;
        const double u2 = 1.0 - cfg.truncation_quantile * 1e-3;
        auto r = integrate_with_breakpoints(integrand, 0.0, u1, std::move(ubreaks), cfg);
        const auto tail = integrate(integrand, u1, u2, cfg);
        const double tol = std::max(cfg.abs_tol, cfg.rel_tol * std::abs(r.value));
        if (std::abs(tail.value) > tol) {
            r.value += tail.value;
            r.error += tail.error;
            const auto probe =
                integrate(integrand, u2, 1.0 - cfg.truncation_quantile * 1e-6, cfg);
            if (std::abs(probe.value) > tol)
                throw integrability_failure(
                    "axis integral keeps growing past the escalated truncation point");
            r.error += std::abs(probe.value);
        } else {
            r.error += std::abs(tail.value);
        }
        return r;
    }

    QuadratureResult phi(std::uint32_t mask) {
        if (auto it = memo.find(mask); it != memo.end()) return it->second;
        QuadratureResult r;
        const int n = std::popcount(mask);
        if (n == 0) {
            r.value = g.at_origin;
        } else if (n == 1) {
            r = single(std::countr_zero(mask));
        } else {
            r = survival_against_measure(mask);
            for (std::uint32_t sub = (mask - 1) & mask;; sub = (sub - 1) & mask) {
                const auto part = phi(sub);
                const int sign = ((n + 1 - std::popcount(sub)) % 2 == 0) ? 1 : -1;
                r.value += sign * part.value;
                r.error += part.error;
                if (sub == 0) break;
            }
        }
        memo.emplace(mask, r);
        return r;
    }
};

}  // namespace detail

inline double phi_recursion(const PayoffDescriptor& f, const DependenceFunction& q,
                            const std::vector<MarginalDistribution>& marginals,
                            const std::vector<int>& index_set, const IntegrationConfig& cfg) {
    const int d = q.dimension();
    if (f.kind != PayoffKind::generic)
        throw invalid_input("phi recursion is defined for generic payoff descriptors");
    f.validate(d);
    if (static_cast<int>(marginals.size()) != d)
        throw invalid_input("marginal count must match dimension");
    if (index_set.empty() || !std::is_sorted(index_set.begin(), index_set.end()) ||
        std::adjacent_find(index_set.begin(), index_set.end()) != index_set.end() ||
        index_set.front() < 0 || index_set.back() >= d)
        throw invalid_input("phi recursion: malformed index subset");
    std::uint32_t mask = 0;
    for (int i : index_set) mask |= std::uint32_t{1} << i;
    detail::PhiEvaluator ev{*f.generic, q, marginals, cfg, {}};
    return ev.phi(mask).value;
}

inline QuadratureResult quasi_expectation_with_error(
    const PayoffDescriptor& f, const DependenceFunction& q,
    const std::vector<MarginalDistribution>& marginals, const IntegrationConfig& cfg) {
    const int d = q.dimension();
    cfg.validate();
    f.validate(d);
    if (static_cast<int>(marginals.size()) != d)
        throw invalid_input("marginal count must match dimension");
    const double K = f.strike;

    auto diag_point = [&](double x) {
        Point u(d);
        for (int i = 0; i < d; ++i) u[i] = marginals[i].cdf(x);
        return u;
    };

    switch (f.kind) {
        case PayoffKind::digital_put_on_max:
            // the measure sits at (K,...,K) with parity signs; the alternating
            // survival sum collapses to the plain copula-scale value
            return {copula_value(q, diag_point(K)), 0.0};
        case PayoffKind::digital_call_on_min:
            return {survival_value(q, diag_point(K)), 0.0};
        case PayoffKind::call_on_min: {
            auto g = [&](double x) { return survival_value(q, diag_point(x)); };
            return detail::upper_tail_integral(g, K, marginals,
                                               detail::merged_kinks(marginals, {K}), cfg);
        }
        case PayoffKind::put_on_min: {
            auto g = [&](double x) { return survival_value(q, diag_point(x)); };
            auto bps = detail::merged_kinks(marginals);
            detail::append_quantile_ladder(bps, marginals);
            auto r = integrate_with_breakpoints(g, 0.0, K, std::move(bps), cfg);
            return {K - r.value, r.error};
        }
        case PayoffKind::call_on_max: {
            QuadratureResult total;
            for (std::uint32_t mask = 1; mask < (std::uint32_t{1} << d); ++mask) {
                const int n = std::popcount(mask);
                if (n == 1) {
                    const int i = std::countr_zero(mask);
                    auto g = [&](double x) { return 1.0 - marginals[i].cdf(x); };
                    const auto r = detail::upper_tail_integral(
                        g, K, {marginals[i]}, detail::merged_kinks({marginals[i]}, {K}), cfg);
                    total.value += r.value;
                    total.error += r.error;
                    continue;
                }
                const auto subset = detail::mask_to_subset(mask);
                auto g = [&](double x) {
                    return detail::diag_margin_survival(q, subset, marginals, x);
                };
                const auto r = detail::upper_tail_integral(
                    g, K, marginals, detail::merged_kinks(marginals, {K}), cfg);
                const int sign = (n % 2 == 0) ? -1 : 1;
                total.value += sign * r.value;
                total.error += r.error;
            }
            return total;
        }
        case PayoffKind::put_on_max: {
            QuadratureResult total{-(d - 1) * K, 0.0};
            for (std::uint32_t mask = 1; mask < (std::uint32_t{1} << d); ++mask) {
                const int n = std::popcount(mask);
                if (n == 1) {
                    const int i = std::countr_zero(mask);
                    auto g = [&](double x) { return marginals[i].cdf(x); };
                    const std::vector<MarginalDistribution> one{marginals[i]};
                    auto bps = detail::merged_kinks(one);
                    detail::append_quantile_ladder(bps, one);
                    const auto r = integrate_with_breakpoints(g, 0.0, K, std::move(bps), cfg);
                    total.value += r.value;
                    total.error += r.error;
                    continue;
                }
                const auto subset = detail::mask_to_subset(mask);
                auto g = [&](double x) {
                    return detail::diag_margin_survival(q, subset, marginals, x);
                };
                auto bps = detail::merged_kinks(marginals);
                detail::append_quantile_ladder(bps, marginals);
                const auto r = integrate_with_breakpoints(g, 0.0, K, std::move(bps), cfg);
                const int sign = (n % 2 == 0) ? 1 : -1;
                total.value += sign * r.value;
                total.error += r.error;
            }
            return total;
        }
        case PayoffKind::generic: {
            detail::PhiEvaluator ev{*f.generic, q, marginals, cfg, {}};
            return ev.phi((std::uint32_t{1} << d) - 1);
        }
    }
    throw invalid_input("bad payoff kind");
}

// ---- integrability ------------------------------------------------------------------

struct IntegrabilityReport {
    bool integrable = true;
    std::vector<int> subset;  // offending margin subset when not integrable
    int marginal = -1;        // offending marginal index
    std::string detail;
};

// Finiteness probe for the diagonal terms the operator integrates: compares the
// contribution between the default and the escalated truncation points and flags
// configurations whose tails keep growing.
inline IntegrabilityReport check_integrability(const PayoffDescriptor& f,
                                               const std::vector<MarginalDistribution>& marginals,
                                               const IntegrationConfig& cfg = {}) {
    cfg.validate();
    const int d = static_cast<int>(marginals.size());
    f.validate(d);
    IntegrabilityReport report;

    auto probe_upper = [&](const std::function<double(double)>& h, int i,
                           std::vector<int> subset) {
        // u-space: int h(F^{-1}(u)) du near u = 1
        auto integrand = [&](double u) { return std::abs(h(marginals[i].quantile(u))); };
        const double u1 = 1.0 - cfg.truncation_quantile;
        const double u2 = 1.0 - cfg.truncation_quantile * 1e-3;
        const auto main = integrate(integrand, 0.0, u1, cfg);
        const auto tail = integrate(integrand, u1, u2, cfg);
        if (std::abs(tail.value) > std::max(cfg.abs_tol, cfg.rel_tol * std::abs(main.value))) {
            report.integrable = false;
            report.subset = std::move(subset);
            report.marginal = i;
            report.detail = "tail of the diagonal integrand is not negligible after truncation";
            return false;
        }
        return true;
    };

    switch (f.kind) {
        case PayoffKind::digital_put_on_max:
        case PayoffKind::digital_call_on_min:
        case PayoffKind::put_on_min:
        case PayoffKind::put_on_max:
            return report;  // bounded payoffs
        case PayoffKind::call_on_min:
        case PayoffKind::call_on_max: {
            std::vector<int> full(d);
            for (int i = 0; i < d; ++i) full[i] = i;
            const double K = f.strike;
            for (int i = 0; i < d; ++i)
                if (!probe_upper([K](double x) { return std::max(x - K, 0.0); }, i, full))
                    return report;
            return report;
        }
        case PayoffKind::generic: {
            for (int i = 0; i < d; ++i)
                if (!probe_upper(f.generic->on_axis[i], i, {i})) return report;
            return report;
        }
    }
    return report;
}

// ---- orthant-order monotonicity -----------------------------------------------------

struct DominanceReport {
    OrthantComparison comparison;  // sampled dominance between the two integrators
    Tonicity tonicity;
    bool hypothesis_held = false;   // the orthant order required by the tonicity
    bool conclusion_holds = false;  // pi ordering in the direction the tonicity implies
    bool reversed = false;          // true when the implied ordering is pi1 >= pi2
    double pi1 = 0.0;
    double pi2 = 0.0;
    double tolerance = 0.0;
};

// Checks the ordering contract: lower-orthant dominance transfers to the
// quasi-expectation for antitonic payoffs, upper-orthant dominance for monotonic
// ones, with the inequality reversed when only -f has the stated tonicity.
inline DominanceReport dominance_check(const PayoffDescriptor& f, const DependenceFunction& q1,
                                       const DependenceFunction& q2,
                                       const std::vector<MarginalDistribution>& marginals,
                                       const IntegrationConfig& cfg = {}, int resolution = 8) {
    DominanceReport rep;
    rep.comparison = orthant_compare(q1, q2, resolution);
    rep.tonicity = f.tonicity();
    const bool needs_lo = rep.tonicity == Tonicity::delta_antitonic ||
                          rep.tonicity == Tonicity::negated_antitonic;
    rep.reversed = rep.tonicity == Tonicity::negated_antitonic ||
                   rep.tonicity == Tonicity::negated_monotonic;
    rep.hypothesis_held = needs_lo ? rep.comparison.lo_dominated : rep.comparison.uo_dominated;
    const auto r1 = quasi_expectation_with_error(f, q1, marginals, cfg);
    const auto r2 = quasi_expectation_with_error(f, q2, marginals, cfg);
    rep.pi1 = r1.value;
    rep.pi2 = r2.value;
    rep.tolerance = r1.error + r2.error + cfg.abs_tol;
    rep.conclusion_holds = rep.reversed ? rep.pi1 >= rep.pi2 - rep.tolerance
                                        : rep.pi1 <= rep.pi2 + rep.tolerance;
    return rep;
}

}  // namespace copula_bounds
