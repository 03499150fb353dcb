#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "copula_bounds/payoff_measures.hpp"

namespace copula_bounds {

// ---- correlation matrices ------------------------------------------------------

class CorrelationMatrix {
  public:
    explicit CorrelationMatrix(int d) : d_(d), a_(static_cast<std::size_t>(d) * d, 0.0) {
        check_dimension(d);
        for (int i = 0; i < d; ++i) a_[idx(i, i)] = 1.0;
    }

    CorrelationMatrix(int d, std::vector<double> entries) : d_(d), a_(std::move(entries)) {
        check_dimension(d);
        if (a_.size() != static_cast<std::size_t>(d) * d)
            throw invalid_input("correlation matrix: entry count must be d*d");
        validate();
    }

    static CorrelationMatrix equicorrelated(int d, double rho) {
        CorrelationMatrix r(d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (i != j) r.a_[r.idx(i, j)] = rho;
        r.validate();
        return r;
    }

    // entries (0,1), (0,2), ..., (0,d-1), (1,2), ... row by row
    static CorrelationMatrix from_upper_triangle(int d, std::span<const double> upper) {
        CorrelationMatrix r(d);
        if (upper.size() != static_cast<std::size_t>(d) * (d - 1) / 2)
            throw invalid_input("correlation matrix: need d*(d-1)/2 upper-triangle entries");
        std::size_t k = 0;
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) {
                r.a_[r.idx(i, j)] = upper[k];
                r.a_[r.idx(j, i)] = upper[k];
                ++k;
            }
        r.validate();
        return r;
    }

    int dimension() const { return d_; }
    double operator()(int i, int j) const { return a_[idx(i, j)]; }

    // Smallest eigenvalue by bisection on "R - t I is positive definite"
    // (pivot test); exact enough for conditioning thresholds.
    double min_eigenvalue() const {
        double lo = 2.0 - d_, hi = static_cast<double>(d_);
        for (int it = 0; it < 80 && hi - lo > 1e-15 * d_; ++it) {
            const double mid = 0.5 * (lo + hi);
            (is_positive_definite_shifted(mid) ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    // Lower-triangular factor L with L L^T = R; semidefinite matrices get
    // zero-clamped pivots (the comonotone limit rho -> 1 stays usable).
    std::vector<double> cholesky_lower() const {
        std::vector<double> L(static_cast<std::size_t>(d_) * d_, 0.0);
        for (int j = 0; j < d_; ++j) {
            double diag = a_[idx(j, j)];
            for (int k = 0; k < j; ++k) diag -= L[idx(j, k)] * L[idx(j, k)];
            if (diag < -kPsdTol) throw ill_conditioned("correlation matrix is not PSD");
            const double piv = std::sqrt(std::max(diag, 0.0));
            L[idx(j, j)] = piv;
            for (int i = j + 1; i < d_; ++i) {
                double off = a_[idx(i, j)];
                for (int k = 0; k < j; ++k) off -= L[idx(i, k)] * L[idx(j, k)];
                L[idx(i, j)] = piv > 0.0 ? off / piv : 0.0;
            }
        }
        return L;
    }

  private:
    static constexpr double kPsdTol = 1e-10;

    std::size_t idx(int i, int j) const {
        return static_cast<std::size_t>(i) * d_ + static_cast<std::size_t>(j);
    }

    void validate() const {
        for (int i = 0; i < d_; ++i) {
            if (a_[idx(i, i)] != 1.0)
                throw invalid_input("correlation matrix: diagonal must be exactly 1");
            for (int j = 0; j < d_; ++j) {
                const double v = a_[idx(i, j)];
                if (!(v >= -1.0 && v <= 1.0))
                    throw invalid_input("correlation matrix: entries must lie in [-1, 1]");
                if (v != a_[idx(j, i)])
                    throw invalid_input("correlation matrix: must be symmetric");
            }
        }
        if (!(min_eigenvalue() >= -kPsdTol))
            throw invalid_input("correlation matrix: not positive semidefinite");
    }

    bool is_positive_definite_shifted(double t) const {
        // pivots of the LDL^T factorization of R - t I; any nonpositive pivot
        // (or breakdown) means the shifted matrix is not positive definite
        std::vector<double> L(static_cast<std::size_t>(d_) * d_, 0.0);
        std::vector<double> D(d_, 0.0);
        for (int j = 0; j < d_; ++j) {
            double dj = a_[idx(j, j)] - t;
            for (int k = 0; k < j; ++k) dj -= L[idx(j, k)] * L[idx(j, k)] * D[k];
            if (!(dj > 0.0)) return false;
            D[j] = dj;
            for (int i = j + 1; i < d_; ++i) {
                double off = a_[idx(i, j)];
                for (int k = 0; k < j; ++k) off -= L[idx(i, k)] * L[idx(j, k)] * D[k];
                L[idx(i, j)] = off / dj;
            }
        }
        return true;
    }

    int d_;
    std::vector<double> a_;
};

// ---- model ---------------------------------------------------------------------

// Zero-rate lognormal model S_i = s_i exp(-v_i^2/2 + v_i X_i) with standard
// normal X and the given correlation; v_i = 1 reproduces the reference
// normalization S_i = s_i exp(-1/2 + X_i).
struct BSModel {
    std::vector<double> spots;
    std::vector<double> vols;
    CorrelationMatrix corr;

    BSModel(std::vector<double> spots_, CorrelationMatrix corr_)
        : BSModel(std::move(spots_), {}, std::move(corr_)) {}

    BSModel(std::vector<double> spots_, std::vector<double> vols_, CorrelationMatrix corr_)
        : spots(std::move(spots_)), vols(std::move(vols_)), corr(std::move(corr_)) {
        if (vols.empty()) vols.assign(spots.size(), 1.0);
        const int d = static_cast<int>(spots.size());
        check_dimension(d);
        if (static_cast<int>(vols.size()) != d || corr.dimension() != d)
            throw invalid_input("model: spots, vols and correlation dimensions must agree");
        for (double s : spots)
            if (!(s > 0.0)) throw invalid_input("model: spots must be positive");
        for (double v : vols)
            if (!(v > 0.0)) throw invalid_input("model: vols must be positive");
    }

    int dimension() const { return static_cast<int>(spots.size()); }

    MarginalDistribution marginal(int i) const { return lognormal_marginal(spots[i], vols[i]); }

    std::vector<MarginalDistribution> marginals() const {
        std::vector<MarginalDistribution> out;
        for (int i = 0; i < dimension(); ++i) out.push_back(marginal(i));
        return out;
    }

    // z with P(S_i <= K) = Phi(z)
    double z_score(int i, double strike) const {
        if (!(strike > 0.0)) throw invalid_input("strike must be positive");
        return (std::log(strike / spots[i]) + 0.5 * vols[i] * vols[i]) / vols[i];
    }
};

// ---- Gaussian cumulative probabilities -----------------------------------------

namespace detail {

inline constexpr double kNormalTailCut = 8.5;  // |z| beyond this is 0/1 at 1e-17
inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// integrand of the correlation-derivative identity after r = sin(theta):
// d Phi2 / d theta = exp(-(h^2 - 2 h k sin t + k^2) / (2 cos^2 t)) / (2 pi)
inline double bvn_theta_integrand(double h, double k, double t) {
    const double c = std::cos(t);
    return std::exp(-(h * h - 2.0 * h * k * std::sin(t) + k * k) / (2.0 * c * c));
}

}  // namespace detail

inline double bivariate_normal_cdf(double h, double k, double rho) {
    if (!(rho >= -1.0 && rho <= 1.0)) throw invalid_input("correlation must lie in [-1, 1]");
    if (std::isnan(h) || std::isnan(k)) throw invalid_input("bivariate cdf: NaN argument");
    if (h > k) std::swap(h, k);  // symmetric in (h, k); canonical order keeps it exact
    if (h >= detail::kNormalTailCut) return normal_cdf(k);
    if (k >= detail::kNormalTailCut) return normal_cdf(h);
    if (h <= -detail::kNormalTailCut || k <= -detail::kNormalTailCut) return 0.0;
    if (rho >= 1.0 - 1e-15) return normal_cdf(std::min(h, k));
    if (rho <= -1.0 + 1e-15) return std::max(0.0, normal_cdf(h) + normal_cdf(k) - 1.0);

    // fixed 20-node Gauss-Legendre integrates the analytic theta-form to
    // ~1e-15 for |rho| <= 0.925; nearer the unit correlation the transition
    // layer at theta -> pi/2 needs the adaptive panels for the remainder
    constexpr double kSplit = 0.925;
    auto f = [h, k](double t) { return detail::bvn_theta_integrand(h, k, t); };
    const double a = std::asin(rho);
    double corr;
    if (std::abs(rho) <= kSplit) {
        corr = boost::math::quadrature::gauss<double, 20>::integrate(f, 0.0, a);
    } else {
        const double a0 = std::copysign(std::asin(kSplit), rho);
        IntegrationConfig cfg;
        cfg.abs_tol = 5e-15;
        cfg.rel_tol = 1e-13;
        cfg.max_depth = 24;
        corr = boost::math::quadrature::gauss<double, 20>::integrate(f, 0.0, a0) +
               integrate(f, std::min(a0, a), std::max(a0, a), cfg).value *
                   (rho >= 0.0 ? 1.0 : -1.0);
    }
    const double p = normal_cdf(h) * normal_cdf(k) + corr / detail::kTwoPi;
    return std::clamp(p, 0.0, 1.0);
}

inline double trivariate_normal_cdf(double h, double k, double l, const CorrelationMatrix& R) {
    if (R.dimension() != 3) throw invalid_input("trivariate cdf needs a 3x3 correlation");
    if (std::isnan(h) || std::isnan(k) || std::isnan(l))
        throw invalid_input("trivariate cdf: NaN argument");
    if (!(R.min_eigenvalue() >= 1e-10))
        throw ill_conditioned("trivariate cdf: correlation matrix is nearly singular");
    if (h <= -detail::kNormalTailCut || k <= -detail::kNormalTailCut ||
        l <= -detail::kNormalTailCut)
        return 0.0;
    if (l >= detail::kNormalTailCut) return bivariate_normal_cdf(h, k, R(0, 1));
    if (h >= detail::kNormalTailCut) return bivariate_normal_cdf(k, l, R(1, 2));
    if (k >= detail::kNormalTailCut) return bivariate_normal_cdf(h, l, R(0, 2));

    // condition on the third coordinate: integrate the conditional bivariate
    // CDF against the standard normal density up to l
    const double r02 = R(0, 2), r12 = R(1, 2);
    const double s0 = std::sqrt(1.0 - r02 * r02), s1 = std::sqrt(1.0 - r12 * r12);
    const double rc = std::clamp((R(0, 1) - r02 * r12) / (s0 * s1), -1.0, 1.0);
    auto f = [&](double t) {
        return normal_pdf(t) *
               bivariate_normal_cdf((h - r02 * t) / s0, (k - r12 * t) / s1, rc);
    };
    IntegrationConfig cfg;
    cfg.abs_tol = 1e-11;
    cfg.rel_tol = 1e-10;
    cfg.max_depth = 20;
    const double p = integrate(f, -detail::kNormalTailCut, l, cfg).value;
    return std::clamp(p, 0.0, 1.0);
}

// ---- synthetic quotes ------------------------------------------------------------

enum class QuoteKind { pairwise_digital_max, basket_digital_min };

inline const char* to_string(QuoteKind k) {
    return k == QuoteKind::pairwise_digital_max ? "pairwise-digital-max" : "basket-digital-min";
}

inline QuoteKind quote_kind_from_string(std::string_view s) {
    if (s == "pairwise-digital-max") return QuoteKind::pairwise_digital_max;
    if (s == "basket-digital-min") return QuoteKind::basket_digital_min;
    throw invalid_input("unknown quote kind '" + std::string(s) + "'");
}

struct MarketQuote {
    QuoteKind kind = QuoteKind::pairwise_digital_max;
    std::vector<int> indices;
    double strike = 0.0;
    double price = 0.0;
};

// P(S_i < K, S_j < K) for every pair and strike; the joint law of
// (X_i, X_j) is bivariate normal, so the digital price is an exact CDF value.
inline std::vector<MarketQuote> generate_pairwise_digital_quotes(
    const BSModel& m, const std::vector<double>& strikes) {
    const int d = m.dimension();
    std::vector<MarketQuote> quotes;
    for (double K : strikes) {
        if (!(K > 0.0)) throw invalid_input("digital quote strikes must be positive");
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) {
                MarketQuote q;
                q.kind = QuoteKind::pairwise_digital_max;
                q.indices = {i, j};
                q.strike = K;
                q.price = bivariate_normal_cdf(m.z_score(i, K), m.z_score(j, K), m.corr(i, j));
                quotes.push_back(std::move(q));
            }
    }
    return quotes;
}

// P(S_1 >= K, S_2 >= K, S_3 >= K) by inclusion-exclusion over Gaussian CDFs.
inline std::vector<MarketQuote> generate_min_digital_quotes(const BSModel& m,
                                                            const std::vector<double>& strikes) {
    if (m.dimension() != 3)
        throw invalid_input("basket-digital-min quotes are defined for three assets");
    std::vector<MarketQuote> quotes;
    for (double K : strikes) {
        if (!(K > 0.0)) throw invalid_input("digital quote strikes must be positive");
        const double z0 = m.z_score(0, K), z1 = m.z_score(1, K), z2 = m.z_score(2, K);
        double p = 1.0 - normal_cdf(z0) - normal_cdf(z1) - normal_cdf(z2) +
                   bivariate_normal_cdf(z0, z1, m.corr(0, 1)) +
                   bivariate_normal_cdf(z0, z2, m.corr(0, 2)) +
                   bivariate_normal_cdf(z1, z2, m.corr(1, 2)) -
                   trivariate_normal_cdf(z0, z1, z2, m.corr);
        MarketQuote q;
        q.kind = QuoteKind::basket_digital_min;
        q.indices = {0, 1, 2};
        q.strike = K;
        q.price = std::clamp(p, 0.0, 1.0);
        quotes.push_back(std::move(q));
    }
    return quotes;
}

// ---- Monte Carlo benchmark --------------------------------------------------------

struct MonteCarloResult {
    double price = 0.0;
    double std_error = 0.0;
    long paths = 0;
};

namespace detail {

inline std::function<double(std::span<const double>)> pointwise_payoff(
    const PayoffDescriptor& f) {
    const double K = f.strike;
    auto min_of = [](std::span<const double> s) { return *std::min_element(s.begin(), s.end()); };
    auto max_of = [](std::span<const double> s) { return *std::max_element(s.begin(), s.end()); };
    switch (f.kind) {
        case PayoffKind::digital_put_on_max:
            return [K, max_of](std::span<const double> s) { return max_of(s) <= K ? 1.0 : 0.0; };
        case PayoffKind::digital_call_on_min:
            return [K, min_of](std::span<const double> s) { return min_of(s) > K ? 1.0 : 0.0; };
        case PayoffKind::call_on_min:
            return [K, min_of](std::span<const double> s) { return std::max(min_of(s) - K, 0.0); };
        case PayoffKind::put_on_min:
            return [K, min_of](std::span<const double> s) { return std::max(K - min_of(s), 0.0); };
        case PayoffKind::call_on_max:
            return [K, max_of](std::span<const double> s) { return std::max(max_of(s) - K, 0.0); };
        case PayoffKind::put_on_max:
            return [K, max_of](std::span<const double> s) { return std::max(K - max_of(s), 0.0); };
        case PayoffKind::generic:
            if (!f.generic || !f.generic->pointwise)
                throw invalid_input("generic payoff provides no pointwise evaluator");
            return f.generic->pointwise;
    }
    throw invalid_input("bad payoff kind");
}

}  // namespace detail

// Plain Monte Carlo with inverse-CDF Gaussian draws, correlated through the
// Cholesky factor.  Paths are generated in fixed-size shards, each shard's
// generator seeded from (seed, shard index), so results are reproducible and
// independent of how shards would be scheduled.
inline MonteCarloResult mc_benchmark_price(const PayoffDescriptor& f, const BSModel& m,
                                           long n_paths, std::uint64_t seed) {
    if (n_paths < 10000) throw invalid_input("Monte Carlo benchmark needs at least 1e4 paths");
    const int d = m.dimension();
    f.validate(d);
    const auto L = m.corr.cholesky_lower();
    const auto payoff = detail::pointwise_payoff(f);

    constexpr long kShard = 1L << 16;
    double sum = 0.0, sumsq = 0.0;
    std::vector<double> z(d), s(d);
    long done = 0;
    for (long shard = 0; done < n_paths; ++shard) {
        std::mt19937_64 rng(splitmix64(seed + 0x9E3779B97F4A7C15ULL * (shard + 1)));
        const long in_shard = std::min(kShard, n_paths - done);
        double local = 0.0, localsq = 0.0;
        for (long p = 0; p < in_shard; ++p) {
            for (int i = 0; i < d; ++i) {
                const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
                z[i] = normal_quantile(u);
            }
            for (int i = d - 1; i >= 0; --i) {
                double x = 0.0;
                for (int j = 0; j <= i; ++j) x += L[static_cast<std::size_t>(i) * d + j] * z[j];
                s[i] = m.spots[i] * std::exp(-0.5 * m.vols[i] * m.vols[i] + m.vols[i] * x);
            }
            const double v = payoff(s);
            local += v;
            localsq += v * v;
        }
        sum += local;
        sumsq += localsq;
        done += in_shard;
    }
    const double mean = sum / n_paths;
    const double var = std::max(0.0, sumsq / n_paths - mean * mean);
    return {mean, std::sqrt(var / n_paths), n_paths};
}

// ---- file formats ----------------------------------------------------------------

inline void write_quotes_csv(std::ostream& os, const std::vector<MarketQuote>& quotes) {
    os << "kind,indices,strike,price\n";
    os.precision(17);
    for (const auto& q : quotes) {
        os << to_string(q.kind) << ',';
        for (std::size_t i = 0; i < q.indices.size(); ++i) {
            if (i) os << ';';
            os << q.indices[i];
        }
        os << ',' << q.strike << ',' << q.price << '\n';
    }
}

inline std::vector<MarketQuote> read_quotes_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("kind,indices,strike,price", 0) != 0)
        throw invalid_input("quotes csv: missing 'kind,indices,strike,price' header");
    std::vector<MarketQuote> quotes;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string kind, indices, strike, price;
        if (!std::getline(row, kind, ',') || !std::getline(row, indices, ',') ||
            !std::getline(row, strike, ',') || !std::getline(row, price))
            throw invalid_input("quotes csv: malformed row '" + line + "'");
        MarketQuote q;
        q.kind = quote_kind_from_string(kind);
        std::istringstream ix(indices);
        std::string cell;
        while (std::getline(ix, cell, ';')) q.indices.push_back(std::stoi(cell));
        if (q.indices.empty()) throw invalid_input("quotes csv: row without indices");
        q.strike = std::stod(strike);
        q.price = std::stod(price);
        quotes.push_back(std::move(q));
    }
    return quotes;
}

// Plain key = value lines: `spots` and `correlations` (upper triangle, row major)
// are required, `vols` is optional; '#' starts a comment.
inline BSModel read_model_config(std::istream& is) {
    std::vector<double> spots, vols, corr;
    bool have_corr = false;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw invalid_input("model config line " + std::to_string(lineno) +
                                ": expected 'key = values'");
        std::istringstream keys(line.substr(0, eq));
        std::string key;
        keys >> key;
        std::istringstream vals(line.substr(eq + 1));
        std::vector<double> xs;
        double x;
        while (vals >> x) xs.push_back(x);
        if (!vals.eof())
            throw invalid_input("model config line " + std::to_string(lineno) +
                                ": non-numeric value");
        if (key == "spots") {
            spots = std::move(xs);
        } else if (key == "vols") {
            vols = std::move(xs);
        } else if (key == "correlations") {
            corr = std::move(xs);
            have_corr = true;
        } else {
            throw invalid_input("model config: unknown key '" + key + "'");
        }
    }
    if (spots.empty()) throw invalid_input("model config: missing 'spots'");
    if (!have_corr) throw invalid_input("model config: missing 'correlations'");
    const int d = static_cast<int>(spots.size());
    check_dimension(d);
    if (static_cast<int>(corr.size()) != d * (d - 1) / 2)
        throw invalid_input("model config: 'correlations' must list the upper triangle (" +
                            std::to_string(d * (d - 1) / 2) + " values)");
    return BSModel(std::move(spots), std::move(vols),
                   CorrelationMatrix::from_upper_triangle(d, corr));
}

}  // namespace copula_bounds
