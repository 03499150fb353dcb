#include "copula_bounds/pricing_bounds.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

namespace cb = copula_bounds;

namespace {

cb::BSModel fig_model(double rho) {
    return cb::BSModel({10.0, 10.0, 10.0}, cb::CorrelationMatrix::equicorrelated(3, rho));
}

cb::PayoffDescriptor desc(cb::PayoffKind kind, double strike) {
    cb::PayoffDescriptor f;
    f.kind = kind;
    f.strike = strike;
    return f;
}

double black_scholes_call(double spot, double vol, double strike) {
    const double d1 = (std::log(spot / strike) + 0.5 * vol * vol) / vol;
    return spot * cb::normal_cdf(d1) - strike * cb::normal_cdf(d1 - vol);
}

// improved interval padded by Monte Carlo and quadrature slack must catch the
// simulated price
void expect_brackets_mc(const cb::PriceBounds& b, const cb::MonteCarloResult& mc,
                        const std::string& what) {
    const double slack = 4.0 * mc.std_error + b.quadrature_error + 1e-10;
    EXPECT_GE(mc.price, b.improved_lower - slack) << what;
    EXPECT_LE(mc.price, b.improved_upper + slack) << what;
}

}  // namespace

TEST(TrackDescriptor, MembershipAndContinuity) {
    const auto m = fig_model(0.0);
    cb::TrackDescriptor track{m.marginals()};
    EXPECT_EQ(track.dimension(), 3);
    const auto u = track.at(9.5);
    EXPECT_TRUE(track.contains(u));
    auto off = u;
    off[2] += 1e-5;
    EXPECT_FALSE(track.contains(off));
    EXPECT_THROW(track.contains({0.5, 0.5}), cb::invalid_input);
    EXPECT_NO_THROW(track.check_continuity(0.5, 60.0));

    // mixed marginals still trace one increasing curve
    std::vector<cb::MarginalDistribution> mixed{cb::uniform_marginal(0.0, 1.0),
                                                cb::uniform_marginal(0.0, 2.0)};
    cb::TrackDescriptor t2{mixed};
    EXPECT_TRUE(t2.contains({0.6, 0.3}));
    EXPECT_FALSE(t2.contains({0.6, 0.4}));

    // 0.6 of the mass sits in an atom at x = 0.5
    auto step = cb::uniform_marginal(0.0, 1.0);
    step.cdf = [](double x) {
        return std::clamp(x < 0.5 ? 0.4 * x : 0.6 + 0.4 * x, 0.0, 1.0);
    };
    step.quantile = [](double u) {
        if (u < 0.2) return u / 0.4;
        if (u <= 0.8) return 0.5;
        return (u - 0.6) / 0.4;
    };
    cb::TrackDescriptor t3{{step, cb::uniform_marginal(0.0, 1.0)}};
    EXPECT_THROW(t3.check_continuity(0.0, 1.0), cb::invalid_input);
}

TEST(StandardEnvelope, PointIdentitiesAndComonotoneOracle) {
    const std::vector<cb::MarginalDistribution> unif2{cb::uniform_marginal(0.0, 1.0),
                                                      cb::uniform_marginal(0.0, 1.0)};
    const auto [lo2, hi2] = cb::standard_price_envelope(
        desc(cb::PayoffKind::digital_put_on_max, 0.5), unif2);
    EXPECT_NEAR(lo2, 0.0, 1e-15);
    EXPECT_NEAR(hi2, 0.5, 1e-15);

    const auto m = fig_model(0.3);
    const auto marginals = m.marginals();
    for (double K : {7.0, 10.0, 14.0}) {
        const auto [lo, hi] =
            cb::standard_price_envelope(desc(cb::PayoffKind::digital_put_on_max, K), marginals);
        cb::Point u(3);
        for (int i = 0; i < 3; ++i) u[i] = marginals[i].cdf(K);
        EXPECT_NEAR(lo, cb::frechet_lower(u), 1e-14);
        EXPECT_NEAR(hi, cb::frechet_upper(u), 1e-14);

        // comonotone upper end of the min-call is the one-asset call
        const auto [clo, chi] =
            cb::standard_price_envelope(desc(cb::PayoffKind::call_on_min, K), marginals);
        EXPECT_NEAR(chi, black_scholes_call(10.0, 1.0, K), 2e-6);
        EXPECT_LE(clo, chi + 1e-12);

        // reversed orientation for the negated kinds
        const auto [plo, phi] =
            cb::standard_price_envelope(desc(cb::PayoffKind::put_on_min, K), marginals);
        EXPECT_LE(plo, phi + 1e-12);
        // min put-call parity at the comonotone end: the pair (call upper,
        // put lower) comes from the same survival function
        const auto mg = marginals[0];
        cb::IntegrationConfig cfg;
        const double emin =
            cb::integrate([&](double x) { return 1.0 - mg.cdf(x); }, 0.0,
                          mg.upper_support(1e-13), cfg)
                .value;
        EXPECT_NEAR(chi - plo, emin - K, 5e-6);
    }
}

TEST(PairwiseQuotes, EmptyPrescriptionDegeneratesToStandard) {
    const auto marginals = fig_model(0.3).marginals();
    const auto b = cb::bounds_from_pairwise_quotes({}, marginals,
                                                   desc(cb::PayoffKind::digital_put_on_max, 10.0));
    EXPECT_DOUBLE_EQ(b.improved_lower, b.standard_lower);
    EXPECT_DOUBLE_EQ(b.improved_upper, b.standard_upper);
    EXPECT_FALSE(b.sharp);
    EXPECT_TRUE(b.nested(1e-12));
}

TEST(PairwiseQuotes, DigitalBoundsTightenAndBracketSimulation) {
    const auto m = fig_model(0.3);
    const auto marginals = m.marginals();
    const auto quotes = cb::generate_pairwise_digital_quotes(m, {8.0, 10.0, 12.0});

    for (double K : {6.0, 8.0, 10.0, 12.0, 15.0}) {
        const auto f = desc(cb::PayoffKind::digital_put_on_max, K);
        const auto b = cb::bounds_from_pairwise_quotes(quotes, marginals, f);
        EXPECT_TRUE(b.nested(1e-12)) << K;
        const auto mc = cb::mc_benchmark_price(f, m, 200000, 31 + static_cast<int>(K));
        expect_brackets_mc(b, mc, "digital-put-on-max K=" + std::to_string(K));
    }

    // quoted interior strike: strictly better than the unconstrained envelope
    const auto b10 = cb::bounds_from_pairwise_quotes(
        quotes, marginals, desc(cb::PayoffKind::digital_put_on_max, 10.0));
    EXPECT_GT(b10.improved_lower, b10.standard_lower + 0.05);
    EXPECT_LT(b10.improved_upper, b10.standard_upper + 1e-12);

    // adding quotes tightens weakly, strike by strike
    const auto fewer = cb::generate_pairwise_digital_quotes(m, {10.0});
    for (double K : {8.0, 10.0, 11.0, 13.0}) {
        const auto f = desc(cb::PayoffKind::digital_put_on_max, K);
        const auto b1 = cb::bounds_from_pairwise_quotes(fewer, marginals, f);
        const auto b3 = cb::bounds_from_pairwise_quotes(quotes, marginals, f);
        EXPECT_GE(b3.improved_lower, b1.improved_lower - 1e-12) << K;
        EXPECT_LE(b3.improved_upper, b1.improved_upper + 1e-12) << K;
    }
}

TEST(PairwiseQuotes, NonDigitalAntitonicKindsWork) {
    const auto m = fig_model(0.3);
    const auto marginals = m.marginals();
    const auto quotes = cb::generate_pairwise_digital_quotes(m, {9.0, 11.0});

    for (auto kind : {cb::PayoffKind::put_on_max, cb::PayoffKind::call_on_max}) {
        for (double K : {8.0, 10.0, 12.0}) {
            const auto f = desc(kind, K);
            const auto b = cb::bounds_from_pairwise_quotes(quotes, marginals, f);
            EXPECT_TRUE(b.nested(1e-9)) << cb::to_string(f);
            const auto mc = cb::mc_benchmark_price(f, m, 200000, 77 + static_cast<int>(K));
            expect_brackets_mc(b, mc, cb::to_string(f));
        }
    }
}

TEST(PairwiseQuotes, RejectsBadInputs) {
    const auto m = fig_model(0.3);
    const auto marginals = m.marginals();
    auto quotes = cb::generate_pairwise_digital_quotes(m, {10.0});

    EXPECT_THROW(cb::bounds_from_pairwise_quotes(quotes, marginals,
                                                 desc(cb::PayoffKind::call_on_min, 10.0)),
                 cb::unsupported_payoff_order);

    auto bad = quotes;
    bad[0].price = 0.95;  // above the upper Frechet end min(F_i(K), F_j(K))
    EXPECT_THROW(cb::bounds_from_pairwise_quotes(bad, marginals,
                                                 desc(cb::PayoffKind::digital_put_on_max, 10.0)),
                 cb::inconsistent_quotes);
    cb::PricingConfig repair;
    repair.repair_quotes = true;
    const auto fixed = cb::bounds_from_pairwise_quotes(
        bad, marginals, desc(cb::PayoffKind::digital_put_on_max, 10.0), repair);
    EXPECT_TRUE(fixed.nested(1e-12));

    auto conflicting = cb::generate_pairwise_digital_quotes(m, {10.0});
    conflicting.push_back(conflicting[0]);
    conflicting.back().price = std::min(conflicting[0].price + 0.05, 0.69);
    EXPECT_THROW(cb::bounds_from_pairwise_quotes(conflicting, marginals,
                                                 desc(cb::PayoffKind::digital_put_on_max, 10.0)),
                 cb::inconsistent_quotes);

    auto wrong_kind = cb::generate_min_digital_quotes(m, {10.0});
    EXPECT_THROW(cb::bounds_from_pairwise_quotes(wrong_kind, marginals,
                                                 desc(cb::PayoffKind::digital_put_on_max, 10.0)),
                 cb::invalid_input);

    auto bad_idx = quotes;
    bad_idx[0].indices = {1, 1};
    EXPECT_THROW(cb::bounds_from_pairwise_quotes(bad_idx, marginals,
                                                 desc(cb::PayoffKind::digital_put_on_max, 10.0)),
                 cb::invalid_input);
}

TEST(MinDigitalQuotes, EmptyPrescriptionGivesComonotoneUpper) {
    const auto marginals = fig_model(0.5).marginals();
    const auto f = desc(cb::PayoffKind::call_on_min, 10.0);
    const auto b = cb::bounds_from_min_digital_quotes({}, marginals, f);
    EXPECT_DOUBLE_EQ(b.improved_lower, b.standard_lower);
    EXPECT_DOUBLE_EQ(b.improved_upper, b.standard_upper);
    EXPECT_NEAR(b.standard_upper, black_scholes_call(10.0, 1.0, 10.0), 2e-6);
    EXPECT_FALSE(b.sharp);
}

TEST(MinDigitalQuotes, SurvivalPipelineInterpolatesQuotesExactly) {
    const auto m = fig_model(0.5);
    const auto marginals = m.marginals();
    const auto quotes = cb::generate_min_digital_quotes(m, {9.0, 11.0});

    for (const auto& q : quotes) {
        const auto b = cb::bounds_from_min_digital_quotes(
            quotes, marginals, desc(cb::PayoffKind::digital_call_on_min, q.strike));
        EXPECT_NEAR(b.improved_lower, q.price, 1e-10);
        EXPECT_NEAR(b.improved_upper, q.price, 1e-10);
        EXPECT_TRUE(b.sharp);
        EXPECT_TRUE(b.nested(1e-12));
    }
}

TEST(MinDigitalQuotes, CallOnMinBoundsBracketSimulationAndAreSharp) {
    const auto m = fig_model(0.5);
    const auto marginals = m.marginals();
    const auto quotes = cb::generate_min_digital_quotes(m, {9.0, 11.0});

    for (double K : {7.0, 9.0, 10.0, 11.0, 13.0}) {
        const auto f = desc(cb::PayoffKind::call_on_min, K);
        const auto b = cb::bounds_from_min_digital_quotes(quotes, marginals, f);
        EXPECT_TRUE(b.nested(1e-9)) << K;
        EXPECT_TRUE(b.sharp) << K;
        const auto mc = cb::mc_benchmark_price(f, m, 200000, 5 + static_cast<int>(K));
        expect_brackets_mc(b, mc, "call-on-min K=" + std::to_string(K));

        // quotes genuinely constrain the interior strikes
        if (K >= 9.0 && K <= 11.0) {
            EXPECT_GT(b.improved_lower, b.standard_lower + 1e-3) << K;
        }
    }
}

TEST(MinDigitalQuotes, PutOnMinSwapsRolesAndStillBrackets) {
    const auto m = fig_model(0.5);
    const auto marginals = m.marginals();
    const auto quotes = cb::generate_min_digital_quotes(m, {9.0, 11.0});

    for (double K : {8.0, 10.0, 12.0}) {
        const auto f = desc(cb::PayoffKind::put_on_min, K);
        const auto b = cb::bounds_from_min_digital_quotes(quotes, marginals, f);
        EXPECT_TRUE(b.nested(1e-9)) << K;
        EXPECT_FALSE(b.sharp);
        const auto mc = cb::mc_benchmark_price(f, m, 200000, 17 + static_cast<int>(K));
        expect_brackets_mc(b, mc, "put-on-min K=" + std::to_string(K));
    }
}

TEST(MinDigitalQuotes, RejectsBadInputs) {
    const auto m = fig_model(0.5);
    const auto marginals = m.marginals();
    auto quotes = cb::generate_min_digital_quotes(m, {10.0});

    EXPECT_THROW(cb::bounds_from_min_digital_quotes(quotes, marginals,
                                                    desc(cb::PayoffKind::digital_put_on_max, 10.0)),
                 cb::unsupported_payoff_order);
    auto bad = quotes;
    bad[0].price = 0.9;  // survival cap is 1 - max F_i(K) ~ 0.31 here
    EXPECT_THROW(cb::bounds_from_min_digital_quotes(bad, marginals,
                                                    desc(cb::PayoffKind::call_on_min, 10.0)),
                 cb::inconsistent_quotes);
    auto pairwise = cb::generate_pairwise_digital_quotes(m, {10.0});
    EXPECT_THROW(cb::bounds_from_min_digital_quotes(pairwise, marginals,
                                                    desc(cb::PayoffKind::call_on_min, 10.0)),
                 cb::invalid_input);
    auto bad_idx = quotes;
    bad_idx[0].indices = {0, 1};
    EXPECT_THROW(cb::bounds_from_min_digital_quotes(bad_idx, marginals,
                                                    desc(cb::PayoffKind::call_on_min, 10.0)),
                 cb::invalid_input);
}

TEST(Sharpness, RequiresSurvivalScaleDiagonalTrackAndMinKind) {
    const auto marginals = fig_model(0.5).marginals();
    const auto f = desc(cb::PayoffKind::call_on_min, 10.0);

    cb::Prescription on(3, cb::PrescriptionSide::survival_scale);
    on.add(cb::TrackDescriptor{marginals}.at(9.0), 0.2);
    on.add(cb::TrackDescriptor{marginals}.at(11.0), 0.15);
    EXPECT_TRUE(cb::sharpness_flag(on, f, marginals));
    EXPECT_TRUE(cb::sharpness_flag(on, desc(cb::PayoffKind::digital_call_on_min, 10.0),
                                   marginals));
    EXPECT_FALSE(cb::sharpness_flag(on, desc(cb::PayoffKind::put_on_min, 10.0), marginals));
    EXPECT_FALSE(cb::sharpness_flag(on, desc(cb::PayoffKind::call_on_max, 10.0), marginals));

    cb::Prescription off(3, cb::PrescriptionSide::survival_scale);
    off.add({0.3, 0.5, 0.4}, 0.3);
    EXPECT_FALSE(cb::sharpness_flag(off, f, marginals));

    cb::Prescription cop(3, cb::PrescriptionSide::copula_scale);
    cop.add({0.5, 0.5, 0.5}, 0.3);
    EXPECT_FALSE(cb::sharpness_flag(cop, f, marginals));

    cb::Prescription empty(3, cb::PrescriptionSide::survival_scale);
    EXPECT_FALSE(cb::sharpness_flag(empty, f, marginals));

    // equal-coordinate points ride the diagonal when marginals coincide
    std::vector<cb::MarginalDistribution> unif(3, cb::uniform_marginal(0.0, 1.0));
    cb::Prescription diag(3, cb::PrescriptionSide::survival_scale);
    diag.add({0.4, 0.4, 0.4}, 0.3);
    EXPECT_TRUE(cb::sharpness_flag(diag, desc(cb::PayoffKind::call_on_min, 0.4), unif));
    EXPECT_THROW(cb::sharpness_flag(diag, f, {unif[0], unif[1]}), cb::invalid_input);
}

TEST(PriceBoundsCsv, DeterministicRows) {
    cb::PriceBounds b;
    b.standard_lower = 0.25;
    b.improved_lower = 1.0 / 3.0;
    b.improved_upper = 0.5;
    b.standard_upper = 0.75;
    b.sharp = true;

    std::ostringstream a1, a2;
    cb::write_price_bounds_csv_header(a1);
    cb::write_price_bounds_csv_row(a1, 10.0, b);
    cb::write_price_bounds_csv_header(a2);
    cb::write_price_bounds_csv_row(a2, 10.0, b);
    EXPECT_EQ(a1.str(), a2.str());
    EXPECT_EQ(a1.str(),
              "strike,std_lower,imp_lower,imp_upper,std_upper,benchmark,stderr,sharp\n"
              "10,0.25,0.333333333333,0.5,0.75,,,1\n");

    b.benchmark = cb::MonteCarloResult{0.4, 0.001, 100000};
    std::ostringstream with;
    cb::write_price_bounds_csv_row(with, 12.5, b);
    EXPECT_EQ(with.str(), "12.5,0.25,0.333333333333,0.5,0.75,0.4,0.001,1\n");
}
