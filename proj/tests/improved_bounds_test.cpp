#include "copula_bounds/improved_bounds.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "support/checkerboard.hpp"
#include "support/grid_envelope.hpp"

namespace cb = copula_bounds;

namespace {

cb::DependenceFunction mixture(int d, double w_low, double w_ind, double w_up) {
    const double total = w_low + w_ind + w_up;
    return cb::DependenceFunction(
        d, cb::FunctionKind::quasi_copula,
        [=](std::span<const double> u) {
            double prod = 1.0;
            for (double x : u) prod *= x;
            return (w_low * cb::frechet_lower(u) + w_ind * prod + w_up * cb::frechet_upper(u)) /
                   total;
        });
}

cb::Point random_point(int d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    cb::Point u(d);
    for (auto& x : u) x = unif(rng);
    return u;
}

cb::Prescription random_prescription(int d, int npts, std::mt19937_64& rng,
                                     const cb::DependenceFunction& source) {
    cb::Prescription p(d, cb::PrescriptionSide::copula_scale);
    for (int k = 0; k < npts; ++k) {
        auto x = random_point(d, rng);
        const double v = source(x);
        p.add(std::move(x), v);
    }
    return p;
}

}  // namespace

TEST(Prescription, RejectsValuesOutsideEnvelope) {
    cb::Prescription p(3, cb::PrescriptionSide::copula_scale);
    EXPECT_THROW(p.add({0.5, 0.5, 0.5}, 0.6, 0.0), cb::invalid_input);   // above min u_i
    EXPECT_THROW(p.add({0.9, 0.9, 0.9}, 0.1, 0.0), cb::invalid_input);   // below W_3 = 0.7
    EXPECT_NO_THROW(p.add({0.9, 0.9, 0.9}, 0.75, 0.0));

    cb::Prescription s(3, cb::PrescriptionSide::survival_scale);
    EXPECT_THROW(s.add({0.1, 0.1, 0.1}, 0.5, 0.0), cb::invalid_input);   // Mhat = 0.9 at 1-u
    EXPECT_NO_THROW(s.add({0.1, 0.1, 0.1}, 0.8, 0.0));
}

TEST(Prescription, RejectsConflictingDuplicates) {
    cb::Prescription p(2, cb::PrescriptionSide::copula_scale);
    p.add({0.5, 0.5}, 0.25);
    EXPECT_THROW(p.add({0.5, 0.5}, 0.3), cb::invalid_input);
    EXPECT_NO_THROW(p.add({0.5, 0.5}, 0.25));
}

TEST(Prescription, CsvRoundTrip) {
    cb::Prescription p(3, cb::PrescriptionSide::survival_scale);
    p.add({0.25, 0.5, 0.75}, 0.125);
    p.add({0.1, 0.2, 0.3}, 0.6);
    std::stringstream ss;
    p.write_csv(ss);
    EXPECT_EQ(ss.str().substr(0, 7), "d,side\n");
    auto q = cb::Prescription::read_csv(ss);
    ASSERT_EQ(q.dimension(), 3);
    EXPECT_EQ(q.side(), cb::PrescriptionSide::survival_scale);
    ASSERT_EQ(q.points().size(), 2u);
    EXPECT_DOUBLE_EQ(q.points()[0].first[2], 0.75);
    EXPECT_DOUBLE_EQ(q.points()[1].second, 0.6);
}

TEST(SubsetBounds, SinglePointFormulas) {
    cb::Prescription p(3, cb::PrescriptionSide::copula_scale);
    p.add({0.5, 0.5, 0.5}, 0.125);
    auto lo = cb::lower_bound_subset(p);
    auto hi = cb::upper_bound_subset(p);

    EXPECT_NEAR(lo({0.6, 0.6, 0.6}), 0.125, 1e-15);          // no mass forced above the point
    EXPECT_NEAR(lo({0.5, 0.5, 0.5}), 0.125, 1e-15);          // interpolation
    EXPECT_NEAR(lo({0.3, 0.3, 0.3}), 0.0, 1e-15);            // Lipschitz slack exhausted
    EXPECT_NEAR(lo({0.45, 0.5, 0.5}), 0.075, 1e-15);
    EXPECT_NEAR(hi({0.55, 0.5, 0.5}), 0.175, 1e-15);
    EXPECT_NEAR(hi({0.5, 0.5, 0.5}), 0.125, 1e-15);
    EXPECT_NEAR(hi({0.6, 0.55, 0.5}), 0.125 + 0.15, 1e-15);  // prescription term binds
    EXPECT_NEAR(hi({0.4, 0.9, 0.9}), 0.4, 1e-15);            // capped by min u_i
    EXPECT_NEAR(hi({0.2, 0.9, 0.9}), 0.2, 1e-15);
}

TEST(SubsetBounds, EmptyPrescriptionGivesEnvelope) {
    cb::Prescription p(4, cb::PrescriptionSide::copula_scale);
    auto lo = cb::lower_bound_subset(p);
    auto hi = cb::upper_bound_subset(p);
    std::mt19937_64 rng(7);
    for (int k = 0; k < 50; ++k) {
        auto u = random_point(4, rng);
        EXPECT_DOUBLE_EQ(lo(u), cb::frechet_lower(u));
        EXPECT_DOUBLE_EQ(hi(u), cb::frechet_upper(u));
    }
}

TEST(SubsetBounds, InterpolatesAndSandwiches) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> dims(2, 4), counts(1, 6);
    std::uniform_real_distribution<double> w(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        const int d = dims(rng);
        auto src = mixture(d, w(rng), w(rng) + 0.1, w(rng));
        auto p = random_prescription(d, counts(rng), rng, src);
        auto lo = cb::lower_bound_subset(p);
        auto hi = cb::upper_bound_subset(p);
        for (const auto& [x, v] : p.points()) {
            EXPECT_NEAR(lo(x), v, 1e-12);
            EXPECT_NEAR(hi(x), v, 1e-12);
        }
        for (int k = 0; k < 20; ++k) {
            auto u = random_point(d, rng);
            const double l = lo(u), h = hi(u);
            EXPECT_GE(l, cb::frechet_lower(u) - 1e-12);
            EXPECT_LE(h, cb::frechet_upper(u) + 1e-12);
            EXPECT_LE(l, h + 1e-12);
            EXPECT_LE(l, src(u) + 1e-12);   // the source function is one admissible model
            EXPECT_GE(h, src(u) - 1e-12);
        }
    }
}

// Shortest-path envelope over the discrete quasi-copula constraint graph is an
// independent construction of the same extremal values.
TEST(SubsetBounds, MatchesLatticeEnvelopeOracle) {
    std::mt19937_64 rng(23);
    auto run_case = [&rng](int d, int n, int npts) {
        test_support::LatticeEnvelope env(d, n);
        auto src = mixture(d, 0.7, 1.0, 0.4);
        cb::Prescription p(d, cb::PrescriptionSide::copula_scale);
        std::uniform_int_distribution<int> cell(1, n - 1);
        for (int k = 0; k < npts; ++k) {
            std::vector<int> idx(d);
            cb::Point x(d);
            for (int i = 0; i < d; ++i) {
                idx[i] = cell(rng);
                x[i] = static_cast<double>(idx[i]) / n;
            }
            const double v = src(x);
            env.fix(idx, v);
            p.add(std::move(x), v);
        }
        auto lo = cb::lower_bound_subset(p);
        auto hi = cb::upper_bound_subset(p);
        std::vector<int> idx(d, 0);
        cb::Point u(d);
        while (true) {
            for (int i = 0; i < d; ++i) u[i] = static_cast<double>(idx[i]) / n;
            EXPECT_NEAR(lo(u), env.min_value(idx), 1e-12);
            EXPECT_NEAR(hi(u), env.max_value(idx), 1e-12);
            int i = d - 1;
            for (; i >= 0; --i) {
                if (++idx[i] <= n) break;
                idx[i] = 0;
            }
            if (i < 0) break;
        }
    };
    run_case(2, 10, 3);
    run_case(2, 10, 5);
    run_case(3, 6, 3);
}

TEST(SubsetBounds, MoreInformationTightensBounds) {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 30; ++rep) {
        auto src = mixture(3, 0.2, 1.0, 0.5);
        auto small = random_prescription(3, 3, rng, src);
        cb::Prescription big(3, cb::PrescriptionSide::copula_scale);
        for (const auto& [x, v] : small.points()) big.add(x, v);
        for (int k = 0; k < 3; ++k) {
            auto x = random_point(3, rng);
            const double v = src(x);
            big.add(std::move(x), v);
        }
        auto lo_s = cb::lower_bound_subset(small), lo_b = cb::lower_bound_subset(big);
        auto hi_s = cb::upper_bound_subset(small), hi_b = cb::upper_bound_subset(big);
        for (int k = 0; k < 25; ++k) {
            auto u = random_point(3, rng);
            EXPECT_LE(lo_s(u), lo_b(u) + 1e-12);
            EXPECT_GE(hi_s(u), hi_b(u) - 1e-12);
        }
    }
}

TEST(SubsetBounds, BoundsPassQuasiCopulaChecks) {
    std::mt19937_64 rng(41);
    for (int rep = 0; rep < 8; ++rep) {
        auto src = mixture(3, 0.3, 1.0, 0.3);
        auto p = random_prescription(3, 4, rng, src);
        for (auto* b : {&p}) {
            auto lo = cb::lower_bound_subset(*b);
            auto hi = cb::upper_bound_subset(*b);
            EXPECT_TRUE(cb::check_quasi_copula(cb::GridFunction::sample(lo, 8)).pass());
            EXPECT_TRUE(cb::check_quasi_copula(cb::GridFunction::sample(hi, 8)).pass());
        }
    }
}

TEST(SurvivalSubsetBounds, PinnedFormulasAndReflection) {
    cb::Prescription s(3, cb::PrescriptionSide::survival_scale);
    s.add({0.5, 0.5, 0.5}, 0.125);
    auto lo = cb::survival_bound_subset(s, cb::BoundSide::lower);
    auto hi = cb::survival_bound_subset(s, cb::BoundSide::upper);
    EXPECT_EQ(lo.kind(), cb::FunctionKind::quasi_survival);

    // interpolation on the survival scale
    EXPECT_NEAR(cb::survival_value(lo, cb::Point{0.5, 0.5, 0.5}), 0.125, 1e-15);
    EXPECT_NEAR(cb::survival_value(hi, cb::Point{0.5, 0.5, 0.5}), 0.125, 1e-15);
    // moving down can only increase a survival function; minimum stays pinned
    EXPECT_NEAR(lo(cb::Point{0.4, 0.5, 0.5}), 0.125, 1e-15);
    // moving up decreases it by at most the coordinate move
    EXPECT_NEAR(lo(cb::Point{0.6, 0.5, 0.5}), 0.025, 1e-15);
    EXPECT_NEAR(hi(cb::Point{0.6, 0.5, 0.5}), 0.125, 1e-15);
    EXPECT_NEAR(hi(cb::Point{0.4, 0.5, 0.5}), 0.225, 1e-15);

    std::mt19937_64 rng(5);
    auto ref_lo = cb::lower_bound_subset(s.reflected());
    for (int k = 0; k < 40; ++k) {
        auto u = random_point(3, rng);
        cb::Point w{1 - u[0], 1 - u[1], 1 - u[2]};
        EXPECT_NEAR(lo(u), ref_lo(w), 1e-15);
    }
}

TEST(SurvivalSubsetBounds, EmptyPrescriptionGivesSurvivalEnvelope) {
    cb::Prescription s(3, cb::PrescriptionSide::survival_scale);
    auto lo = cb::survival_bound_subset(s, cb::BoundSide::lower);
    auto hi = cb::survival_bound_subset(s, cb::BoundSide::upper);
    auto env_lo = cb::survival_frechet_lower_function(3);
    auto env_hi = cb::survival_frechet_upper_function(3);
    std::mt19937_64 rng(9);
    for (int k = 0; k < 40; ++k) {
        auto u = random_point(3, rng);
        EXPECT_DOUBLE_EQ(lo(u), env_lo(u));
        EXPECT_DOUBLE_EQ(hi(u), env_hi(u));
    }
}

TEST(FunctionalBounds, EvaluationFunctionalPinsThePoint) {
    const cb::Point u0{0.5, 0.5};
    const double theta = 0.1;
    cb::FunctionalPrescription fp(
        2, cb::PrescriptionSide::copula_scale,
        [u0](const cb::DependenceFunction& q) { return q(u0); }, theta);
    auto [l0, h0] = cb::functional_bounds(fp, u0);
    EXPECT_NEAR(l0, theta, 1e-8);
    EXPECT_NEAR(h0, theta, 1e-8);

    std::mt19937_64 rng(13);
    for (int k = 0; k < 25; ++k) {
        auto u = random_point(2, rng);
        auto [l, h] = cb::functional_bounds(fp, u);
        double up = theta, dn = theta;
        for (int i = 0; i < 2; ++i) {
            up += std::max(0.0, u[i] - u0[i]);
            dn -= std::max(0.0, u0[i] - u[i]);
        }
        EXPECT_NEAR(h, std::min(cb::frechet_upper(u), up), 1e-8);
        EXPECT_NEAR(l, std::max(cb::frechet_lower(u), dn), 1e-8);
    }
}

TEST(FunctionalBounds, LatticeAverageBracketsAConsistentModel) {
    const int d = 2, n = 5;
    auto avg = [n](const cb::DependenceFunction& q) {
        double acc = 0.0;
        cb::Point u(2);
        for (int i = 1; i < n; ++i)
            for (int j = 1; j < n; ++j) {
                u[0] = static_cast<double>(i) / n;
                u[1] = static_cast<double>(j) / n;
                acc += q(u);
            }
        return acc / ((n - 1) * (n - 1));
    };
    auto pi = cb::independence_function(d);
    cb::FunctionalPrescription fp(d, cb::PrescriptionSide::copula_scale, avg, avg(pi));
    std::mt19937_64 rng(17);
    for (int k = 0; k < 12; ++k) {
        auto u = random_point(d, rng);
        auto [l, h] = cb::functional_bounds(fp, u);
        EXPECT_LE(l, pi(u) + 1e-8);
        EXPECT_GE(h, pi(u) - 1e-8);
        EXPECT_GE(l, cb::frechet_lower(u) - 1e-12);
        EXPECT_LE(h, cb::frechet_upper(u) + 1e-12);
    }
}

TEST(FunctionalBounds, InfeasibleTargetThrows) {
    auto eval = [](const cb::DependenceFunction& q) { return q(cb::Point{0.5, 0.5}); };
    EXPECT_THROW(cb::FunctionalPrescription(2, cb::PrescriptionSide::copula_scale, eval, 0.7),
                 cb::infeasible_target);
    EXPECT_THROW(cb::FunctionalPrescription(2, cb::PrescriptionSide::copula_scale, eval, -0.1),
                 cb::infeasible_target);
}

TEST(FunctionalBounds, NonMonotoneFunctionalDetected) {
    auto wavy = [](const cb::DependenceFunction& q) {
        const double v = q(cb::Point{0.5, 0.5});
        return v + 0.2 * std::sin(4.0 * 3.14159265358979324 * v);
    };
    cb::FunctionalPrescription fp(2, cb::PrescriptionSide::copula_scale, wavy, 0.25);
    EXPECT_THROW(cb::functional_bounds(fp, cb::Point{0.5, 0.5}), cb::contract_violation);
}

TEST(FunctionalBounds, SurvivalEvaluationFunctional) {
    const cb::Point u0{0.5, 0.5, 0.5};
    const double theta = 0.2;
    cb::FunctionalPrescription fp(
        3, cb::PrescriptionSide::survival_scale,
        [u0](const cb::DependenceFunction& q) { return cb::survival_value(q, u0); }, theta);
    auto [l0, h0] = cb::survival_functional_bounds(fp, u0);
    EXPECT_NEAR(l0, theta, 1e-8);
    EXPECT_NEAR(h0, theta, 1e-8);

    std::mt19937_64 rng(19);
    for (int k = 0; k < 15; ++k) {
        auto u = random_point(3, rng);
        cb::Point w{1 - u[0], 1 - u[1], 1 - u[2]};
        auto [l, h] = cb::survival_functional_bounds(fp, u);
        double up = theta, dn = theta;
        for (int i = 0; i < 3; ++i) {
            up += std::max(0.0, u0[i] - u[i]);   // survival grows when u moves down
            dn -= std::max(0.0, u[i] - u0[i]);
        }
        EXPECT_NEAR(h, std::min(cb::frechet_upper(w), up), 1e-8);
        EXPECT_NEAR(l, std::max(cb::frechet_lower(w), dn), 1e-8);
    }
}

TEST(MarginalBounds, FullBlockSelfPrescriptionIsTight) {
    auto pi = cb::independence_function(3);
    cb::MarginalPrescription mp(3, {{{0, 1, 2}, pi, pi}});
    auto [lo, hi] = cb::marginal_bounds(mp);
    std::mt19937_64 rng(3);
    for (int k = 0; k < 40; ++k) {
        auto u = random_point(3, rng);
        EXPECT_NEAR(lo(u), pi(u), 1e-15);
        EXPECT_NEAR(hi(u), pi(u), 1e-15);
    }
}

TEST(MarginalBounds, PairBlockClosedForm) {
    auto m2 = cb::frechet_upper_function(2);
    cb::MarginalPrescription mp(3, {{{0, 1}, m2, m2}});
    auto [lo, hi] = cb::marginal_bounds(mp);
    std::mt19937_64 rng(29);
    for (int k = 0; k < 40; ++k) {
        auto u = random_point(3, rng);
        const double expect_lo =
            std::max(cb::frechet_lower(u), std::min(u[0], u[1]) + u[2] - 1.0);
        EXPECT_NEAR(lo(u), std::max(0.0, expect_lo), 1e-15);
        EXPECT_NEAR(hi(u), cb::frechet_upper(u), 1e-15);
    }
}

TEST(MarginalBounds, ValidatesBlocks) {
    auto pi2 = cb::independence_function(2);
    auto pi3 = cb::independence_function(3);
    // three-way overlap between blocks
    EXPECT_THROW(cb::MarginalPrescription(4, {{{0, 1, 2}, pi3, pi3}, {{1, 2, 3}, pi3, pi3}}),
                 cb::invalid_input);
    // sharing one coordinate is allowed
    EXPECT_NO_THROW(cb::MarginalPrescription(3, {{{0, 1}, pi2, pi2}, {{1, 2}, pi2, pi2}}));
    // lower bound above upper bound
    EXPECT_THROW(cb::MarginalPrescription(
                     3, {{{0, 1}, cb::frechet_upper_function(2), cb::frechet_lower_function(2)}}),
                 cb::invalid_input);
    // out-of-range index
    EXPECT_THROW(cb::MarginalPrescription(3, {{{1, 3}, pi2, pi2}}), cb::invalid_input);
    // singleton block
    EXPECT_THROW(cb::MarginalPrescription(3, {{{1}, pi2, pi2}}), cb::invalid_input);
}

// Every 2x2x2 checkerboard whose {0,1}- and {1,2}-margins are the independence
// checkerboard lies between the marginal bounds, and the bounds are attained at
// the family's corners.
TEST(MarginalBounds, BracketConstrainedCheckerboardFamily) {
    auto pi2 = cb::independence_function(2);
    cb::MarginalPrescription mp(3, {{{0, 1}, pi2, pi2}, {{1, 2}, pi2, pi2}});
    auto [lo, hi] = cb::marginal_bounds(mp);

    std::mt19937_64 rng(37);
    for (double s : {0.0, 0.05, 0.125, 0.2, 0.25})
        for (double t : {0.0, 0.1, 0.25}) {
            auto cbd = test_support::Checkerboard::constrained_family(s, t);
            for (int k = 0; k < 30; ++k) {
                auto u = random_point(3, rng);
                const double c = cbd.copula(u);
                EXPECT_LE(lo(u), c + 1e-12);
                EXPECT_GE(hi(u), c - 1e-12);
            }
        }

    // at the cube center the family value is exactly the free parameter s
    const cb::Point center{0.5, 0.5, 0.5};
    EXPECT_NEAR(lo(center), 0.0, 1e-15);
    EXPECT_NEAR(hi(center), 0.25, 1e-15);
    EXPECT_NEAR(test_support::Checkerboard::constrained_family(0.0, 0.1).copula(center), 0.0,
                1e-15);
    EXPECT_NEAR(test_support::Checkerboard::constrained_family(0.25, 0.1).copula(center), 0.25,
                1e-15);
}

TEST(MarginalBounds, SurvivalVersionReflects) {
    auto pi2 = cb::independence_function(2);
    cb::MarginalPrescription mp(3, {{{0, 1}, pi2, pi2}, {{1, 2}, pi2, pi2}});
    auto [lo, hi] = cb::marginal_bounds(mp);
    auto [slo, shi] = cb::survival_marginal_bounds(mp);
    EXPECT_EQ(slo.kind(), cb::FunctionKind::quasi_survival);
    std::mt19937_64 rng(43);
    for (int k = 0; k < 40; ++k) {
        auto u = random_point(3, rng);
        cb::Point w{1 - u[0], 1 - u[1], 1 - u[2]};
        EXPECT_DOUBLE_EQ(slo(u), lo(w));
        EXPECT_DOUBLE_EQ(shi(u), hi(w));
    }
}

// Witness search pinned against hand-computed configurations.

TEST(Certifier, SingletonPrescriptionMidpointCase) {
    cb::Prescription p(3, cb::PrescriptionSide::copula_scale);
    p.add({0.5, 0.5, 0.5}, 0.125);
    auto qstar = cb::lower_bound_subset(p);

    cb::GapBoxSet gap;
    gap.dim = 3;
    gap.s = {0.4, 0.4, 0.4};
    gap.eps = {0.1, 0.1, 0.1};
    auto cert = cb::certify_proper_quasi_copula(gap, qstar, cb::BoundSide::lower);
    ASSERT_TRUE(cert.has_value());
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(cert->u[i], 0.45, 1e-9);
    EXPECT_NEAR(cert->volume, -0.025, 1e-12);
    EXPECT_LT(cert->volume, 0.0);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(cert->witness.lower[i], 0.45, 1e-9);
        EXPECT_DOUBLE_EQ(cert->witness.upper[i], 0.5);
    }
}

TEST(Certifier, DiagonalTrackCounterexample) {
    auto pi = cb::independence_function(3);
    auto track = cb::diagonal_track_prescription(pi, {{0.0, 0.5}, {0.6, 1.0}}, 51);
    auto bound = cb::lower_bound_subset(track);
    cb::Box box{{0.56, 0.56, 0.56}, {0.6, 0.6, 0.6}};
    EXPECT_NEAR(cb::box_volume(bound, box), -0.029, 1e-12);

    // corner values, each attained at a segment endpoint of the track
    EXPECT_NEAR(bound(cb::Point{0.6, 0.6, 0.6}), 0.216, 1e-12);
    EXPECT_NEAR(bound(cb::Point{0.56, 0.6, 0.6}), 0.176, 1e-12);
    EXPECT_NEAR(bound(cb::Point{0.56, 0.56, 0.6}), 0.136, 1e-12);
    EXPECT_NEAR(bound(cb::Point{0.56, 0.56, 0.56}), 0.125, 1e-12);
}

TEST(Certifier, IndependenceOverDiagonalGap) {
    auto pi = cb::independence_function(3);
    cb::GapBoxSet gap;
    gap.s = {0.5, 0.5, 0.5};
    gap.eps = {0.1, 0.1, 0.1};
    auto cert = cb::certify_proper_quasi_copula(gap, pi, cb::BoundSide::lower);
    ASSERT_TRUE(cert.has_value());
    // D = 0.216 - 0.125 = 0.091.  The offsets where the closed form holds are
    // boxed in by the mixed gap corners (0.025 <= delta_i <= 0.036, pairwise
    // sums in [0.055, 0.066], total >= 0.091); the max-margin point balances
    // the total against the pair cap at delta = 0.0314.
    double travel = 0.0;
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(cert->u[i], 0.5686, 1e-3);
        travel += 0.6 - cert->u[i];
    }
    EXPECT_LT(cert->volume, 0.0);
    EXPECT_NEAR(cert->volume, 0.091 - travel, 1e-12);
    EXPECT_NEAR(cert->volume, -0.0032, 1e-3);
}

TEST(Certifier, UpperBoundSideDetection) {
    // Corner values rising at full Lipschitz speed on single moves but with a
    // smaller total increment; the interpolating upper hull makes these exact.
    cb::Prescription p(3, cb::PrescriptionSide::copula_scale);
    p.add({0.45, 0.45, 0.45}, 0.1);
    p.add({0.55, 0.45, 0.45}, 0.2);
    p.add({0.45, 0.55, 0.45}, 0.2);
    p.add({0.45, 0.45, 0.55}, 0.2);
    p.add({0.55, 0.55, 0.45}, 0.25);
    p.add({0.55, 0.45, 0.55}, 0.25);
    p.add({0.45, 0.55, 0.55}, 0.25);
    p.add({0.55, 0.55, 0.55}, 0.28);
    auto cstar = cb::upper_bound_subset(p);

    cb::GapBoxSet gap;
    gap.s = {0.45, 0.45, 0.45};
    gap.eps = {0.1, 0.1, 0.1};
    auto cert = cb::certify_proper_quasi_copula(gap, cstar, cb::BoundSide::upper);
    ASSERT_TRUE(cert.has_value());
    // D = 0.18; balance of total (>= 0.18) against the pair caps (<= 0.15)
    // puts the max-margin offset at delta = 0.066.
    double travel = 0.0;
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(cert->u[i], 0.516, 1e-3);
        travel += cert->u[i] - 0.45;
        EXPECT_DOUBLE_EQ(cert->witness.lower[i], 0.45);
        EXPECT_DOUBLE_EQ(cert->witness.upper[i], cert->u[i]);
    }
    EXPECT_LT(cert->volume, 0.0);
    EXPECT_NEAR(cert->volume, 0.18 - travel, 1e-12);
    EXPECT_NEAR(cert->volume, -0.018, 1e-3);
}

TEST(Certifier, UpperSidePatternInfeasibleForIndependence) {
    // For candidates with supermodular increments across the gap corners the
    // upper-side witness pattern cannot hold anywhere, so nothing may be
    // reported even though the raw volume conditions look healthy.
    auto pi = cb::independence_function(3);
    cb::GapBoxSet gap;
    gap.s = {0.5, 0.5, 0.5};
    gap.eps = {0.1, 0.1, 0.1};
    EXPECT_FALSE(cb::certify_proper_quasi_copula(gap, pi, cb::BoundSide::upper).has_value());
}

TEST(Certifier, RejectsWhenConditionsFail) {
    cb::GapBoxSet gap;
    gap.s = {0.4, 0.4, 0.4};
    gap.eps = {0.1, 0.1, 0.1};
    // flat increment: D = 0
    EXPECT_FALSE(cb::certify_proper_quasi_copula(gap, cb::frechet_lower_function(3),
                                                 cb::BoundSide::lower)
                     .has_value());
    // upper side needs C*(s+eps) <= M(s); the upper envelope violates that
    EXPECT_FALSE(cb::certify_proper_quasi_copula(gap, cb::frechet_upper_function(3),
                                                 cb::BoundSide::upper)
                     .has_value());
    // the upper envelope does pass the lower-side conditions
    auto cert =
        cb::certify_proper_quasi_copula(gap, cb::frechet_upper_function(3), cb::BoundSide::lower);
    ASSERT_TRUE(cert.has_value());
    double travel = 0.0;
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(cert->u[i], 0.46, 1e-3);
        travel += 0.5 - cert->u[i];
    }
    EXPECT_LT(cert->volume, 0.0);
    EXPECT_NEAR(cert->volume, 0.1 - travel, 1e-12);
    EXPECT_NEAR(cert->volume, -0.02, 1e-3);
}

TEST(Certifier, LiftedAxesInDimensionFour) {
    auto pi = cb::independence_function(4);
    cb::GapBoxSet gap;
    gap.dim = 4;
    gap.axes = {0, 1, 3};
    gap.s = {0.4, 0.4, 0.4};
    gap.eps = {0.1, 0.1, 0.1};
    auto cert = cb::certify_proper_quasi_copula(gap, pi, cb::BoundSide::lower);
    ASSERT_TRUE(cert.has_value());
    // D = 0.125 - 0.064 = 0.061; balancing the total against the pair caps
    // from the mixed corners gives offsets of 0.0212 on the active axes
    EXPECT_DOUBLE_EQ(cert->u[2], 1.0);
    double travel = 0.0;
    for (int i : {0, 1, 3}) {
        EXPECT_NEAR(cert->u[i], 0.4788, 1e-3);
        travel += 0.5 - cert->u[i];
    }
    EXPECT_LT(cert->volume, 0.0);
    EXPECT_NEAR(cert->volume, 0.061 - travel, 1e-12);
    EXPECT_NEAR(cert->volume, -0.0026, 1e-3);
    EXPECT_DOUBLE_EQ(cert->witness.lower[2], 0.0);
    EXPECT_DOUBLE_EQ(cert->witness.upper[2], 1.0);
}

TEST(Certifier, RandomizedCertificatesMatchClosedForm) {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int produced = 0;
    for (int rep = 0; rep < 60; ++rep) {
        cb::GapBoxSet gap;
        for (int i = 0; i < 3; ++i) {
            gap.s[i] = 0.2 + 0.5 * unif(rng);
            gap.eps[i] = 0.02 + 0.2 * unif(rng) * (1.0 - gap.s[i]);
        }
        cb::DependenceFunction cstar = [&]() -> cb::DependenceFunction {
            switch (rep % 3) {
                case 0:
                    return mixture(3, unif(rng), unif(rng) + 0.2, unif(rng));
                case 1:
                    return cb::lower_bound_subset(
                        random_prescription(3, 2, rng, mixture(3, 0.1, 1.0, 0.4)));
                default:
                    return cb::upper_bound_subset(
                        random_prescription(3, 2, rng, mixture(3, 0.4, 1.0, 0.1)));
            }
        }();
        for (auto side : {cb::BoundSide::lower, cb::BoundSide::upper}) {
            auto cert = cb::certify_proper_quasi_copula(gap, cstar, side);
            if (!cert) continue;
            ++produced;
            EXPECT_LT(cert->volume, 0.0);
            cb::Point sp(3), sep(3);
            for (int i = 0; i < 3; ++i) {
                sp[i] = gap.s[i];
                sep[i] = gap.s[i] + gap.eps[i];
            }
            const double D = cstar(sep) - cstar(sp);
            double travel = 0.0;
            for (int i = 0; i < 3; ++i)
                travel += side == cb::BoundSide::lower ? sep[i] - cert->u[i]
                                                       : cert->u[i] - gap.s[i];
            EXPECT_NEAR(cert->volume, D - travel, 1e-12);
        }
    }
    EXPECT_GT(produced, 10);
}

TEST(Certifier, SampledGapPrescriptionInterpolates) {
    auto pi = cb::independence_function(3);
    cb::GapBoxSet gap;
    gap.s = {0.3, 0.4, 0.5};
    gap.eps = {0.2, 0.1, 0.15};
    auto p = cb::gap_box_prescription(gap, pi, 5);
    auto lo = cb::lower_bound_subset(p);
    cb::Point sp{0.3, 0.4, 0.5}, sep{0.5, 0.5, 0.65};
    EXPECT_NEAR(lo(sp), pi(sp), 1e-15);
    EXPECT_NEAR(lo(sep), pi(sep), 1e-15);
}

TEST(Certifier, GapBoxValidation) {
    cb::GapBoxSet gap;
    gap.dim = 2;
    EXPECT_THROW(gap.validate(), cb::invalid_input);
    gap.dim = 3;
    gap.s = {0.4, 0.4, 0.4};
    gap.eps = {0.0, 0.1, 0.1};
    EXPECT_THROW(gap.validate(), cb::invalid_input);
    gap.eps = {0.7, 0.1, 0.1};
    EXPECT_THROW(gap.validate(), cb::invalid_input);
    gap.eps = {0.1, 0.1, 0.1};
    EXPECT_NO_THROW(gap.validate());
    gap.dim = 4;
    gap.axes = {0, 1, 1};
    EXPECT_THROW(gap.validate(), cb::invalid_input);
}
