// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "etrap/mathieu.hpp"
#include "oracles.hpp"

using namespace etrap;

TEST(Mathieu, QFromGradientMatchesHandFormula)
{
    const DriveSpec d;
    const auto p = mathieu_params(HarmonicRF1D{1.5237e8}, d, ParticleSpec{});
    EXPECT_NEAR(p.q / oracle::electron_q(1.5237e8, d.omega), 1.0, 1e-12);
    EXPECT_EQ(p.a, 0.0);
    EXPECT_NEAR(p.q, 0.530, 0.001);
}

TEST(Mathieu, SeparableAxesSumToZero)
{
    const ParticleSpec e;
    const auto s = make_separable(HarmonicRF1D{1.5e8}, two_pi * 40e6, e);
    const DriveSpec d;
    const auto axes = mathieu_axes(s, d, e);
    EXPECT_NEAR(axes.x.a + axes.y.a + axes.z.a, 0.0, 1e-15);
    // a_z = 4 omega_z^2 / Omega^2 for a confining static well.
    EXPECT_NEAR(axes.z.a, 4.0 * std::pow(40e6 / 1.6e9, 2), 1e-12);
}

TEST(Mathieu, BetaAgreesWithAdaptiveOracle)
{
    for (double a : {-0.05, 0.0, 0.02, 0.1}) {
        for (double q : {0.05, 0.2, 0.4, 0.53, 0.7, 0.85}) {
            const auto v = classify_stability({a, q});
            const double tr = oracle::mathieu_trace(a, q);
            ASSERT_EQ(v.stable, std::fabs(tr) < 2.0) << a << ' ' << q;
            if (v.stable) {
                EXPECT_NEAR(v.beta, oracle::mathieu_beta(a, q), 1e-7) << a << ' ' << q;
            }
        }
    }
}

TEST(Mathieu, SecularFrequencyAtNominalQ)
{
    const DriveSpec d;
    const auto v = classify_stability({0.0, 0.53}, d);
    ASSERT_TRUE(v.stable);
    EXPECT_NEAR(units::hertz(v.secular_frequency) / oracle::secular_hz(0.0, 0.53, 1.6e9), 1.0, 1e-7);
    EXPECT_NEAR(v.beta, 0.3994, 5e-4);
    EXPECT_NEAR(v.determinant, 1.0, 1e-9);
}

TEST(Mathieu, LowestOrderEstimateOnlyAgreesAtSmallQ)
{
    const DriveSpec d;
    const double small = secular_estimate({0.0, 0.05}, d) / classify_stability({0.0, 0.05}, d).secular_frequency;
    EXPECT_NEAR(small, 1.0, 1e-3);
    const double big = secular_estimate({0.0, 0.53}, d) / classify_stability({0.0, 0.53}, d).secular_frequency;
    EXPECT_GT(std::fabs(big - 1.0), 0.05);
}

TEST(Mathieu, NegativeRadicandHasNoRealFrequency)
{
    EXPECT_THROW(secular_estimate({-0.1, 0.2}, DriveSpec{}), NoRealSecularFrequency);
}

TEST(Mathieu, FirstStabilityEdgeOnAxis)
{
    // The a = 0 edge lies at q = 0.908046...
    EXPECT_TRUE(classify_stability({0.0, 0.907}).stable);
    EXPECT_FALSE(classify_stability({0.0, 0.910}).stable);

    const auto rows = stability_scan(0.0, 0.80, 1.00, 0.001);
    int edge = -1;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i - 1].stable && !rows[i].stable) {
            edge = static_cast<int>(i);
            break;
        }
    }
    ASSERT_GE(edge, 1);
    const double lo = rows[edge - 1].q;
    const double hi = rows[edge].q;
    EXPECT_LT(std::fabs(oracle::mathieu_trace(0.0, lo)), 2.0);
    EXPECT_GT(std::fabs(oracle::mathieu_trace(0.0, hi)), 2.0);
}

TEST(Mathieu, DeepInstabilityIsMarkedUnstable)
{
    const auto v = classify_stability({0.0, 5.0});
    EXPECT_FALSE(v.stable);
    EXPECT_GT(v.multiplier_magnitude, 1.0);
    const auto neg = classify_stability({-0.5, 0.0});
    EXPECT_FALSE(neg.stable);
}

TEST(Mathieu, ScanShapeAndOutput)
{
    const auto rows = stability_scan(0.0, 0.1, 0.3, 0.05);
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_NEAR(rows.back().q, 0.3, 1e-12);
    std::ostringstream os;
    write_stability_rows(os, rows);
    EXPECT_EQ(os.str().substr(0, 15), "a,q,stable,beta");
    EXPECT_THROW(stability_scan(0.0, 0.3, 0.1, 0.05), InvalidArgument);
    EXPECT_THROW(stability_scan(0.0, 0.1, 0.3, 0.0), InvalidArgument);
}
