// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "etrap/analysis.hpp"
#include "etrap/dynamics.hpp"
#include "oracles.hpp"

using namespace etrap;

namespace {

constexpr double kGradient = 1.5237e8;

InitialCondition at_x(double x, double phase = 0.0)
{
    InitialCondition ic;
    ic.position = Vec3{x, 0, 0};
    ic.phase = phase;
    return ic;
}

TerminationSpec capped(double cap)
{
    TerminationSpec t;
    t.time_cap = cap;
    return t;
}

}  // namespace

TEST(Integrate, FreeFlightEscapeTimeIsInterpolated)
{
    InitialCondition ic;
    ic.velocity = Vec3{1e6, 0, 0};
    const auto out = integrate(HarmonicRF1D{0.0}, DriveSpec{}, ParticleSpec{}, ic, capped(1e-6));
    EXPECT_TRUE(out.escaped);
    EXPECT_FALSE(out.capped);
    EXPECT_NEAR(out.storage_time, 500e-6 / 1e6, 1e-21);
}

TEST(Integrate, ParticleAtRestStaysToCap)
{
    const auto out = integrate(HarmonicRF1D{kGradient}, DriveSpec{}, ParticleSpec{}, at_x(0.0), capped(1e-7));
    EXPECT_TRUE(out.capped);
    EXPECT_FALSE(out.escaped);
    EXPECT_DOUBLE_EQ(out.storage_time, 1e-7);
    EXPECT_EQ(out.final_position.x, 0.0);
}

TEST(Integrate, OverflowIsReportedAsDivergence)
{
    InitialCondition ic;
    ic.velocity = Vec3{1e308, 0, 0};
    EXPECT_THROW(integrate(HarmonicRF1D{kGradient}, DriveSpec{}, ParticleSpec{}, ic, capped(1e-7)), IntegrationDiverged);
}

TEST(Integrate, RejectsBadTermination)
{
    auto t = capped(1e-7);
    t.steps_per_period = 16;
    EXPECT_THROW(integrate(HarmonicRF1D{kGradient}, DriveSpec{}, ParticleSpec{}, at_x(1e-5), t), InvalidArgument);
    t = capped(1e-7);
    t.escape_radius = 1.0;
    EXPECT_THROW(integrate(HarmonicRF1D{kGradient}, DriveSpec{}, ParticleSpec{}, at_x(1e-5), t), InvalidArgument);
}

TEST(Integrate, FullTurnPhaseIsIdentity)
{
    const FieldModel m = Anharmonic1D{kGradient, 670e-6, 1.25, 2};
    const auto a = integrate(m, DriveSpec{}, ParticleSpec{}, at_x(80e-6, 0.0), capped(2e-7));
    const auto b = integrate(m, DriveSpec{}, ParticleSpec{}, at_x(80e-6, two_pi), capped(2e-7));
    EXPECT_EQ(a.final_position.x, b.final_position.x);
    EXPECT_EQ(a.final_velocity.x, b.final_velocity.x);
}

TEST(Integrate, OneDimensionalPathMatchesGeneralPath)
{
    // A 3D model with no static field and a y-free start follows the same
    // equation as the 1D model; the two code paths must agree closely.
    const Anharmonic1D radial{kGradient, 670e-6, 1.25, 2};
    Separable3D s;
    s.radial = radial;
    const auto a = integrate(FieldModel{radial}, DriveSpec{}, ParticleSpec{}, at_x(120e-6, 0.4), capped(1e-7));
    const auto b = integrate(FieldModel{s}, DriveSpec{}, ParticleSpec{}, at_x(120e-6, 0.4), capped(1e-7));
    EXPECT_NEAR(a.final_position.x, b.final_position.x, 1e-12);
    EXPECT_EQ(b.final_position.y, 0.0);
}

TEST(Integrate, SecularFrequencyMatchesFloquetOracle)
{
    auto t = capped(10e-6);
    t.record_trajectory = true;
    const DriveSpec d;
    const auto out = integrate(HarmonicRF1D{kGradient}, d, ParticleSpec{}, at_x(50e-6), t);
    ASSERT_TRUE(out.capped);
    ASSERT_TRUE(out.trajectory.has_value());
    const double f = extract_secular_frequency(*out.trajectory, d.omega).frequency;
    const double q = oracle::electron_q(kGradient, d.omega);
    EXPECT_NEAR(q, 0.53, 0.005);
    EXPECT_NEAR(f / oracle::secular_hz(0.0, q, 1.6e9), 1.0, 2e-3);
}

TEST(Integrate, StepRefinementConverges)
{
    const FieldModel m = Anharmonic1D{kGradient, 670e-6, 1.25, 2};
    const auto [coarse, fine] = convergence_probe(m, DriveSpec{}, ParticleSpec{}, at_x(100e-6, 1.0), capped(1e-6));
    ASSERT_TRUE(coarse.capped && fine.capped);
    EXPECT_NEAR(coarse.final_position.x, fine.final_position.x, 1e-9);
}

TEST(Integrate, TrajectorySamplingStaysAboveNyquist)
{
    auto t = capped(5e-8);
    t.record_trajectory = true;
    const DriveSpec d;
    const auto out = integrate(HarmonicRF1D{kGradient}, d, ParticleSpec{}, at_x(10e-6), t);
    const auto& tr = *out.trajectory;
    EXPECT_EQ(tr.decimation, 96);
    EXPECT_NEAR(tr.sample_interval, tr.decimation * d.period() / 128.0, 1e-24);
    EXPECT_GE(1.0 / tr.sample_interval, 4.0 / 3.0 * units::hertz(d.omega) * (1.0 - 1e-12));
    EXPECT_EQ(tr.positions.front().x, 10e-6);
}

TEST(Propagate, TimeReversalReturnsToStart)
{
    Separable3D s = make_separable(Anharmonic1D{kGradient, 670e-6, 1.25, 2}, two_pi * 40e6, ParticleSpec{});
    s.static_cubic = 1e6;
    const FieldModel m = s;
    const PhaseSpace<Vec3> start{Vec3{60e-6, -30e-6, 20e-6}, Vec3{1e3, 2e3, -5e2}};
    const DriveSpec d;
    const double span = 200 * d.period();
    const auto there = propagate(m, d, ParticleSpec{}, start, 0.0, 0.3, span, 200 * 256);
    const auto back = propagate(m, d, ParticleSpec{}, there, span, 0.3, -span, 200 * 256);
    EXPECT_NEAR(back.r.x, start.r.x, 1e-12);
    EXPECT_NEAR(back.r.y, start.r.y, 1e-12);
    EXPECT_NEAR(back.r.z, start.r.z, 1e-12);
    EXPECT_NEAR(back.v.x, start.v.x, 1e-3);
}

TEST(Propagate, StaticOnlyMotionConservesEnergy)
{
    Separable3D s = make_separable(HarmonicRF1D{0.0}, two_pi * 40e6, ParticleSpec{});
    s.static_cubic = 1e3;
    s.static_quartic = 1e7;
    const FieldModel m = s;
    const ParticleSpec p;
    auto energy = [&](const PhaseSpace<Vec3>& y) {
        return 0.5 * p.mass * dot(y.v, y.v) + p.charge * static_potential(m, y.r);
    };
    const PhaseSpace<Vec3> start{Vec3{40e-6, 10e-6, 50e-6}, Vec3{0, 3e3, 0}};
    const auto end = propagate(m, DriveSpec{}, p, start, 0.0, 0.0, 20e-9, 4000);
    EXPECT_NEAR(energy(end) / energy(start), 1.0, 1e-10);
}

TEST(Noise, ZeroSigmaMatchesNoiseFreeRun)
{
    const FieldModel m = Anharmonic1D{kGradient, 670e-6, 1.25, 2};
    DriveNoiseSpec n;
    n.seed = 5;
    const auto a = integrate(m, DriveSpec{}, ParticleSpec{}, at_x(100e-6), capped(2e-7));
    const auto b = integrate(m, DriveSpec{}, ParticleSpec{}, at_x(100e-6), capped(2e-7), std::nullopt, n);
    EXPECT_EQ(a.final_position.x, b.final_position.x);
}

TEST(Noise, SeededRunsRepeatAndSeedsDiffer)
{
    const FieldModel m = Anharmonic1D{kGradient, 670e-6, 1.25, 2};
    DriveNoiseSpec n;
    n.relative_sigma = 0.05;
    n.hold_periods = 4;
    n.seed = 11;
    const auto a = integrate(m, DriveSpec{}, ParticleSpec{}, at_x(100e-6), capped(2e-7), std::nullopt, n);
    const auto b = integrate(m, DriveSpec{}, ParticleSpec{}, at_x(100e-6), capped(2e-7), std::nullopt, n);
    n.seed = 12;
    const auto c = integrate(m, DriveSpec{}, ParticleSpec{}, at_x(100e-6), capped(2e-7), std::nullopt, n);
    EXPECT_EQ(a.final_position.x, b.final_position.x);
    EXPECT_NE(a.final_position.x, c.final_position.x);
}

TEST(Tickle, ZeroAmplitudeLeavesMotionUnchanged)
{
    const FieldModel m = HarmonicRF1D{kGradient};
    TickleSpec tk;
    tk.omega = two_pi * 100e6;
    const auto a = integrate(m, DriveSpec{}, ParticleSpec{}, at_x(30e-6), capped(2e-7));
    const auto b = integrate(m, DriveSpec{}, ParticleSpec{}, at_x(30e-6), capped(2e-7), tk);
    EXPECT_EQ(a.final_position.x, b.final_position.x);
}

TEST(Tickle, ResonantDriveEjectsOffResonantDoesNot)
{
    const FieldModel m = HarmonicRF1D{kGradient};
    const DriveSpec d;
    const double f = oracle::secular_hz(0.0, oracle::electron_q(kGradient, d.omega), 1.6e9);
    TickleSpec tk;
    tk.field_amplitude = 20.0;
    tk.omega = two_pi * f;
    const auto on = integrate(m, d, ParticleSpec{}, at_x(10e-6), capped(2e-6), tk);
    tk.omega = two_pi * 0.6 * f;
    const auto off = integrate(m, d, ParticleSpec{}, at_x(10e-6), capped(2e-6), tk);
    EXPECT_TRUE(on.escaped);
    EXPECT_TRUE(off.capped);
}

TEST(Batch, BitIdenticalToScalarIntegration)
{
    const FieldModel models[] = {
        HarmonicRF1D{kGradient},
        Anharmonic1D{kGradient, 670e-6, 1.25, 2},
        Anharmonic1D{kGradient, 700e-6, 1.0, 1},
        Anharmonic1D{kGradient, 700e-6, 2.7, 2},
    };
    std::vector<InitialCondition> inits;
    for (int i = 0; i < 13; ++i) {
        inits.push_back(at_x((20.0 + 37.0 * i) * 1e-6, 0.45 * i));
    }
    auto t = capped(3e-7);
    t.record_trajectory = true;
    for (const auto& m : models) {
        std::map<std::size_t, BatchOutcome> got;
        integrate_each(m, DriveSpec{}, ParticleSpec{}, inits, t,
                       [&](std::size_t k, BatchOutcome b) { got.emplace(k, std::move(b)); });
        ASSERT_EQ(got.size(), inits.size());
        for (std::size_t k = 0; k < inits.size(); ++k) {
            const auto ref = integrate(m, DriveSpec{}, ParticleSpec{}, inits[k], t);
            const auto& o = got.at(k).outcome;
            EXPECT_FALSE(got.at(k).diverged);
            EXPECT_EQ(o.storage_time, ref.storage_time) << k;
            EXPECT_EQ(o.escaped, ref.escaped);
            EXPECT_EQ(o.final_position.x, ref.final_position.x);
            EXPECT_EQ(o.final_velocity.x, ref.final_velocity.x);
            ASSERT_TRUE(o.trajectory && ref.trajectory);
            ASSERT_EQ(o.trajectory->size(), ref.trajectory->size());
            for (std::size_t s = 0; s < o.trajectory->size(); ++s) {
                ASSERT_EQ(o.trajectory->positions[s].x, ref.trajectory->positions[s].x);
            }
        }
    }
}

TEST(Batch, DivergenceIsReportedPerStart)
{
    std::vector<InitialCondition> inits{at_x(10e-6), at_x(0.0)};
    inits[1].velocity = Vec3{1e308, 0, 0};
    std::map<std::size_t, BatchOutcome> got;
    integrate_each(FieldModel{HarmonicRF1D{kGradient}}, DriveSpec{}, ParticleSpec{}, inits, capped(1e-8),
                   [&](std::size_t k, BatchOutcome b) { got.emplace(k, std::move(b)); });
    EXPECT_FALSE(got.at(0).diverged);
    EXPECT_TRUE(got.at(1).diverged);
}
