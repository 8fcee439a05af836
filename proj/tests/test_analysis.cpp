// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "etrap/analysis.hpp"

using namespace etrap;

namespace {

Trajectory sampled(double f, double amplitude, double dt, std::size_t n, double micromotion = 0.0)
{
    Trajectory t;
    t.sample_interval = dt;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = i * dt;
        const double x = amplitude * std::cos(two_pi * f * s) * (1.0 + micromotion * std::cos(two_pi * 1.6e9 * s));
        t.positions.push_back(Vec3{x, 0, 0});
    }
    return t;
}

const DriveSpec kDrive{};
const double kDt = 0.75 / 1.6e9;

}  // namespace

TEST(Extract, RecoversSyntheticSecularTone)
{
    const auto t = sampled(211.37e6, 40e-6, kDt, 20000, 0.2);
    const auto p = extract_secular_frequency(t, kDrive.omega);
    EXPECT_NEAR(p.frequency, 211.37e6, 0.1 * p.bin_width);
}

TEST(Extract, AmplitudeIgnoresTransient)
{
    auto t = sampled(150e6, 30e-6, kDt, 1000);
    t.positions[0].x = 1.0;  // inside the discarded 10%
    EXPECT_NEAR(extract_amplitude(t), 30e-6, 1e-9);
}

TEST(Extract, RejectsShortAndFlatSeries)
{
    EXPECT_THROW(extract_secular_frequency(sampled(150e6, 1e-6, kDt, 12), kDrive.omega), InvalidArgument);
    EXPECT_THROW(extract_secular_frequency(sampled(0.0, 1e-6, kDt, 4000), kDrive.omega), NoSecularMotion);
    // Too few secular cycles for a trustworthy line.
    EXPECT_THROW(extract_secular_frequency(sampled(20e6, 1e-6, kDt, 600), kDrive.omega), InvalidArgument);
}

TEST(Extract, NyquistGuard)
{
    EXPECT_THROW(extract_secular_frequency(sampled(100e6, 1e-6, 3.0 / 1.6e9, 4000), kDrive.omega), InvalidArgument);
}

TEST(Lock, DetectsSmallestMatchingOrder)
{
    EXPECT_EQ(detect_subharmonic_lock(1.6e9 / 6.0, kDrive.omega, 1e5, 12), 6);
    EXPECT_EQ(detect_subharmonic_lock(1.6e9 / 6.0 + 2e5, kDrive.omega, 1e5, 12), std::nullopt);
    EXPECT_EQ(detect_subharmonic_lock(1.6e9 / 13.0, kDrive.omega, 1e5, 12), std::nullopt);
    EXPECT_EQ(detect_subharmonic_lock(1.6e9 / 13.0, kDrive.omega, 1e5, 13), 13);
    EXPECT_THROW(detect_subharmonic_lock(-1.0, kDrive.omega, 1e5, 12), InvalidArgument);
}

TEST(Lock, SummaryUsesBinTolerance)
{
    const auto t = sampled(1.6e9 / 6.0, 30e-6, kDt, 40000);
    const auto s = summarize_motion(t, kDrive.omega, 3.0, 12);
    EXPECT_EQ(s.lock_order, 6);
    const auto off = summarize_motion(sampled(1.6e9 / 6.0 + 2e6, 30e-6, kDt, 40000), kDrive.omega, 3.0, 12);
    EXPECT_FALSE(off.lock_order.has_value());
}

namespace {

SweepSpec small_spec()
{
    SweepSpec s;
    s.model = Anharmonic1D{1.5237e8, 670e-6, 1.25, 2};
    s.distance_min = 20e-6;
    s.distance_max = 260e-6;
    s.distance_count = 5;
    s.phase_count = 4;
    s.term.time_cap = 0.3e-6;
    return s;
}

}  // namespace

TEST(Sweep, IndependentOfWorkerCount)
{
    SweepSpec a = small_spec();
    SweepSpec b = small_spec();
    b.workers = 3;
    const auto ma = run_sweep(a);
    const auto mb = run_sweep(b);
    ASSERT_EQ(ma.cells.size(), 20u);
    std::ostringstream oa;
    std::ostringstream ob;
    write_sweep(oa, ma);
    write_sweep(ob, mb);
    EXPECT_EQ(oa.str(), ob.str());
}

TEST(Sweep, CellsMatchSingleIntegrations)
{
    const SweepSpec s = small_spec();
    const auto map = run_sweep(s);
    for (int i = 0; i < s.distance_count; ++i) {
        for (int j = 0; j < s.phase_count; ++j) {
            InitialCondition ic;
            ic.position = Vec3{s.distance(i), 0, 0};
            ic.phase = s.phase(j);
            const auto ref = integrate(s.model, s.drive, s.particle, ic, s.term);
            EXPECT_EQ(map.cell(i, j).outcome.storage_time, ref.storage_time);
            EXPECT_EQ(map.cell(i, j).outcome.capped, ref.capped);
            EXPECT_FALSE(map.cell(i, j).outcome.trajectory.has_value());
            EXPECT_EQ(map.cell(i, j).summary.has_value(), ref.capped);
        }
    }
}

TEST(Sweep, OutputHeaderAndRowCount)
{
    const auto map = run_sweep(small_spec());
    std::ostringstream os;
    write_sweep(os, map, {"note = test"});
    std::istringstream is(os.str());
    std::string line;
    int comments = 0;
    int rows = 0;
    bool seen_columns = false;
    while (std::getline(is, line)) {
        if (line.rfind('#', 0) == 0) {
            ++comments;
        } else if (!seen_columns) {
            EXPECT_EQ(line, "x0_um,phase_rad,storage_time_s,escaped,capped,secular_MHz,amplitude_um,lock_order");
            seen_columns = true;
        } else {
            ++rows;
        }
    }
    EXPECT_GE(comments, 5);
    EXPECT_EQ(rows, 20);
    EXPECT_NE(os.str().find("code_version = etrap"), std::string::npos);
}

TEST(Sweep, RejectsDegenerateAxes)
{
    SweepSpec s = small_spec();
    s.distance_count = 1;
    EXPECT_THROW(run_sweep(s), InvalidArgument);
    s = small_spec();
    s.distance_max = s.distance_min;
    EXPECT_THROW(run_sweep(s), InvalidArgument);
}

namespace {

SweepMap synthetic_map()
{
    SweepMap m;
    m.spec.distance_min = 10e-6;
    m.spec.distance_max = 60e-6;
    m.spec.distance_count = 6;
    m.spec.phase_count = 2;
    const double amps[] = {10e-6, 12e-6, 14e-6, 30e-6, 32e-6};
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 2; ++j) {
            SweepCell c;
            c.outcome.capped = i < 5;
            c.outcome.escaped = !c.outcome.capped;
            if (c.outcome.capped) {
                MotionSummary s;
                s.amplitude = amps[i];
                s.secular_frequency = 250e6 - 10e6 * i;
                if (i >= 3) {
                    s.lock_order = 6;
                }
                c.summary = s;
            }
            m.cells.push_back(c);
        }
    }
    return m;
}

}  // namespace

TEST(Boundary, FindsLossLockAndJump)
{
    const auto b = analyze_phase(synthetic_map(), 1, 6, 1.5);
    EXPECT_EQ(b.first_loss, 5);
    EXPECT_EQ(b.last_stable, 4);
    EXPECT_DOUBLE_EQ(*b.last_stable_frequency, 210e6);
    EXPECT_EQ(b.lock_onset, 3);
    EXPECT_NEAR(*b.onset_amplitude_ratio, 30.0 / 14.0, 1e-12);
    EXPECT_EQ(b.first_jump, 3);
}

TEST(Slice, OnGridAndOffGridPhases)
{
    const auto map = synthetic_map();
    const auto s = phase_slice(map, std::numbers::pi);
    EXPECT_EQ(s.phase_index, 1);
    EXPECT_EQ(s.rows.size(), 6u);
    EXPECT_FALSE(s.rows.back().capped);
    EXPECT_TRUE(std::isnan(s.rows.back().amplitude));
    EXPECT_EQ(phase_slice(map, two_pi).phase_index, 0);
    try {
        phase_slice(map, 1.0);
        FAIL() << "expected OffGridPhase";
    } catch (const OffGridPhase& e) {
        EXPECT_EQ(e.nearest_index(), 0);
        EXPECT_EQ(e.nearest(), 0.0);
    }
}

TEST(Dips, SyntheticSpectrum)
{
    std::vector<double> f;
    std::vector<double> s;
    for (int k = 0; k <= 300; ++k) {
        f.push_back((20.0 + k) * 1e6);
        const double d1 = 0.8 * std::exp(-0.5 * std::pow((k - 130) / 1.5, 2));
        const double d2 = 0.4 * std::exp(-0.5 * std::pow((k - 40) / 1.0, 2));
        s.push_back(1.0 - d1 - d2);
    }
    double baseline = 0.0;
    double sigma = 0.0;
    std::vector<bool> flags;
    const auto dips = detect_dips(f, s, 64, &baseline, &sigma, &flags);
    ASSERT_EQ(dips.size(), 2u);
    EXPECT_DOUBLE_EQ(dips[0].center, 60e6);
    EXPECT_DOUBLE_EQ(dips[1].center, 150e6);
    EXPECT_NEAR(dips[1].depth, 0.8, 1e-12);
    EXPECT_NEAR(dips[1].width, 3e6, 1.01e6);
    EXPECT_DOUBLE_EQ(baseline, 1.0);
    EXPECT_DOUBLE_EQ(sigma, 1.0 / 64);
    EXPECT_TRUE(flags[130]);
    EXPECT_FALSE(flags[200]);
}

TEST(Dips, SaturatedDipCentresOnItsFloor)
{
    std::vector<double> f;
    std::vector<double> s;
    for (int k = 0; k < 40; ++k) {
        f.push_back((300 + k) * 1e6);
        s.push_back(1.0);
    }
    s[16] = 0.5;
    s[17] = 0.0;
    s[18] = 0.0;
    s[19] = 0.75;
    const auto dips = detect_dips(f, s, 16);
    ASSERT_EQ(dips.size(), 1u);
    EXPECT_DOUBLE_EQ(dips[0].center, 317.5e6);
    EXPECT_DOUBLE_EQ(dips[0].width, 3e6);
}

TEST(Dips, FlatSpectrumHasNone)
{
    const std::vector<double> f{1e6, 2e6, 3e6, 4e6};
    const std::vector<double> s{1.0, 1.0, 1.0, 1.0};
    EXPECT_TRUE(detect_dips(f, s, 16).empty());
}

TEST(Ensemble, InsideBoxDeterministicAndStratified)
{
    const Vec3 half{50e-6, 50e-6, 50e-6};
    const auto a = make_tickle_ensemble(32, half, 9);
    const auto b = make_tickle_ensemble(32, half, 9);
    const auto c = make_tickle_ensemble(32, half, 10);
    std::set<int> strata;
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_LE(std::fabs(a[i].position.x), half.x);
        EXPECT_LE(std::fabs(a[i].position.z), half.z);
        EXPECT_EQ(a[i].position.x, b[i].position.x);
        EXPECT_EQ(a[i].velocity.x, 0.0);
        strata.insert(static_cast<int>(std::floor(a[i].phase / two_pi * 32)));
    }
    EXPECT_EQ(strata.size(), 32u);
    EXPECT_NE(a[0].position.x, c[0].position.x);
}

TEST(TickleScan, ZeroAmplitudeKeepsEverything)
{
    const ParticleSpec p;
    const FieldModel m = make_separable(Anharmonic1D{1.5237e8, 670e-6, 1.25, 2}, two_pi * 40e6, p);
    TickleScanSpec scan;
    scan.f_min = 50e6;
    scan.f_max = 60e6;
    scan.f_step = 5e6;
    scan.duration = 0.1e-6;
    const auto ens = make_tickle_ensemble(4, Vec3{20e-6, 20e-6, 20e-6}, 1);
    const auto s = tickle_scan(ens, m, DriveSpec{}, p, scan);
    ASSERT_EQ(s.survival.size(), 3u);
    for (double v : s.survival) {
        EXPECT_EQ(v, 1.0);
    }
    EXPECT_TRUE(s.dips.empty());
}

TEST(TickleScan, UnstableEnsembleIsRejected)
{
    const ParticleSpec p;
    Separable3D s = make_separable(HarmonicRF1D{1.5237e8}, 0.0, p);
    s.static_curvature = 5e3;  // anti-confining along z for an electron
    TickleScanSpec scan;
    scan.f_min = scan.f_max = 50e6;
    scan.duration = 0.2e-6;
    scan.amplitude = 1.0;
    const auto ens = make_tickle_ensemble(4, Vec3{20e-6, 20e-6, 20e-6}, 1);
    EXPECT_THROW(tickle_scan(ens, s, DriveSpec{}, p, scan), InvalidEnsemble);
    EXPECT_THROW(tickle_scan(ens, HarmonicRF1D{1.5e8}, DriveSpec{}, p, scan), InvalidArgument);
}
