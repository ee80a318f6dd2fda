#include <gtest/gtest.h>

#include <random>

#include "legimpact/errors.hpp"
#include "legimpact/impactor.hpp"
#include "legimpact/protocol.hpp"

using namespace legimpact;

namespace {

// Normal-equation sums, written out by hand.
std::pair<double, double> ols_by_hand(const std::vector<CalibrationSample>& s) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& c : s) {
    n += 1;
    sx += c.pressure;
    sy += c.peak_velocity;
    sxx += c.pressure * c.pressure;
    sxy += c.pressure * c.peak_velocity;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

// Least squares by successive grid refinement over (slope, intercept).
double grid_max_residual(const std::vector<CalibrationSample>& s) {
  double a0 = 0.0, b0 = 1.0, da = 0.05, db = 2.0;
  double best_a = a0, best_b = b0;
  for (int round = 0; round < 30; ++round) {
    double best = INFINITY;
    for (int i = -20; i <= 20; ++i) {
      for (int j = -20; j <= 20; ++j) {
        const double a = a0 + da * i / 20.0, b = b0 + db * j / 20.0;
        double sse = 0;
        for (const auto& c : s) sse += std::pow(a * c.pressure + b - c.peak_velocity, 2);
        if (sse < best) best = sse, best_a = a, best_b = b;
      }
    }
    a0 = best_a, b0 = best_b, da *= 0.25, db *= 0.25;
  }
  double worst = 0;
  for (const auto& c : s) worst = std::max(worst, std::abs(best_a * c.pressure + best_b - c.peak_velocity));
  return worst;
}

}  // namespace

TEST(PeakVelocity, DefaultCalibrationAnchors) {
  const auto c = CalibrationMap::defaults();
  EXPECT_NEAR(peak_velocity_from_pressure(85, c), 3.89, 1e-12);
  EXPECT_NEAR(peak_velocity_from_pressure(95, c), 4.23, 1e-12);
  EXPECT_NEAR(peak_velocity_from_pressure(50, c), 2.70, 1e-12);
}

TEST(PeakVelocity, OutOfRangePressureThrows) {
  const auto c = CalibrationMap::defaults();
  EXPECT_THROW(peak_velocity_from_pressure(10, c), PressureOutOfRange);
  EXPECT_THROW(peak_velocity_from_pressure(101, c), PressureOutOfRange);
}

TEST(PeakVelocity, LipschitzBoundIsExactSlope) {
  const auto c = CalibrationMap::defaults();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> p(15, 100);
  for (int i = 0; i < 1000; ++i) {
    const double p1 = p(rng), p2 = p(rng);
    const double dv = std::abs(peak_velocity_from_pressure(p1, c) - peak_velocity_from_pressure(p2, c));
    EXPECT_NEAR(dv, c.slope * std::abs(p1 - p2), 1e-12);
  }
}

TEST(FitCalibration, TwoPointLabelsGiveDefaultLine) {
  const std::vector<CalibrationSample> s{{85, 3.89}, {95, 4.23}};
  const auto [slope, icpt] = ols_by_hand(s);
  const auto m = fit_calibration(s);
  EXPECT_NEAR(slope, 0.034, 1e-12);
  EXPECT_NEAR(icpt, 1.00, 1e-10);
  EXPECT_NEAR(m.slope, slope, 1e-12);
  EXPECT_NEAR(m.intercept, icpt, 1e-10);
  EXPECT_LT(m.max_residual, 1e-12);
}

TEST(FitCalibration, ExactLineIsRecovered) {
  std::vector<CalibrationSample> s;
  for (double p : {20.0, 40.0, 60.0, 80.0, 100.0}) s.push_back({p, 0.03 * p + 1.2});
  const auto m = fit_calibration(s);
  EXPECT_NEAR(m.slope, 0.03, 1e-12);
  EXPECT_NEAR(m.intercept, 1.2, 1e-11);
  EXPECT_LT(m.max_residual, 1e-12);
  EXPECT_EQ(m.min_pressure, 20.0);
  EXPECT_EQ(m.max_pressure, 100.0);
}

TEST(FitCalibration, OnePerturbedPointIsRejected) {
  std::vector<CalibrationSample> s;
  for (double p : {20.0, 40.0, 60.0, 80.0, 100.0}) s.push_back({p, 0.03 * p + 1.2});
  s[2].peak_velocity += 0.2;
  const double oracle = grid_max_residual(s);
  EXPECT_GT(oracle, 0.1);
  EXPECT_THROW(fit_calibration(s), CalibrationRejected);
}

TEST(FitCalibration, MatchesNormalEquationsOnNoisyData) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> noise(-0.04, 0.04);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<CalibrationSample> s;
    for (int i = 0; i < 8; ++i) s.push_back({15.0 + 12.0 * i, 0.034 * (15.0 + 12.0 * i) + 1.0 + noise(rng)});
    const auto [slope, icpt] = ols_by_hand(s);
    const auto m = fit_calibration(s);
    EXPECT_NEAR(m.slope, slope, 1e-12);
    EXPECT_NEAR(m.intercept, icpt, 1e-10);
  }
}

TEST(FitCalibration, DegenerateInputs) {
  EXPECT_THROW(fit_calibration(std::vector<CalibrationSample>{{50, 2.7}}), DegenerateSamples);
  EXPECT_THROW(fit_calibration(std::vector<CalibrationSample>{{50, 2.7}, {50, 2.8}}), DegenerateSamples);
  EXPECT_THROW(fit_calibration(std::vector<CalibrationSample>{{50, 2.7}, {60, 2.0}}), CalibrationRejected);
}

TEST(RamStep, FreeCoastKeepsVelocity) {
  ImpactorSpec spec;
  ImpactorState s = fire(make_charged_ram(0.0), 3.0, spec);
  for (int i = 0; i < 1000 && s.phase != RamPhase::Coasting; ++i) s = ram_step(s, spec, 0, 1e-3, i * 1e-3);
  ASSERT_EQ(s.phase, RamPhase::Coasting);
  EXPECT_DOUBLE_EQ(s.ram_velocity, 3.0);
  const ImpactorState next = ram_step(s, spec, 0.0, 1e-3, 1.0);
  EXPECT_EQ(next.ram_velocity, s.ram_velocity);
  EXPECT_EQ(next.phase, RamPhase::Coasting);
}

TEST(RamStep, AccelerationReachesPeakWithinStroke) {
  ImpactorSpec spec;
  ImpactorState s = fire(make_charged_ram(0.0), 4.23, spec);
  EXPECT_EQ(s.phase, RamPhase::Accelerating);
  int i = 0;
  for (; s.phase == RamPhase::Accelerating; ++i) s = ram_step(s, spec, 0, 1e-4, i * 1e-4);
  EXPECT_EQ(s.ram_velocity, 4.23);
  EXPECT_EQ(s.peak_velocity_achieved, 4.23);
  // Constant acceleration v^2 / (2 d) covers the stroke in 2 d / v.
  EXPECT_NEAR(i * 1e-4, 2 * spec.accel_stroke / 4.23, 2e-4);
  EXPECT_NEAR(s.ram_position, spec.accel_stroke, 1e-3);
}

TEST(RamStep, ImpulseOfFullMomentumStopsTheRam) {
  ImpactorSpec spec;
  ImpactorState s;
  s.phase = RamPhase::Coasting;
  s.ram_velocity = s.peak_velocity_achieved = 4.23;
  s.launch_position = -1.0;
  // 27.072 N s delivered as 500 equal force samples of 0.1 ms.
  const double impulse = 6.4 * 4.23;
  EXPECT_NEAR(impulse, 27.072, 1e-12);
  const int n = 500;
  const double dt = 1e-4, force = impulse / (n * dt);
  for (int i = 0; i < n; ++i) s = ram_step(s, spec, force, dt, i * dt);
  EXPECT_NEAR(s.ram_velocity, 0.0, 1e-12);
  EXPECT_EQ(s.phase, RamPhase::InContact);
}

TEST(RamStep, ReboundsThenStopsAtRearStop) {
  ImpactorSpec spec;
  ImpactorState s = make_charged_ram(0.0);
  s.phase = RamPhase::InContact;
  s.ram_position = 0.5;
  s.ram_velocity = -1.0;
  s = ram_step(s, spec, 0.0, 1e-3, 0.0);
  EXPECT_EQ(s.phase, RamPhase::Rebounding);
  for (int i = 0; i < 2000 && s.phase != RamPhase::Stopped; ++i) s = ram_step(s, spec, 0.0, 1e-3, 0);
  EXPECT_EQ(s.phase, RamPhase::Stopped);
  EXPECT_EQ(s.ram_position, 0.0);
}

TEST(ImpactMomentum, Anchors) {
  ImpactorSpec spec;
  EXPECT_NEAR(impact_momentum(spec, 4.12125), 26.376, 26.376 * 1e-12);
  EXPECT_EQ(impact_momentum(spec, 0.0), 0.0);
  EXPECT_NEAR(impact_momentum(spec, 3.216) - impact_momentum(spec, 3.214), 0.0128, 1e-12);
  EXPECT_THROW(impact_momentum(spec, -1.0), std::invalid_argument);
}

TEST(ImpactMomentum, LinearInVelocityAndMass) {
  ImpactorSpec a, b;
  b.ram_mass = 12.8;
  EXPECT_DOUBLE_EQ(impact_momentum(a, 2.0) * 2, impact_momentum(a, 4.0));
  EXPECT_DOUBLE_EQ(impact_momentum(a, 3.0) * 2, impact_momentum(b, 3.0));
}

TEST(DetectImpact, ConstructedTrace) {
  // Ramp to 4.0 m/s by t = 1.0 s, coast, contact at t = 1.05 s for 20 ms.
  std::vector<RamSample> trace;
  for (int i = 0; i <= 150; ++i) {
    const double t = 0.9 + i * 1e-3;
    const double v = t < 1.0 - 1e-9 ? 3.0 + (t - 0.9) * 10.0 : 4.0;
    trace.push_back({t, v, i == 150 ? 900.0 : 0.0});
  }
  for (int i = 1; i < 20; ++i) trace.push_back({1.05 + i * 1e-3, 4.0 - 0.3 * i, 900.0});
  trace.push_back({1.07, -2.0, 0.0});
  const ImpactEvent ev = detect_impact(trace);
  EXPECT_NEAR(ev.impact_time, 1.05, 1e-9);
  EXPECT_EQ(ev.impact_velocity, 4.0);
  EXPECT_EQ(ev.peak_velocity, 4.0);
  EXPECT_NEAR(ev.peak_to_impact_gap, 0.05, 1e-9);
  ASSERT_TRUE(ev.separation_time.has_value());
  EXPECT_NEAR(ev.impact_duration, 0.020, 1e-9);
  ASSERT_TRUE(ev.zero_crossing_time.has_value());
  EXPECT_GT(*ev.zero_crossing_time, ev.impact_time);
}

TEST(DetectImpact, NoContactThrows) {
  std::vector<RamSample> trace{{0.0, 1.0, 0.0}, {0.001, 1.0, 0.0}};
  EXPECT_THROW(detect_impact(trace), NoContact);
  EXPECT_THROW(detect_impact(std::vector<RamSample>{}), NoContact);
}

TEST(Impactor, PostImpactVelocityDecaysWithinFiftyMilliseconds) {
  TestSetup setup;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto o = run_test(ControllerHandle::tm(), {95.0, 0.0, seed}, setup);
    const ImpactEvent ev = detect_impact(o.ram_trace);
    ASSERT_TRUE(ev.zero_crossing_time.has_value());
    EXPECT_LE(*ev.zero_crossing_time - ev.impact_time, 0.05);
  }
}

TEST(Impactor, PeakIsReachedBeforeImpact) {
  TestSetup setup;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto o = run_test(ControllerHandle::bb(), {50.0 + 5.0 * static_cast<double>(seed % 10), 0.0, seed}, setup);
    EXPECT_GE(o.record.peak_to_impact_gap, 0.0);
    EXPECT_EQ(o.record.peak_velocity, o.record.impact_velocity);
  }
}
