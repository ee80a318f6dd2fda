#include <gtest/gtest.h>

#include <random>
#include <string>

#include "legimpact/analysis.hpp"
#include "legimpact/errors.hpp"
#include "legimpact/io.hpp"
#include "legimpact/protocol.hpp"
#include "support.hpp"

using namespace legimpact;
using fixtures::shipped_table;

namespace {

TestExecutor scripted(std::function<bool(std::size_t)> falls) {
  return [falls](std::size_t index, int, const OperatorAction& a) {
    TestOutcome o;
    o.record.pressure = a.pressure;
    o.record.seed = a.seed;
    o.record.fallover = falls(index);
    return o;
  };
}

}  // namespace

TEST(EscalationSchedule, ArithmeticWithCap) {
  CampaignConfig c;
  EXPECT_EQ(escalation_schedule(c), (std::vector<double>{50, 55, 60, 65, 70, 75, 80, 85, 90, 95}));
  c.pressure_step = 10;
  EXPECT_EQ(escalation_schedule(c), (std::vector<double>{50, 60, 70, 80, 90, 95}));
  c.start_pressure = 95;
  EXPECT_EQ(escalation_schedule(c), (std::vector<double>{95}));
}

TEST(CampaignConfig, Validation) {
  CampaignConfig c;
  c.start_pressure = 96;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.pressure_step = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.consecutive_fail_stop = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.observation_window = 3;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(TestIds, FollowTheLabelConvention) {
  EXPECT_EQ(make_test_id(ControllerKind::TMAnalog, 80, 0), "TM80_01");
  EXPECT_EQ(make_test_id(ControllerKind::BBAnalog, 95, 1), "BB95_02");
}

TEST(SeedDerivation, PureFunctionOfBaseAndIndex) {
  EXPECT_EQ(derive_test_seed(1, 3), derive_test_seed(1, 3));
  EXPECT_NE(derive_test_seed(1, 3), derive_test_seed(1, 4));
  EXPECT_NE(derive_test_seed(1, 3), derive_test_seed(2, 3));
  CampaignConfig c;
  const auto a = derive_action(c, 5, 70), b = derive_action(c, 5, 70);
  EXPECT_EQ(a.seed, b.seed);
  EXPECT_EQ(a.placement_offset, b.placement_offset);
  EXPECT_LE(std::abs(a.placement_offset), c.placement_jitter);
}

TEST(RunTest, TmAtFiftyPsiRecovers) {
  const auto o = run_test(ControllerHandle::tm(), {50.0, 0.0, 1}, TestSetup{});
  EXPECT_NEAR(o.record.impact_velocity, 2.70, 1e-12);
  EXPECT_NEAR(o.record.impact_momentum, 17.28, 1e-12);
  EXPECT_FALSE(o.record.fallover);
}

TEST(RunTest, SameInputsGiveIdenticalRecords) {
  const OperatorAction a{85.0, 0.013, 77};
  const auto x = run_test(ControllerHandle::tm(), a, TestSetup{});
  const auto y = run_test(ControllerHandle::tm(), a, TestSetup{});
  EXPECT_TRUE(x.record == y.record);
  EXPECT_EQ(record_to_json(x.record), record_to_json(y.record));
}

TEST(RunTest, RamTooSlowToArriveIsNoContact) {
  TestSetup setup;
  setup.calibration.slope = 1e-4;
  setup.calibration.intercept = 0.0;
  EXPECT_THROW(run_test(ControllerHandle::tm(), {50.0, 0.0, 1}, setup), NoContact);
}

TEST(RunTest, OutOfRangePressure) {
  EXPECT_THROW(run_test(ControllerHandle::tm(), {120.0, 0.0, 1}, TestSetup{}), PressureOutOfRange);
}

TEST(RunTest, RecordInvariants) {
  TestSetup setup;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto o = run_test(ControllerHandle::bb(), {50.0 + 2.5 * static_cast<double>(seed - 1), 0.0, seed}, setup);
    const auto& r = o.record;
    EXPECT_EQ(r.impact_momentum, 6.4 * r.impact_velocity);
    EXPECT_GE(r.peak_to_impact_gap, 0.0);
    EXPECT_TRUE(r.phase_at_impact.legal());
    EXPECT_EQ(r.fallover_thresholds, setup.fallover);
    EXPECT_NEAR(o.ram_momentum_change, -o.impulse_to_robot, 1e-9 * o.impulse_to_robot);
  }
}

TEST(RunTest, TrajectoryLogCoversTheTest) {
  TestSetup setup;
  setup.log_trajectory = true;
  const auto o = run_test(ControllerHandle::tm(), {60.0, 0.0, 3}, setup);
  ASSERT_FALSE(o.trajectory.empty());
  EXPECT_EQ(o.trajectory.front().tick, 0);
  EXPECT_GT(o.trajectory.back().time_s, setup.settle_time + setup.fallover.window);
}

TEST(RunCampaign, NeverFallRunsTheFullSchedule) {
  const auto r = run_campaign(ControllerKind::TMAnalog, CampaignConfig{}, CalibrationMap{},
                              scripted([](std::size_t) { return false; }));
  EXPECT_EQ(r.record.tests.size(), 10u);
  EXPECT_EQ(r.record.stop_reason, StopReason::ScheduleExhausted);
}

TEST(RunCampaign, AlwaysFallStopsAfterTheLimit) {
  CampaignConfig c;
  for (int limit : {1, 2, 3}) {
    c.consecutive_fail_stop = limit;
    const auto r = run_campaign(ControllerKind::TMAnalog, c, CalibrationMap{},
                                scripted([](std::size_t) { return true; }));
    EXPECT_EQ(r.record.tests.size(), static_cast<std::size_t>(limit));
    EXPECT_EQ(r.record.stop_reason, StopReason::ConsecutiveFails);
  }
  const auto passive = run_campaign(ControllerKind::Passive, CampaignConfig{}, TestSetup{});
  EXPECT_EQ(passive.record.tests.size(), 2u);
}

TEST(RunCampaign, StopRuleSoundUnderRandomOutcomes) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    CampaignConfig c;
    c.consecutive_fail_stop = 1 + static_cast<int>(rng() % 3);
    c.repeats_per_pressure = 1 + static_cast<int>(rng() % 2);
    std::vector<bool> plan(40);
    for (std::size_t i = 0; i < plan.size(); ++i) plan[i] = rng() % 3 == 0;
    const auto r = run_campaign(ControllerKind::TMAnalog, c, CalibrationMap{},
                                scripted([&](std::size_t i) { return bool(plan[i]); }));
    const auto& t = r.record.tests;
    int trailing = 0;
    for (auto it = t.rbegin(); it != t.rend() && it->fallover; ++it) ++trailing;
    EXPECT_LE(trailing, c.consecutive_fail_stop);
    // No earlier prefix already met the stop condition.
    int run = 0;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
      run = t[i].fallover ? run + 1 : 0;
      ASSERT_LT(run, c.consecutive_fail_stop);
    }
    if (r.record.stop_reason == StopReason::ConsecutiveFails) EXPECT_EQ(trailing, c.consecutive_fail_stop);
    else EXPECT_EQ(t.size(), 10u * static_cast<std::size_t>(c.repeats_per_pressure));
  }
}

TEST(RunCampaign, InvalidTestsDoNotCountOrReset) {
  // fall, invalid, fall -> two consecutive falls with an invalid test between.
  auto exec = [](std::size_t index, int, const OperatorAction& a) {
    if (index == 1) throw NoContact("drifted away");
    TestOutcome o;
    o.record.pressure = a.pressure;
    o.record.fallover = true;
    return o;
  };
  const auto r = run_campaign(ControllerKind::TMAnalog, CampaignConfig{}, CalibrationMap{}, exec);
  ASSERT_EQ(r.record.tests.size(), 3u);
  EXPECT_FALSE(r.record.tests[1].valid);
  EXPECT_EQ(r.record.tests[1].pressure, 55.0);
  EXPECT_EQ(r.record.stop_reason, StopReason::ConsecutiveFails);
}

TEST(RunCampaign, RepeatsGetFreshSeedsAndIds) {
  CampaignConfig c;
  c.repeats_per_pressure = 2;
  c.end_pressure = 55;
  const auto r = run_campaign(ControllerKind::TMAnalog, c, CalibrationMap{},
                              scripted([](std::size_t) { return false; }));
  ASSERT_EQ(r.record.tests.size(), 4u);
  EXPECT_EQ(r.record.tests[1].test_id, "TM50_02");
  EXPECT_NE(r.record.tests[0].seed, r.record.tests[1].seed);
}

TEST(RunCampaign, ReRunReproducesEveryRecord) {
  CampaignConfig c;
  c.seed_base = 3;
  const auto a = run_campaign(ControllerKind::TLAnalog, c, TestSetup{}, &shipped_table());
  const auto b = run_campaign(ControllerKind::TLAnalog, c, TestSetup{}, &shipped_table());
  EXPECT_EQ(a.record.tests, b.record.tests);
}

TEST(RunCampaign, FairnessHashesMatchAcrossControllers) {
  CampaignConfig c;
  c.seed_base = 2;
  const auto tm = run_campaign(ControllerKind::TMAnalog, c, TestSetup{});
  const auto bb = run_campaign(ControllerKind::BBAnalog, c, TestSetup{});
  const std::size_t n = std::min(tm.outcomes.size(), bb.outcomes.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& x = tm.outcomes[i].ram_precontact;
    const auto& y = bb.outcomes[i].ram_precontact;
    const std::size_t len = std::min(x.size(), y.size());
    EXPECT_EQ(hash_precontact(std::span(x).first(len)), hash_precontact(std::span(y).first(len)));
  }
}

TEST(RunCampaign, BbExecutesFewerTestsThanTm) {
  std::size_t tm_tests = 0, bb_tests = 0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    CampaignConfig c;
    c.seed_base = s;
    tm_tests += run_campaign(ControllerKind::TMAnalog, c, TestSetup{}).record.tests.size();
    bb_tests += run_campaign(ControllerKind::BBAnalog, c, TestSetup{}).record.tests.size();
  }
  EXPECT_LT(bb_tests, tm_tests);
}

TEST(RunCampaign, GapOrderingReported) {
  std::vector<TestRecord> records;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    CampaignConfig c;
    c.seed_base = s;
    for (auto k : {ControllerKind::TMAnalog, ControllerKind::BBAnalog}) {
      const auto r = run_campaign(k, c, TestSetup{});
      records.insert(records.end(), r.record.tests.begin(), r.record.tests.end());
    }
  }
  const auto g = gap_statistics(records);
  const double bb = g.per_controller.at(ControllerKind::BBAnalog).mean;
  const double tm = g.per_controller.at(ControllerKind::TMAnalog).mean;
  RecordProperty("bb_mean_gap", std::to_string(bb));
  RecordProperty("tm_mean_gap", std::to_string(tm));
  // The gap here depends only on torso drift before contact, which neither
  // stepping policy biases toward the ram. Report instead of asserting.
  if (!(bb < tm)) GTEST_SKIP() << "ordering not reproduced: bb " << bb << " s, tm " << tm << " s";
  SUCCEED();
}
