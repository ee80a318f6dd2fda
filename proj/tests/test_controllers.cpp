#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "legimpact/controllers.hpp"
#include "legimpact/errors.hpp"
#include "legimpact/protocol.hpp"
#include "support.hpp"

using namespace legimpact;
using fixtures::shipped_table;
using fixtures::walk;

namespace {

RobotState random_obs(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  RobotState s;
  s.com_x = 0.3 * u(rng);
  s.com_vx = 2.0 * u(rng);
  s.pitch = 0.6 * u(rng);
  s.pitch_rate = 4.0 * u(rng);
  s.stance_foot_x = 0.2 * u(rng);
  s.holding = u(rng) > 0;
  return s;
}

// Closed-loop run with a constant commanded velocity for the BB policy.
std::vector<RobotState> bb_walk(double vcmd, RobotState s, double seconds) {
  RobotSpec spec = ControllerHandle::bb().adapt(RobotSpec{});
  std::mt19937_64 rng(1);
  std::vector<RobotState> out;
  for (long i = 0; i < std::lround(seconds / 1e-3); ++i) {
    s = robot_step(s, bb_policy(s, vcmd, spec), {}, spec, 1e-3, rng);
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST(ControllerKind, NamesRoundTrip) {
  for (auto k : {ControllerKind::TMAnalog, ControllerKind::TLAnalog, ControllerKind::BBAnalog,
                 ControllerKind::Passive}) {
    EXPECT_EQ(parse_controller_kind(to_string(k)), k);
  }
  EXPECT_EQ(parse_controller_kind("TMAnalog"), ControllerKind::TMAnalog);
  EXPECT_THROW(parse_controller_kind("AR"), ConfigError);
}

TEST(ControllerKind, GaitDefaultsAreDistinct) {
  EXPECT_EQ(default_gait(ControllerKind::TMAnalog).step_period, 0.40);
  EXPECT_EQ(default_gait(ControllerKind::TMAnalog).swing_apex, 0.08);
  EXPECT_EQ(default_gait(ControllerKind::TLAnalog).step_period, 0.35);
  EXPECT_EQ(default_gait(ControllerKind::TLAnalog).swing_apex, 0.06);
  EXPECT_EQ(default_gait(ControllerKind::BBAnalog).step_period, 0.45);
  EXPECT_EQ(default_gait(ControllerKind::BBAnalog).swing_apex, 0.05);
}

TEST(CaptureFootstep, HandEvaluation) {
  EXPECT_NEAR(capture_footstep(0.5, 3.3, 0.1), 0.5 / 3.3 + 0.1 * 0.5, 1e-15);
  EXPECT_NEAR(capture_footstep(0.5, 3.3, 0.1), 0.2015, 5e-5);
  EXPECT_EQ(capture_footstep(0.0, 3.3, 0.1), 0.0);
}

TEST(SolveBalance, ExactWhenUnclamped) {
  RobotSpec spec;
  RobotState obs;
  const BalanceGains g;
  // Hand solution of the two-task system: a = -(ta + tf) / (m z0), alpha = tf / I.
  const double a = -0.1, alpha = 0.5;
  const auto t = solve_balance(obs, spec, a, alpha, g);
  const double tf = spec.flywheel_inertia * alpha;
  const double ta = -a * spec.total_mass * spec.com_height_nominal - tf;
  // The Tikhonov term biases the exact solution by about 1e-5 relative.
  EXPECT_NEAR(t.flywheel, tf, 1e-4 * std::abs(tf));
  EXPECT_NEAR(t.ankle, ta, 1e-4 * std::abs(ta));
}

TEST(SolveBalance, ClampsToActuatorLimits) {
  RobotSpec spec;
  const auto t = solve_balance(RobotState{}, spec, -50.0, 100.0, BalanceGains{});
  EXPECT_LE(std::abs(t.ankle), spec.ankle_torque_limit);
  EXPECT_LE(std::abs(t.flywheel), spec.flywheel_torque_limit);
}

TEST(TmPolicy, RestingObservationGivesZeroCommand) {
  RobotSpec spec;
  const ControlCommand u = tm_policy(RobotState{}, spec);
  EXPECT_NEAR(u.next_footstep_x, 0.0, 1e-12);
  EXPECT_NEAR(u.ankle_torque, 0.0, 1e-12);
  EXPECT_NEAR(u.flywheel_torque, 0.0, 1e-12);
}

TEST(TmPolicy, FootstepFollowsCapturePointLaw) {
  RobotSpec spec;
  RobotState obs;
  obs.com_vx = 0.5;
  const ControlCommand u = tm_policy(obs, spec);
  EXPECT_NEAR(u.next_footstep_x, 0.5 / spec.omega0() + 0.1 * 0.5, 1e-12);
}

TEST(TmPolicy, RecoversBelowCapturabilityBoundary) {
  // 50 PSI delivers under half of m w0 L in impulse.
  TestSetup setup;
  int recovered = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto o = run_test(ControllerHandle::tm(), {50.0, 0.0, seed}, setup);
    ASSERT_LT(o.impulse_to_robot, 45.0 * std::sqrt(9.81 / 0.9) * 0.5);
    recovered += !o.record.fallover;
  }
  EXPECT_GE(recovered, 95);
}

TEST(TlPolicy, ZeroTableMatchesTm) {
  RobotSpec spec;
  const PolicyTable zeros = PolicyTable::zeros();
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const RobotState obs = random_obs(rng);
    EXPECT_EQ(tl_policy(obs, spec, zeros), tm_policy(obs, spec));
  }
}

TEST(TlPolicy, NearestBinOutsideTable) {
  const PolicyTable& t = shipped_table();
  EXPECT_EQ(&t.lookup(5.0, 0.0), &t.rows().back());
  EXPECT_EQ(&t.lookup(-5.0, 3.0), &t.rows().front());
  EXPECT_NO_THROW(tl_policy(RobotState{.com_vx = 9.0, .pitch = 2.0}, RobotSpec{}, t));
}

TEST(TlPolicy, MissingOrEmptyTable) {
  EXPECT_THROW(PolicyTable::load("/nonexistent/table.csv"), MissingPolicyTable);
  EXPECT_THROW(ControllerHandle::make(ControllerKind::TLAnalog, nullptr), MissingPolicyTable);
  const auto path = std::filesystem::temp_directory_path() / "legimpact_empty_table.csv";
  std::ofstream(path) << "vx_bin_low,vx_bin_high,pitch_bin_low,pitch_bin_high,step_offset_m,pitch_setpoint_rad\n";
  EXPECT_THROW(PolicyTable::load(path), MissingPolicyTable);
  std::ofstream(path) << "0,1,2\n";
  try {
    PolicyTable::load(path);
    FAIL() << "expected SchemaMismatch";
  } catch (const SchemaMismatch& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  std::filesystem::remove(path);
}

TEST(TlPolicy, ShorterStepsFallAtLowerImpulseThanTm) {
  // Matched seeds: the lowest momentum at which each controller first falls.
  int tl_lower = 0, tm_lower = 0;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    CampaignConfig cfg;
    cfg.seed_base = s;
    const auto tm = run_campaign(ControllerKind::TMAnalog, cfg, TestSetup{});
    const auto tl = run_campaign(ControllerKind::TLAnalog, cfg, TestSetup{}, &shipped_table());
    auto first_fall = [](const CampaignRecord& c) {
      for (const auto& r : c.tests) {
        if (r.valid && r.fallover) return r.impact_momentum;
      }
      return std::numeric_limits<double>::infinity();
    };
    const double a = first_fall(tl.record), b = first_fall(tm.record);
    tl_lower += a < b;
    tm_lower += b < a;
  }
  EXPECT_GT(tl_lower, tm_lower);
}

TEST(BbPolicy, StandsStillAtZeroCommand) {
  RobotState s;
  s.holding = true;
  s.com_vx = 0.05;
  const auto u = bb_policy(s, 0.0, RobotSpec{});
  EXPECT_TRUE(u.hold_stance);
  EXPECT_NE(u.ankle_torque, 0.0);
  EXPECT_NEAR(u.flywheel_torque, 0.0, 1e-4);

  const auto traj = bb_walk(0.0, s, 30.0);
  EXPECT_EQ(traj.back().steps, 0);
}

TEST(BbPolicy, TracksSmallCommandedVelocity) {
  const auto traj = bb_walk(0.1, RobotState{}, 20.0);
  const double mean_v = (traj.back().com_x - traj[traj.size() / 2].com_x) / 10.0;
  EXPECT_NEAR(mean_v, 0.1, 0.03);
  EXPECT_GT(traj.back().steps, 20);
}

TEST(BbPolicy, LargeImpulseWhileStandingFalls) {
  TestSetup setup;
  int falls = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    falls += run_test(ControllerHandle::bb(), {95.0, 0.0, seed}, setup).record.fallover;
  }
  EXPECT_EQ(falls, 10);
}

TEST(BbPolicy, RejectsCommandAboveOneMeterPerSecond) {
  EXPECT_THROW(bb_policy(RobotState{}, 1.5, RobotSpec{}), std::invalid_argument);
}

TEST(OperatorNudge, ProportionalWithDeadBandAndCap) {
  RobotState s;
  EXPECT_EQ(operator_nudge(s, 0.0), 0.0);
  EXPECT_EQ(operator_nudge(s, 0.01), 0.0);
  s.com_x = -0.05;
  EXPECT_DOUBLE_EQ(operator_nudge(s, 0.0), 0.1);
  s.com_x = 0.02;
  EXPECT_DOUBLE_EQ(operator_nudge(s, 0.0), -0.04);
}

TEST(OperatorNudge, NeverExceedsTenCentimetersPerSecond) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 10000; ++i) {
    RobotState s = random_obs(rng);
    s.com_x *= 10;
    EXPECT_LE(std::abs(operator_nudge(s, 0.0)), 0.1);
  }
  ControllerHandle bb = ControllerHandle::bb();
  const RobotSpec spec = bb.adapt(RobotSpec{});
  WorldState w = make_world(RobotState{.com_x = 0.04}, make_charged_ram(-5.0), 1);
  for (int i = 0; i < 5000; ++i) {
    w = advance(w, SimConfig{}, bb, spec, ImpactorSpec{});
    ASSERT_LE(std::abs(bb.last_commanded_velocity()), 0.1);
  }
}

TEST(Controllers, CommandsAreFeasibleUnderFuzz) {
  RobotSpec spec;
  std::mt19937_64 rng(9);
  const PolicyTable& table = shipped_table();
  for (int i = 0; i < 5000; ++i) {
    const RobotState obs = random_obs(rng);
    for (const ControlCommand& u :
         {tm_policy(obs, spec), tl_policy(obs, spec, table), bb_policy(obs, 0.1, spec)}) {
      EXPECT_LE(std::abs(u.ankle_torque), spec.ankle_torque_limit);
      EXPECT_LE(std::abs(u.flywheel_torque), spec.flywheel_torque_limit);
      EXPECT_LE(std::abs(u.next_footstep_x), spec.max_step_length);
    }
  }
}

TEST(Controllers, PoliciesArePureFunctionsOfObservation) {
  RobotSpec spec;
  std::mt19937_64 rng(10);
  for (int i = 0; i < 200; ++i) {
    const RobotState obs = random_obs(rng);
    EXPECT_EQ(tm_policy(obs, spec), tm_policy(obs, spec));
    EXPECT_EQ(bb_policy(obs, 0.05, spec), bb_policy(obs, 0.05, spec));
  }
}

TEST(Controllers, PassiveHoldsWithoutTorque) {
  ControllerHandle p = ControllerHandle::passive();
  const auto u = p.compute(RobotState{.com_vx = 1.0}, RobotSpec{});
  EXPECT_TRUE(u.hold_stance);
  EXPECT_EQ(u.ankle_torque, 0.0);
  EXPECT_EQ(u.flywheel_torque, 0.0);
}
