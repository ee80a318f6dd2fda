#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "legimpact/biped.hpp"
#include "legimpact/controllers.hpp"
#include "legimpact/impactor.hpp"
#include "legimpact/sim_core.hpp"

namespace legimpact {

// Everything that stays fixed across the tests of a campaign.
struct TestSetup {
  RobotSpec robot;
  ImpactorSpec impactor;
  SimConfig sim;
  CalibrationMap calibration;
  FalloverThresholds fallover;
  double settle_time = 2.0;
  double coast_distance = 0.1;  // ram travel between peak and the nominal torso face
  double home_x = 0.0;
  bool log_trajectory = false;
};

struct TestRecord {
  std::string test_id;
  ControllerKind controller_kind = ControllerKind::TMAnalog;
  double pressure = 0.0;
  double peak_velocity = 0.0;
  double impact_velocity = 0.0;
  double impact_momentum = 0.0;
  double peak_to_impact_gap = 0.0;
  double impact_duration = 0.0;
  GaitPhase phase_at_impact;
  bool fallover = false;
  std::uint64_t seed = 0;
  std::optional<std::string> trajectory_ref;
  // Invalid tests (no contact) are kept in the log but carry no impact data.
  bool valid = true;
  FalloverThresholds fallover_thresholds;

  friend bool operator==(const TestRecord&, const TestRecord&) = default;
};

struct RamKinematics {
  double position;
  double velocity;
};

struct TestOutcome {
  TestRecord record;
  std::vector<RamSample> ram_trace;          // from firing to the end of the window
  std::vector<RamKinematics> ram_precontact;  // one entry per tick before first contact
  std::vector<TickLogRow> trajectory;         // only when TestSetup::log_trajectory
  double impulse_to_robot = 0.0;              // first contact episode
  double ram_momentum_change = 0.0;           // same episode
};

// Simulates one impact test. `forced_phase` overrides the seeded gait phase
// fraction. Throws NoContact when the ram never reaches the robot.
TestOutcome run_test(ControllerHandle controller, const OperatorAction& action,
                     const TestSetup& setup, std::optional<double> forced_phase = std::nullopt);

std::uint64_t hash_precontact(std::span<const RamKinematics> samples);

struct CampaignConfig {
  double start_pressure = 50.0;
  double end_pressure = 95.0;
  double pressure_step = 5.0;
  int consecutive_fail_stop = 2;
  double observation_window = 4.0;
  int repeats_per_pressure = 1;
  std::uint64_t seed_base = 1;
  double placement_jitter = 0.02;

  void validate() const;
  friend bool operator==(const CampaignConfig&, const CampaignConfig&) = default;
};

enum class StopReason { ScheduleExhausted, ConsecutiveFails };
std::string_view to_string(StopReason r);
StopReason parse_stop_reason(std::string_view s);

struct CampaignRecord {
  ControllerKind controller_kind = ControllerKind::TMAnalog;
  CampaignConfig config;
  std::vector<TestRecord> tests;
  StopReason stop_reason = StopReason::ScheduleExhausted;
  CalibrationMap calibration;
};

std::vector<double> escalation_schedule(const CampaignConfig& config);

std::uint64_t derive_test_seed(std::uint64_t seed_base, std::size_t test_index);

// Operator action for test `index` at `pressure`: seed and placement are
// pure functions of (seed_base, index).
OperatorAction derive_action(const CampaignConfig& config, std::size_t index, double pressure);

std::string make_test_id(ControllerKind kind, double pressure, int repeat);

using TestExecutor =
    std::function<TestOutcome(std::size_t index, int repeat, const OperatorAction& action)>;

struct CampaignResult {
  CampaignRecord record;
  std::vector<TestOutcome> outcomes;
};

// Escalation loop with the consecutive-fall stop rule, over any executor.
CampaignResult run_campaign(ControllerKind kind, const CampaignConfig& config,
                            const CalibrationMap& calibration, const TestExecutor& execute);

CampaignResult run_campaign(ControllerKind kind, const CampaignConfig& config, TestSetup setup,
                            const PolicyTable* table = nullptr);

}  // namespace legimpact
