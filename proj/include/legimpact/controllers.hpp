#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "legimpact/biped.hpp"

namespace legimpact {

enum class ControllerKind { TMAnalog, TLAnalog, BBAnalog, Passive };

std::string_view to_string(ControllerKind kind);   // "TM", "TL", "BB", "Passive"
ControllerKind parse_controller_kind(std::string_view name);

struct GaitParams {
  double step_period;
  double swing_apex;
};

GaitParams default_gait(ControllerKind kind);

// Gains for the two-task balance solve (CoM regulation, pitch regulation).
struct BalanceGains {
  double kp_com = 4.0;
  double kd_com = 4.0;
  double kp_pitch = 60.0;
  double kd_pitch = 16.0;
  double w_com = 1.0;
  double w_pitch = 1.0;
  double regularization = 1e-8;
};

struct BalanceTorques {
  double ankle;
  double flywheel;
};

// Closed-form weighted least squares over (ankle torque, flywheel torque)
// for a desired CoM acceleration and pitch acceleration, then clamped to
// the actuator limits.
BalanceTorques solve_balance(const RobotState& obs, const RobotSpec& spec,
                             double com_accel_des, double pitch_accel_des,
                             const BalanceGains& gains);

// Capture point plus Raibert velocity correction, relative to the CoM.
double capture_footstep(double com_vx, double omega0, double velocity_gain,
                        double desired_velocity = 0.0);

struct TmConfig {
  BalanceGains gains;
  double velocity_gain = 0.1;
  double home_x = 0.0;
};

ControlCommand tm_policy(const RobotState& obs, const RobotSpec& spec, const TmConfig& cfg = {});

struct PolicyTableRow {
  double vx_low, vx_high, pitch_low, pitch_high;
  double step_offset;
  double pitch_setpoint;
};

// Gain-scheduled high-level table standing in for a learned planner.
class PolicyTable {
 public:
  PolicyTable() = default;
  explicit PolicyTable(std::vector<PolicyTableRow> rows);

  static PolicyTable load(const std::filesystem::path& path);
  static PolicyTable zeros();

  // Row containing (vx, pitch); outside the table the nearest bin is used.
  const PolicyTableRow& lookup(double vx, double pitch) const;
  const std::vector<PolicyTableRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }

 private:
  std::vector<PolicyTableRow> rows_;
};

ControlCommand tl_policy(const RobotState& obs, const RobotSpec& spec, const PolicyTable& table,
                         const TmConfig& cfg = {});

struct BbConfig {
  BalanceGains gains{.kp_com = 0.0, .kd_com = 6.0, .kp_pitch = 60.0, .kd_pitch = 16.0,
                     .w_com = 1.0, .w_pitch = 1.0, .regularization = 1e-8};
  double raibert_gain = 0.2;
  double step_trigger_speed = 0.25;  // stepping resumes only past this speed error
  double settle_speed = 0.05;
};

// Velocity-tracking stepping. At zero command and small speed error the
// robot parks in dual support and balances on the ankles alone.
ControlCommand bb_policy(const RobotState& obs, double commanded_velocity,
                         const RobotSpec& spec, const BbConfig& cfg = {});

struct NudgeConfig {
  double gain = 2.0;        // 1/s
  double dead_band = 0.01;  // m
  double max_speed = 0.1;   // m/s
};

double operator_nudge(const RobotState& obs, double target_point, const NudgeConfig& cfg = {});

// One locomotion subject for one test. Owns the per-kind configuration and
// the small amount of state the policies carry between ticks.
class ControllerHandle {
 public:
  static ControllerHandle tm(TmConfig cfg = {});
  static ControllerHandle tl(PolicyTable table, TmConfig cfg = {});
  static ControllerHandle bb(double target_point = 0.0, BbConfig cfg = {}, NudgeConfig nudge = {});
  // No control at all; parks in dual support with zero torques.
  static ControllerHandle passive();
  static ControllerHandle make(ControllerKind kind, const PolicyTable* table = nullptr);

  ControllerKind kind() const { return kind_; }
  GaitParams gait() const { return gait_; }
  void set_gait(GaitParams g) { gait_ = g; }
  void set_home(double x);

  // Applies this controller's gait parameters to a robot spec.
  RobotSpec adapt(RobotSpec spec) const;

  ControlCommand compute(const RobotState& obs, const RobotSpec& spec);

  double last_commanded_velocity() const { return commanded_velocity_; }

 private:
  explicit ControllerHandle(ControllerKind kind) : kind_(kind), gait_(default_gait(kind)) {}

  ControllerKind kind_;
  GaitParams gait_;
  TmConfig tm_cfg_;
  std::shared_ptr<const PolicyTable> table_;
  BbConfig bb_cfg_;
  NudgeConfig nudge_cfg_;
  double target_point_ = 0.0;
  double commanded_velocity_ = 0.0;
};

}  // namespace legimpact
