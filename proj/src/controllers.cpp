#include "legimpact/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "legimpact/errors.hpp"

namespace legimpact {

std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::TMAnalog: return "TM";
    case ControllerKind::TLAnalog: return "TL";
    case ControllerKind::BBAnalog: return "BB";
    case ControllerKind::Passive: return "Passive";
  }
  return "?";
}

ControllerKind parse_controller_kind(std::string_view name) {
  if (name == "TM" || name == "TMAnalog") return ControllerKind::TMAnalog;
  if (name == "TL" || name == "TLAnalog") return ControllerKind::TLAnalog;
  if (name == "BB" || name == "BBAnalog") return ControllerKind::BBAnalog;
  if (name == "Passive") return ControllerKind::Passive;
  throw ConfigError("unknown controller kind '" + std::string(name) + "'");
}

GaitParams default_gait(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::TMAnalog: return {0.40, 0.08};
    case ControllerKind::TLAnalog: return {0.35, 0.06};
    case ControllerKind::BBAnalog: return {0.45, 0.05};
    case ControllerKind::Passive: return {0.40, 0.08};
  }
  return {0.40, 0.08};
}

BalanceTorques solve_balance(const RobotState& obs, const RobotSpec& spec, double com_accel_des,
                             double pitch_accel_des, const BalanceGains& gains) {
  const double m = spec.total_mass;
  const double z0 = spec.com_height_nominal;
  const double w2 = spec.gravity / z0;

  // Task rows map u = [ankle, flywheel] to CoM and pitch accelerations.
  Eigen::Matrix2d task;
  task << -1.0 / (m * z0), -1.0 / (m * z0),
          0.0, 1.0 / spec.flywheel_inertia;
  const Eigen::Vector2d drift(w2 * (obs.com_x - support_point(obs)), 0.0);
  const Eigen::Vector2d target(com_accel_des, pitch_accel_des);
  const Eigen::Vector2d weight(gains.w_com, gains.w_pitch);

  const Eigen::Matrix2d normal =
      task.transpose() * weight.asDiagonal() * task +
      gains.regularization * Eigen::Matrix2d::Identity();
  const Eigen::Vector2d rhs = task.transpose() * weight.asDiagonal() * (target - drift);
  const Eigen::Vector2d u = normal.ldlt().solve(rhs);

  return {std::clamp(u(0), -spec.ankle_torque_limit, spec.ankle_torque_limit),
          std::clamp(u(1), -spec.flywheel_torque_limit, spec.flywheel_torque_limit)};
}

double capture_footstep(double com_vx, double omega0, double velocity_gain,
                        double desired_velocity) {
  return com_vx / omega0 + velocity_gain * (com_vx - desired_velocity);
}

namespace {

ControlCommand tsid_command(const RobotState& obs, const RobotSpec& spec, const TmConfig& cfg,
                            double step_offset, double pitch_setpoint) {
  const auto& g = cfg.gains;
  const double a_des = -g.kp_com * (obs.com_x - cfg.home_x) - g.kd_com * obs.com_vx;
  const double alpha_des =
      -g.kp_pitch * (obs.pitch - pitch_setpoint) - g.kd_pitch * obs.pitch_rate;
  const auto tau = solve_balance(obs, spec, a_des, alpha_des, g);

  ControlCommand u;
  u.ankle_torque = tau.ankle;
  u.flywheel_torque = tau.flywheel;
  u.next_footstep_x = std::clamp(
      capture_footstep(obs.com_vx, spec.omega0(), cfg.velocity_gain) + step_offset,
      -spec.max_step_length, spec.max_step_length);
  return u;
}

}  // namespace

ControlCommand tm_policy(const RobotState& obs, const RobotSpec& spec, const TmConfig& cfg) {
  return tsid_command(obs, spec, cfg, 0.0, 0.0);
}

PolicyTable::PolicyTable(std::vector<PolicyTableRow> rows) : rows_(std::move(rows)) {
  for (const auto& r : rows_) {
    if (!(r.vx_low <= r.vx_high && r.pitch_low <= r.pitch_high)) {
      throw ConfigError("policy table: bin bounds out of order");
    }
  }
}

PolicyTable PolicyTable::zeros() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return PolicyTable({{-inf, inf, -inf, inf, 0.0, 0.0}});
}

PolicyTable PolicyTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingPolicyTable("policy table not found: " + path.string());
  std::vector<PolicyTableRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("vx_bin_low", 0) == 0) continue;  // header
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    PolicyTableRow r{};
    if (!(fields >> r.vx_low >> r.vx_high >> r.pitch_low >> r.pitch_high >> r.step_offset >>
          r.pitch_setpoint)) {
      throw SchemaMismatch("policy_table", line_no, "expected six numeric columns");
    }
    rows.push_back(r);
  }
  if (rows.empty()) throw MissingPolicyTable("policy table has no rows: " + path.string());
  return PolicyTable(std::move(rows));
}

const PolicyTableRow& PolicyTable::lookup(double vx, double pitch) const {
  if (rows_.empty()) throw MissingPolicyTable("policy table is empty");
  const PolicyTableRow* best = &rows_.front();
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& r : rows_) {
    const double dv = std::max({r.vx_low - vx, 0.0, vx - r.vx_high});
    const double dp = std::max({r.pitch_low - pitch, 0.0, pitch - r.pitch_high});
    const double dist = dv * dv + dp * dp;
    if (dist < best_dist) {
      best_dist = dist;
      best = &r;
      if (dist == 0.0) break;
    }
  }
  return *best;
}

ControlCommand tl_policy(const RobotState& obs, const RobotSpec& spec, const PolicyTable& table,
                         const TmConfig& cfg) {
  const auto& row = table.lookup(obs.com_vx, obs.pitch);
  return tsid_command(obs, spec, cfg, row.step_offset, row.pitch_setpoint);
}

ControlCommand bb_policy(const RobotState& obs, double commanded_velocity, const RobotSpec& spec,
                         const BbConfig& cfg) {
  if (!(std::abs(commanded_velocity) <= 1.0)) {
    throw std::invalid_argument("commanded velocity must lie within +/-1 m/s");
  }
  const auto& g = cfg.gains;
  const double speed_error = obs.com_vx - commanded_velocity;
  const double a_des = -g.kd_com * speed_error;
  const double alpha_des = -g.kp_pitch * obs.pitch - g.kd_pitch * obs.pitch_rate;
  const auto tau = solve_balance(obs, spec, a_des, alpha_des, g);

  ControlCommand u;
  u.ankle_torque = tau.ankle;
  u.flywheel_torque = tau.flywheel;
  u.desired_velocity = commanded_velocity;
  u.next_footstep_x =
      std::clamp(obs.com_vx * spec.step_period / 2.0 + cfg.raibert_gain * speed_error,
                 -spec.max_step_length, spec.max_step_length);

  if (commanded_velocity == 0.0) {
    const double threshold = obs.holding ? cfg.step_trigger_speed : cfg.settle_speed;
    u.hold_stance = std::abs(speed_error) < threshold;
  }
  return u;
}

double operator_nudge(const RobotState& obs, double target_point, const NudgeConfig& cfg) {
  const double error = target_point - obs.com_x;
  if (std::abs(error) <= cfg.dead_band) return 0.0;
  return std::clamp(cfg.gain * error, -cfg.max_speed, cfg.max_speed);
}

ControllerHandle ControllerHandle::tm(TmConfig cfg) {
  ControllerHandle h(ControllerKind::TMAnalog);
  h.tm_cfg_ = cfg;
  return h;
}

ControllerHandle ControllerHandle::tl(PolicyTable table, TmConfig cfg) {
  if (table.empty()) throw MissingPolicyTable("TL controller requires a policy table");
  ControllerHandle h(ControllerKind::TLAnalog);
  h.tm_cfg_ = cfg;
  h.table_ = std::make_shared<const PolicyTable>(std::move(table));
  return h;
}

ControllerHandle ControllerHandle::bb(double target_point, BbConfig cfg, NudgeConfig nudge) {
  ControllerHandle h(ControllerKind::BBAnalog);
  h.target_point_ = target_point;
  h.bb_cfg_ = cfg;
  h.nudge_cfg_ = nudge;
  return h;
}

ControllerHandle ControllerHandle::passive() { return ControllerHandle(ControllerKind::Passive); }

ControllerHandle ControllerHandle::make(ControllerKind kind, const PolicyTable* table) {
  switch (kind) {
    case ControllerKind::TMAnalog: return tm();
    case ControllerKind::TLAnalog:
      if (table == nullptr) throw MissingPolicyTable("TL controller requires a policy table");
      return tl(*table);
    case ControllerKind::BBAnalog: return bb();
    case ControllerKind::Passive: return passive();
  }
  throw ConfigError("unknown controller kind");
}

void ControllerHandle::set_home(double x) {
  tm_cfg_.home_x = x;
  target_point_ = x;
}

RobotSpec ControllerHandle::adapt(RobotSpec spec) const {
  spec.step_period = gait_.step_period;
  spec.swing_apex = gait_.swing_apex;
  return spec;
}

ControlCommand ControllerHandle::compute(const RobotState& obs, const RobotSpec& spec) {
  switch (kind_) {
    case ControllerKind::TMAnalog: return tm_policy(obs, spec, tm_cfg_);
    case ControllerKind::TLAnalog: return tl_policy(obs, spec, *table_, tm_cfg_);
    case ControllerKind::BBAnalog:
      commanded_velocity_ = operator_nudge(obs, target_point_, nudge_cfg_);
      return bb_policy(obs, commanded_velocity_, spec, bb_cfg_);
    case ControllerKind::Passive: {
      ControlCommand u;
      u.hold_stance = true;
      return u;
    }
  }
  return {};
}

}  // namespace legimpact
