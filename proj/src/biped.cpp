#include "legimpact/biped.hpp"

#include <algorithm>
#include <numbers>

#include "legimpact/errors.hpp"

namespace legimpact {

namespace {

constexpr double kGroundedComHeight = 0.2;

Stance other_side(Stance s) { return s == Stance::Left ? Stance::Right : Stance::Left; }

double dual_duration(const RobotSpec& spec) {
  return spec.dual_support_fraction * spec.step_period;
}

// Fraction of the swing completed, or nullopt while in dual support.
std::optional<double> swing_progress(const RobotState& s, const RobotSpec& spec) {
  const double t_dual = dual_duration(spec);
  if (s.phase_clock < t_dual) return std::nullopt;
  const double swing_time = s.step_duration - t_dual;
  return std::clamp((s.phase_clock - t_dual) / swing_time, 0.0, 1.0);
}

void refresh_swing(RobotState& s, const RobotSpec& spec, double target_x) {
  const auto progress = swing_progress(s, spec);
  if (!progress) {
    s.swing_target_x = target_x;
    s.swing_foot_z = 0.0;
    s.gait = {Stance::Dual, SwingDir::None};
    return;
  }
  const double p = *progress;
  if (p < spec.swing_retarget_limit) s.swing_target_x = target_x;
  s.swing_foot_x = s.swing_start_x + (s.swing_target_x - s.swing_start_x) * p;
  s.swing_foot_z = spec.swing_apex * std::sin(std::numbers::pi * p);
  s.gait = {s.support_side, p < 0.5 ? SwingDir::Up : SwingDir::Down};
}

double touchdown_target(const RobotState& s, const ControlCommand& u, const RobotSpec& spec) {
  const double rel = std::clamp(u.next_footstep_x, -spec.max_step_length, spec.max_step_length);
  return std::clamp(s.com_x + rel, s.stance_foot_x - spec.max_step_length,
                    s.stance_foot_x + spec.max_step_length);
}

void check_finite(const RobotState& s) {
  for (double v : {s.com_x, s.com_z, s.com_vx, s.com_vz, s.pitch, s.pitch_rate, s.stance_foot_x,
                   s.swing_foot_x, s.swing_foot_z, s.phase_clock}) {
    if (!std::isfinite(v)) throw NonFiniteState("robot state became non-finite");
  }
}

}  // namespace

std::string_view to_string(Stance s) {
  switch (s) {
    case Stance::Left: return "Left";
    case Stance::Right: return "Right";
    case Stance::Dual: return "Dual";
  }
  return "?";
}

std::string_view to_string(SwingDir s) {
  switch (s) {
    case SwingDir::Up: return "Up";
    case SwingDir::Down: return "Down";
    case SwingDir::None: return "None";
  }
  return "?";
}

std::string GaitPhase::label() const {
  std::string out(to_string(stance));
  out += '_';
  out += to_string(swing_dir);
  return out;
}

std::optional<GaitPhase> GaitPhase::parse(std::string_view label) {
  const auto sep = label.find('_');
  if (sep == std::string_view::npos) return std::nullopt;
  const auto st = label.substr(0, sep);
  const auto sw = label.substr(sep + 1);
  GaitPhase g;
  if (st == "Left") g.stance = Stance::Left;
  else if (st == "Right") g.stance = Stance::Right;
  else if (st == "Dual") g.stance = Stance::Dual;
  else return std::nullopt;
  if (sw == "Up") g.swing_dir = SwingDir::Up;
  else if (sw == "Down") g.swing_dir = SwingDir::Down;
  else if (sw == "None") g.swing_dir = SwingDir::None;
  else return std::nullopt;
  if (!g.legal()) return std::nullopt;
  return g;
}

void RobotSpec::validate() const {
  if (!(total_mass > 0 && com_height_nominal > 0 && flywheel_inertia > 0 &&
        max_step_length > 0 && step_period > 0 && swing_retarget_limit > 0 &&
        swing_retarget_limit <= 1 && swing_apex > 0 && ankle_torque_limit > 0 &&
        flywheel_torque_limit > 0 && support_reach > 0 && gravity > 0)) {
    throw ConfigError("robot spec: all parameters must be positive");
  }
  if (!(dual_support_fraction >= 0 && dual_support_fraction < 1)) {
    throw ConfigError("robot spec: dual_support_fraction must lie in [0, 1)");
  }
  if (!(touchdown_time_noise >= 0 && touchdown_place_noise >= 0)) {
    throw ConfigError("robot spec: noise amplitudes must be non-negative");
  }
}

double support_point(const RobotState& s) {
  if (s.gait.stance == Stance::Dual) {
    const auto [lo, hi] = std::minmax(s.stance_foot_x, s.swing_foot_x);
    return std::clamp(s.com_x, lo, hi);
  }
  return s.stance_foot_x;
}

RobotState robot_step(const RobotState& state, const ControlCommand& u,
                      const ExternalForce& external, const RobotSpec& spec, double dt,
                      std::mt19937_64& rng) {
  RobotState s = state;
  if (s.fallen) return s;

  const double m = spec.total_mass;
  const double z0 = spec.com_height_nominal;
  const double lever = external.height - s.com_z;

  if (s.falling) {
    // Support lost: the CoM drops ballistically until it reaches the ground.
    s.com_vx += external.force / m * dt;
    s.com_vz -= spec.gravity * dt;
    s.pitch_rate += external.force * lever / spec.flywheel_inertia * dt;
    s.com_x += s.com_vx * dt;
    s.com_z += s.com_vz * dt;
    s.pitch += s.pitch_rate * dt;
    if (s.com_z <= kGroundedComHeight) {
      s.com_z = kGroundedComHeight;
      s.com_vx = s.com_vz = s.pitch_rate = 0.0;
      s.fallen = true;
    }
    check_finite(s);
    return s;
  }

  const double ankle = std::clamp(u.ankle_torque, -spec.ankle_torque_limit, spec.ankle_torque_limit);
  const double fly =
      std::clamp(u.flywheel_torque, -spec.flywheel_torque_limit, spec.flywheel_torque_limit);
  const double base = support_point(s);
  const double w2 = spec.gravity / z0;

  const double ax = w2 * (s.com_x - base) - (ankle + fly) / (m * z0) + external.force / m;
  const double alpha = (fly + external.force * lever) / spec.flywheel_inertia;
  s.com_vx += ax * dt;
  s.com_x += s.com_vx * dt;
  s.pitch_rate += alpha * dt;
  s.pitch += s.pitch_rate * dt;

  const bool in_dual = s.phase_clock < dual_duration(spec);
  if (u.hold_stance && in_dual) {
    s.holding = true;
  } else {
    s.holding = false;
    s.phase_clock += dt;
    if (s.phase_clock >= s.step_duration) {
      const double land =
          s.swing_target_x + uniform_symmetric(rng, spec.touchdown_place_noise);
      s.swing_foot_x = s.stance_foot_x;
      s.swing_start_x = s.stance_foot_x;
      s.stance_foot_x = land;
      s.support_side = other_side(s.support_side);
      s.phase_clock -= s.step_duration;
      s.step_duration = spec.step_period + uniform_symmetric(rng, spec.touchdown_time_noise);
      ++s.steps;
    }
  }
  refresh_swing(s, spec, touchdown_target(s, u, spec));

  if (std::abs(s.com_x - support_point(s)) > spec.support_reach) s.falling = true;
  check_finite(s);
  return s;
}

GaitPhase phase_label(const RobotState& state) { return state.gait; }

bool detect_fallover(std::span<const RobotState> window, double dt, const RobotSpec& spec,
                     const FalloverThresholds& thr) {
  const double covered = static_cast<double>(window.size()) * dt;
  if (window.empty() || covered < thr.window * (1.0 - 1e-9)) {
    throw WindowTooShort("fallover window shorter than the observation window");
  }
  const double w0 = spec.omega0();
  int consecutive = 0;
  for (std::size_t i = 0; i < window.size(); ++i) {
    const RobotState& s = window[i];
    if (s.fallen || std::abs(s.pitch) > thr.pitch_limit ||
        s.com_z < thr.com_height_ratio * spec.com_height_nominal) {
      return true;
    }
    if (i > 0 && s.steps != window[i - 1].steps) {
      const double capture_point = s.com_x + s.com_vx / w0;
      const double required = std::abs(capture_point - window[i - 1].stance_foot_x);
      consecutive = required > spec.max_step_length ? consecutive + 1 : 0;
      if (consecutive >= thr.capture_violation_steps) return true;
    }
  }
  return false;
}

RobotState init_state(double placement_offset, double gait_phase_fraction,
                      const RobotSpec& spec, std::mt19937_64& rng, double home_x) {
  if (!(std::abs(placement_offset) <= 0.05 + 1e-12)) {
    throw OffsetOutOfRange("placement offset must lie within +/-0.05 m");
  }
  if (!(gait_phase_fraction >= 0 && gait_phase_fraction < 1)) {
    throw std::invalid_argument("gait phase fraction must lie in [0, 1)");
  }
  RobotState s;
  s.com_x = home_x + placement_offset;
  s.com_z = spec.com_height_nominal;
  s.stance_foot_x = s.swing_foot_x = s.swing_start_x = s.swing_target_x = s.com_x;
  s.support_side = gait_phase_fraction < 0.5 ? Stance::Left : Stance::Right;
  s.phase_clock = std::fmod(gait_phase_fraction, 0.5) * 2.0 * spec.step_period;
  const double noisy = spec.step_period + uniform_symmetric(rng, spec.touchdown_time_noise);
  s.step_duration = std::max(noisy, s.phase_clock + 1e-3);
  refresh_swing(s, spec, s.com_x);
  return s;
}

}  // namespace legimpact
