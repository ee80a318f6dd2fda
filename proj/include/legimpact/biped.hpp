#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace legimpact {

enum class Stance { Left, Right, Dual };
enum class SwingDir { Up, Down, None };

std::string_view to_string(Stance s);
std::string_view to_string(SwingDir s);

struct GaitPhase {
  Stance stance = Stance::Dual;
  SwingDir swing_dir = SwingDir::None;

  bool legal() const { return (stance == Stance::Dual) == (swing_dir == SwingDir::None); }
  std::string label() const;  // e.g. "Left_Up", "Dual_None"
  static std::optional<GaitPhase> parse(std::string_view label);

  friend bool operator==(const GaitPhase&, const GaitPhase&) = default;
};

// Reduced sagittal biped: linear inverted pendulum for the CoM, a torso
// flywheel for pitch, and discrete foot placement at fixed step timing.
struct RobotSpec {
  double total_mass = 45.0;
  double com_height_nominal = 0.9;
  double flywheel_inertia = 4.0;
  double max_step_length = 0.5;  // |touchdown - stance foot|
  double step_period = 0.4;
  double swing_apex = 0.08;
  double ankle_torque_limit = 20.0;
  double flywheel_torque_limit = 40.0;
  double dual_support_fraction = 0.2;
  double support_reach = 0.45;  // CoM-to-support offset beyond which the leg buckles
  double swing_retarget_limit = 0.55;  // swing progress after which the touchdown point is frozen
  double gravity = 9.81;
  double touchdown_time_noise = 0.005;
  double touchdown_place_noise = 0.005;

  double omega0() const { return std::sqrt(gravity / com_height_nominal); }
  void validate() const;
};

struct RobotState {
  double com_x = 0.0;
  double com_z = 0.9;
  double com_vx = 0.0;
  double com_vz = 0.0;
  double pitch = 0.0;
  double pitch_rate = 0.0;
  double stance_foot_x = 0.0;
  double swing_foot_x = 0.0;
  double swing_foot_z = 0.0;
  GaitPhase gait;
  double phase_clock = 0.0;
  double step_duration = 0.4;   // this step's realized duration (nominal + timing noise)
  double swing_start_x = 0.0;
  double swing_target_x = 0.0;
  Stance support_side = Stance::Left;  // stance foot of the current step's single support
  bool holding = false;                // parked in dual support, clock frozen
  bool falling = false;
  bool fallen = false;
  long steps = 0;

  friend bool operator==(const RobotState&, const RobotState&) = default;
};

struct ControlCommand {
  double ankle_torque = 0.0;
  double flywheel_torque = 0.0;
  double next_footstep_x = 0.0;  // relative to the CoM
  double desired_velocity = 0.0;
  bool hold_stance = false;      // park in dual support instead of stepping

  friend bool operator==(const ControlCommand&, const ControlCommand&) = default;
};

// Horizontal force applied to the torso at `height` above the ground.
struct ExternalForce {
  double force = 0.0;
  double height = 0.0;
};

// Center of pressure reference of the current support: the stance foot in
// single support; in dual support the point of the foot span closest to the CoM.
double support_point(const RobotState& s);

RobotState robot_step(const RobotState& state, const ControlCommand& u,
                      const ExternalForce& external, const RobotSpec& spec, double dt,
                      std::mt19937_64& rng);

GaitPhase phase_label(const RobotState& state);

struct FalloverThresholds {
  double pitch_limit = 0.6;
  double com_height_ratio = 0.5;
  int capture_violation_steps = 3;
  double window = 4.0;

  friend bool operator==(const FalloverThresholds&, const FalloverThresholds&) = default;
};

// `window` holds one state per tick of length `dt`, starting at the impact tick.
bool detect_fallover(std::span<const RobotState> window, double dt, const RobotSpec& spec,
                     const FalloverThresholds& thresholds = {});

// Walking-in-place state at `gait_phase_fraction` of a two-step stride.
RobotState init_state(double placement_offset, double gait_phase_fraction,
                      const RobotSpec& spec, std::mt19937_64& rng, double home_x = 0.0);

// Uniform double in [0, 1) from raw generator bits; identical on every
// standard library, unlike std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_symmetric(std::mt19937_64& rng, double half_width) {
  return (2.0 * uniform01(rng) - 1.0) * half_width;
}

}  // namespace legimpact
