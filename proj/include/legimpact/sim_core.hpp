#pragma once

#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "legimpact/biped.hpp"
#include "legimpact/controllers.hpp"
#include "legimpact/impactor.hpp"

namespace legimpact {

struct ContactState {
  bool in_contact = false;
  double penetration = 0.0;
  double contact_force = 0.0;
  double impulse_accumulated = 0.0;  // first episode only; frozen at separation
  std::optional<double> first_contact_time;
  std::optional<double> separation_time;

  friend bool operator==(const ContactState&, const ContactState&) = default;
};

struct SimConfig {
  double dt = 1e-3;
  double horizon = 10.0;
  double foam_stiffness = 5e4;
  double foam_damping = 600.0;
  double foam_thickness = 0.054;
  double gravity = 9.81;
  double impact_axis_height = 0.992;
  double torso_half_depth = 0.12;
  int contact_substeps = 10;

  void validate() const;
};

struct WorldState {
  long long tick = 0;
  double time = 0.0;
  RobotState robot;
  ImpactorState impactor;
  ContactState contact;
  std::mt19937_64 rng;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

WorldState make_world(const RobotState& robot, const ImpactorState& impactor,
                      unsigned long long seed);

// Spring-damper normal force, clamped at zero so the foam never pulls.
double kelvin_voigt(double penetration, double penetration_rate, double stiffness,
                    double damping);

// x of the outer foam face on the torso at the impact height.
double foam_face_x(const RobotState& robot, const SimConfig& config);

struct ContactGeometry {
  double gap;          // > 0 when separated
  double penetration;  // max(0, -gap)
  double rate;         // closing speed of ram relative to the torso face
};

ContactGeometry contact_geometry(const ImpactorState& ram, const RobotState& robot,
                                 const SimConfig& config);

double contact_force(const ImpactorState& ram, const RobotState& robot, const SimConfig& config);

// One tick of the composed robot + ram system. Sub-steps, in order:
//   1. the controller computes its command from the robot observation,
//   2. the foam force is evaluated from the current geometry,
//   3. robot and ram integrate with semi-implicit Euler under that force,
//   4. contact bookkeeping records the force sample.
// Steps 2-4 repeat `contact_substeps` times per tick while the ram is in or
// about to enter contact. When `trace` is given, each force sample is
// appended to it.
WorldState advance(const WorldState& world, const SimConfig& config, ControllerHandle& controller,
                   const RobotSpec& robot_spec, const ImpactorSpec& impactor_spec,
                   std::vector<RamSample>* trace = nullptr);

struct TickLogRow {
  long long tick;
  double time_s;
  double ram_pos_m;
  double ram_vel_mps;
  double contact_force_N;
  double com_x_m;
  double com_z_m;
  double com_vx_mps;
  double com_vz_mps;
  double pitch_rad;
  double pitch_rate_radps;
  Stance stance;
  SwingDir swing;
};

TickLogRow log_row(const WorldState& world);
void write_trajectory_csv(std::ostream& out, std::span<const TickLogRow> rows);

std::string serialize_world(const WorldState& world);
WorldState deserialize_world(std::string_view text);

// Ram against a fixed rigid wall whose foam face sits at x = 0, starting
// just outside contact at `approach_velocity`.
struct WallImpactResult {
  double impulse = 0.0;
  double approach_velocity = 0.0;
  double rebound_velocity = 0.0;
  double contact_duration = 0.0;
  std::vector<RamSample> trace;
};

WallImpactResult simulate_wall_impact(const ImpactorSpec& spec, const SimConfig& config,
                                      double approach_velocity, double post_contact_time = 0.05);

}  // namespace legimpact
