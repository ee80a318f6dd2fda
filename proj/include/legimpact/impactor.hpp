#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace legimpact {

// Physical description of the pneumatic ram. Lengths in meters, mass in kg.
struct ImpactorSpec {
  double ram_mass = 6.4;
  double face_width = 0.1524;
  double face_height_extent = 0.1016;
  double face_center_height = 0.992;
  double travel_length = 0.9;  // from launch position to the front ram stop
  double max_velocity = 10.0;
  double accel_stroke = 0.3;   // constant-acceleration segment of the launch

  void validate() const;
};

// Affine pressure -> peak velocity map of the ram.
struct CalibrationMap {
  double slope = 0.034;  // (m/s) / PSI
  double intercept = 1.00;
  double min_pressure = 15.0;
  double max_pressure = 100.0;
  double max_residual = 0.0;

  static constexpr double kResidualBound = 0.1;

  static CalibrationMap defaults() { return {}; }
  bool contains(double pressure) const {
    return pressure >= min_pressure && pressure <= max_pressure;
  }
  void validate(const ImpactorSpec& spec) const;
};

struct CalibrationSample {
  double pressure;
  double peak_velocity;
};

enum class RamPhase { Charging, Accelerating, Coasting, InContact, Rebounding, Stopped };

std::string_view to_string(RamPhase phase);

struct ImpactorState {
  double ram_position = 0.0;
  double ram_velocity = 0.0;
  RamPhase phase = RamPhase::Charging;
  double peak_velocity_achieved = 0.0;
  double peak_time = 0.0;
  double launch_position = 0.0;
  double target_peak = 0.0;

  friend bool operator==(const ImpactorState&, const ImpactorState&) = default;
};

struct OperatorAction {
  double pressure = 50.0;
  double placement_offset = 0.0;
  unsigned long long seed = 0;
};

double peak_velocity_from_pressure(double pressure, const CalibrationMap& calib);

// Ordinary least squares affine fit. Throws DegenerateSamples when fewer
// than two distinct pressures are given and CalibrationRejected when the
// worst residual reaches CalibrationMap::kResidualBound.
CalibrationMap fit_calibration(std::span<const CalibrationSample> samples);

ImpactorState make_charged_ram(double launch_position);

// Releases a charged ram toward target_peak (m/s).
ImpactorState fire(ImpactorState state, double target_peak, const ImpactorSpec& spec);

// One explicit step of the ram. `time` is the clock at the start of the
// step and is only used to stamp peak_time.
ImpactorState ram_step(const ImpactorState& state, const ImpactorSpec& spec,
                       double contact_force, double dt, double time);

double impact_momentum(const ImpactorSpec& spec, double impact_velocity);

// One sample of the ram trace. `velocity` is taken before `contact_force`
// acts over the following step.
struct RamSample {
  double time;
  double velocity;
  double contact_force;
};

struct ImpactEvent {
  double impact_time = 0.0;
  double impact_velocity = 0.0;
  double peak_velocity = 0.0;
  double peak_time = 0.0;
  double peak_to_impact_gap = 0.0;
  double impact_duration = 0.0;
  double rebound_velocity = 0.0;
  std::optional<double> separation_time;
  std::optional<double> zero_crossing_time;
};

ImpactEvent detect_impact(std::span<const RamSample> trace);

}  // namespace legimpact
