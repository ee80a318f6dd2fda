#include "legimpact/impactor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "legimpact/errors.hpp"

namespace legimpact {

void ImpactorSpec::validate() const {
  if (!(ram_mass > 0 && face_width > 0 && face_height_extent > 0 && face_center_height > 0 &&
        travel_length > 0 && max_velocity > 0 && accel_stroke > 0)) {
    throw ConfigError("impactor spec: all dimensions must be positive");
  }
  if (accel_stroke >= travel_length) {
    throw ConfigError("impactor spec: accel_stroke must be shorter than travel_length");
  }
}

void CalibrationMap::validate(const ImpactorSpec& spec) const {
  if (!(slope > 0)) throw ConfigError("calibration: slope must be positive");
  if (!(min_pressure <= max_pressure)) throw ConfigError("calibration: empty pressure range");
  if (!(max_residual < kResidualBound)) {
    throw CalibrationRejected("calibration: max residual exceeds 0.1 m/s");
  }
  const double top = slope * max_pressure + intercept;
  if (top > spec.max_velocity) {
    throw ConfigError("calibration: peak velocity exceeds the ram's max_velocity");
  }
}

std::string_view to_string(RamPhase phase) {
  switch (phase) {
    case RamPhase::Charging: return "Charging";
    case RamPhase::Accelerating: return "Accelerating";
    case RamPhase::Coasting: return "Coasting";
    case RamPhase::InContact: return "InContact";
    case RamPhase::Rebounding: return "Rebounding";
    case RamPhase::Stopped: return "Stopped";
  }
  return "?";
}

double peak_velocity_from_pressure(double pressure, const CalibrationMap& calib) {
  if (!std::isfinite(pressure) || !calib.contains(pressure)) {
    std::ostringstream os;
    os << "pressure " << pressure << " PSI outside calibrated range [" << calib.min_pressure
       << ", " << calib.max_pressure << "]";
    throw PressureOutOfRange(os.str());
  }
  return calib.slope * pressure + calib.intercept;
}

CalibrationMap fit_calibration(std::span<const CalibrationSample> samples) {
  if (samples.size() < 2) throw DegenerateSamples("calibration needs at least two samples");
  const auto [lo, hi] = std::minmax_element(
      samples.begin(), samples.end(),
      [](const auto& a, const auto& b) { return a.pressure < b.pressure; });
  if (lo->pressure == hi->pressure) {
    throw DegenerateSamples("calibration samples share a single pressure");
  }

  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixX2d design(n, 2);
  Eigen::VectorXd velocity(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = samples[static_cast<std::size_t>(i)].pressure;
    design(i, 1) = 1.0;
    velocity(i) = samples[static_cast<std::size_t>(i)].peak_velocity;
  }
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(velocity);
  const double max_residual = (design * coef - velocity).cwiseAbs().maxCoeff();

  CalibrationMap map;
  map.slope = coef(0);
  map.intercept = coef(1);
  map.min_pressure = lo->pressure;
  map.max_pressure = hi->pressure;
  map.max_residual = max_residual;
  if (!(map.slope > 0)) throw CalibrationRejected("calibration slope is not positive");
  if (!(max_residual < CalibrationMap::kResidualBound)) {
    std::ostringstream os;
    os << "calibration rejected: max residual " << max_residual << " m/s >= 0.1 m/s";
    throw CalibrationRejected(os.str());
  }
  return map;
}

ImpactorState make_charged_ram(double launch_position) {
  ImpactorState s;
  s.ram_position = launch_position;
  s.launch_position = launch_position;
  return s;
}

ImpactorState fire(ImpactorState state, double target_peak, const ImpactorSpec& spec) {
  if (!(target_peak >= 0) || target_peak > spec.max_velocity) {
    throw PressureOutOfRange("target peak velocity outside the ram's capability");
  }
  state.target_peak = target_peak;
  state.phase = target_peak > 0 ? RamPhase::Accelerating : RamPhase::Stopped;
  return state;
}

ImpactorState ram_step(const ImpactorState& state, const ImpactorSpec& spec,
                       double contact_force, double dt, double time) {
  ImpactorState next = state;
  const double decel = contact_force / spec.ram_mass;
  const double front_stop = state.launch_position + spec.travel_length;

  switch (state.phase) {
    case RamPhase::Charging:
    case RamPhase::Stopped:
      // Held by the launcher or by a ram stop; acts as a fixed wall.
      return next;

    case RamPhase::Accelerating: {
      const double accel =
          state.target_peak * state.target_peak / (2.0 * spec.accel_stroke);
      next.ram_velocity = state.ram_velocity + accel * dt - decel * dt;
      if (next.ram_velocity >= state.target_peak) {
        next.ram_velocity = state.target_peak;
        next.phase = RamPhase::Coasting;
      }
      if (contact_force > 0) next.phase = RamPhase::InContact;
      break;
    }

    case RamPhase::Coasting:
      next.ram_velocity = state.ram_velocity - decel * dt;
      if (contact_force > 0) next.phase = RamPhase::InContact;
      break;

    case RamPhase::InContact:
      next.ram_velocity = state.ram_velocity - decel * dt;
      if (contact_force <= 0) next.phase = RamPhase::Rebounding;
      break;

    case RamPhase::Rebounding:
      next.ram_velocity = state.ram_velocity - decel * dt;
      if (contact_force > 0) next.phase = RamPhase::InContact;
      break;
  }

  next.ram_position = state.ram_position + next.ram_velocity * dt;

  if (next.ram_velocity > next.peak_velocity_achieved) {
    next.peak_velocity_achieved = next.ram_velocity;
    next.peak_time = time + dt;
  }

  if (next.phase != RamPhase::InContact) {
    if (next.ram_position <= state.launch_position && next.ram_velocity < 0) {
      next.ram_position = state.launch_position;
      next.ram_velocity = 0.0;
      next.phase = RamPhase::Stopped;
    } else if (next.ram_position >= front_stop && next.ram_velocity > 0) {
      next.ram_position = front_stop;
      next.ram_velocity = 0.0;
      next.phase = RamPhase::Stopped;
    }
  }
  return next;
}

double impact_momentum(const ImpactorSpec& spec, double impact_velocity) {
  if (!(impact_velocity >= 0)) {
    throw std::invalid_argument("impact velocity must be non-negative");
  }
  return spec.ram_mass * impact_velocity;
}

ImpactEvent detect_impact(std::span<const RamSample> trace) {
  const auto first = std::find_if(trace.begin(), trace.end(),
                                  [](const RamSample& s) { return s.contact_force > 0; });
  if (first == trace.end()) throw NoContact("ram trace contains no contact episode");

  ImpactEvent ev;
  ev.impact_time = first->time;
  ev.impact_velocity = first->velocity;

  // Peak over the pre-impact history; the first sample attaining it wins.
  ev.peak_velocity = first->velocity;
  ev.peak_time = first->time;
  for (auto it = trace.begin(); it != first; ++it) {
    if (it->velocity > ev.peak_velocity ||
        (it->velocity == ev.peak_velocity && it->time < ev.peak_time)) {
      ev.peak_velocity = it->velocity;
      ev.peak_time = it->time;
    }
  }
  ev.peak_to_impact_gap = ev.impact_time - ev.peak_time;

  const auto sep = std::find_if(first, trace.end(),
                                [](const RamSample& s) { return s.contact_force <= 0; });
  if (sep != trace.end()) {
    ev.separation_time = sep->time;
    ev.impact_duration = sep->time - ev.impact_time;
    ev.rebound_velocity = sep->velocity;
  } else {
    ev.impact_duration = trace.back().time - ev.impact_time;
    ev.rebound_velocity = trace.back().velocity;
  }
  const auto zero = std::find_if(first, trace.end(),
                                 [](const RamSample& s) { return s.velocity <= 0; });
  if (zero != trace.end()) ev.zero_crossing_time = zero->time;
  return ev;
}

}  // namespace legimpact
