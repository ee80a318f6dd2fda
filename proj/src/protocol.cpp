#include "legimpact/protocol.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "legimpact/errors.hpp"

namespace legimpact {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

long long ticks_for(double seconds, double dt) {
  return static_cast<long long>(std::llround(seconds / dt));
}

}  // namespace

std::uint64_t hash_precontact(std::span<const RamKinematics> samples) {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xFFu;
      h *= 1099511628211ull;
    }
  };
  for (const auto& s : samples) {
    mix(s.position);
    mix(s.velocity);
  }
  return h;
}

TestOutcome run_test(ControllerHandle controller, const OperatorAction& action,
                     const TestSetup& setup, std::optional<double> forced_phase) {
  setup.sim.validate();
  setup.impactor.validate();
  const RobotSpec spec = controller.adapt(setup.robot);
  spec.validate();
  controller.set_home(setup.home_x);

  const double target_peak = peak_velocity_from_pressure(action.pressure, setup.calibration);

  std::mt19937_64 rng(action.seed);
  const double fraction = forced_phase ? *forced_phase : uniform01(rng);
  const RobotState robot0 =
      init_state(action.placement_offset, fraction, spec, rng, setup.home_x);

  RobotState nominal;
  nominal.com_x = setup.home_x;
  nominal.com_z = spec.com_height_nominal;
  const double launch =
      foam_face_x(nominal, setup.sim) - setup.impactor.accel_stroke - setup.coast_distance;

  WorldState world = make_world(robot0, make_charged_ram(launch), 0);
  world.rng = rng;

  const double dt = setup.sim.dt;
  const long long settle_ticks = ticks_for(setup.settle_time, dt);
  const long long window_ticks = ticks_for(setup.fallover.window, dt);
  const long long horizon_ticks = ticks_for(setup.sim.horizon, dt);

  TestOutcome out;
  auto log = [&](const WorldState& w) {
    if (setup.log_trajectory) out.trajectory.push_back(log_row(w));
  };

  log(world);
  for (long long i = 0; i < settle_ticks; ++i) {
    world = advance(world, setup.sim, controller, spec, setup.impactor);
    log(world);
  }

  world.impactor = fire(world.impactor, target_peak, setup.impactor);

  std::optional<long long> impact_tick;
  GaitPhase phase_at_impact;
  std::vector<RobotState> window;
  window.reserve(static_cast<std::size_t>(window_ticks));
  while (true) {
    if (!impact_tick) {
      if (world.tick >= horizon_ticks || world.impactor.phase == RamPhase::Stopped) {
        throw NoContact("ram never reached the robot");
      }
      out.ram_precontact.push_back({world.impactor.ram_position, world.impactor.ram_velocity});
    }
    const RobotState before = world.robot;
    world = advance(world, setup.sim, controller, spec, setup.impactor, &out.ram_trace);
    log(world);
    if (!impact_tick && world.contact.first_contact_time) {
      impact_tick = world.tick - 1;
      phase_at_impact = phase_label(before);
      out.ram_precontact.pop_back();
    }
    if (impact_tick) {
      window.push_back(world.robot);
      if (static_cast<long long>(window.size()) >= window_ticks) break;
    }
  }

  const ImpactEvent ev = detect_impact(out.ram_trace);

  // Episode accounting from the same force samples the integrator used.
  const double h = dt / setup.sim.contact_substeps;
  double impulse = 0.0;
  double v_first = 0.0;
  double v_sep = 0.0;
  bool started = false;
  for (const auto& s : out.ram_trace) {
    if (!started) {
      if (s.contact_force <= 0) continue;
      started = true;
      v_first = s.velocity;
    }
    if (s.contact_force <= 0) {
      v_sep = s.velocity;
      break;
    }
    impulse += s.contact_force * h;
    v_sep = s.velocity - s.contact_force / setup.impactor.ram_mass * h;
  }
  out.impulse_to_robot = impulse;
  out.ram_momentum_change = setup.impactor.ram_mass * (v_sep - v_first);

  TestRecord& r = out.record;
  r.controller_kind = controller.kind();
  r.pressure = action.pressure;
  r.peak_velocity = ev.peak_velocity;
  r.impact_velocity = ev.impact_velocity;
  r.impact_momentum = impact_momentum(setup.impactor, ev.impact_velocity);
  r.peak_to_impact_gap = ev.peak_to_impact_gap;
  r.impact_duration = ev.impact_duration;
  r.phase_at_impact = phase_at_impact;
  r.fallover = detect_fallover(window, dt, spec, setup.fallover);
  r.seed = action.seed;
  r.fallover_thresholds = setup.fallover;
  return out;
}

void CampaignConfig::validate() const {
  if (!(start_pressure <= end_pressure)) throw ConfigError("campaign: start_pressure > end_pressure");
  if (!(pressure_step > 0)) throw ConfigError("campaign: pressure_step must be positive");
  if (consecutive_fail_stop < 1) throw ConfigError("campaign: consecutive_fail_stop must be >= 1");
  if (repeats_per_pressure < 1) throw ConfigError("campaign: repeats_per_pressure must be >= 1");
  if (!(observation_window >= 4.0)) throw ConfigError("campaign: observation_window must be >= 4 s");
  if (!(placement_jitter >= 0 && placement_jitter <= 0.05)) {
    throw ConfigError("campaign: placement_jitter must lie in [0, 0.05] m");
  }
}

std::string_view to_string(StopReason r) {
  return r == StopReason::ScheduleExhausted ? "ScheduleExhausted" : "ConsecutiveFails";
}

StopReason parse_stop_reason(std::string_view s) {
  if (s == "ScheduleExhausted") return StopReason::ScheduleExhausted;
  if (s == "ConsecutiveFails") return StopReason::ConsecutiveFails;
  throw ConfigError("unknown stop reason '" + std::string(s) + "'");
}

std::vector<double> escalation_schedule(const CampaignConfig& config) {
  config.validate();
  std::vector<double> out;
  for (long k = 0;; ++k) {
    const double p = config.start_pressure + static_cast<double>(k) * config.pressure_step;
    if (p >= config.end_pressure - 1e-9) break;
    out.push_back(p);
  }
  out.push_back(config.end_pressure);
  return out;
}

std::uint64_t derive_test_seed(std::uint64_t seed_base, std::size_t test_index) {
  return splitmix64(splitmix64(seed_base) ^ static_cast<std::uint64_t>(test_index));
}

OperatorAction derive_action(const CampaignConfig& config, std::size_t index, double pressure) {
  OperatorAction a;
  a.pressure = pressure;
  a.seed = derive_test_seed(config.seed_base, index);
  std::mt19937_64 placement_rng(splitmix64(a.seed ^ 0x5bd1e995ull));
  a.placement_offset = uniform_symmetric(placement_rng, config.placement_jitter);
  return a;
}

std::string make_test_id(ControllerKind kind, double pressure, int repeat) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%g_%02d", std::string(to_string(kind)).c_str(), pressure,
                repeat + 1);
  return buf;
}

CampaignResult run_campaign(ControllerKind kind, const CampaignConfig& config,
                            const CalibrationMap& calibration, const TestExecutor& execute) {
  config.validate();
  CampaignResult result;
  result.record.controller_kind = kind;
  result.record.config = config;
  result.record.calibration = calibration;

  int consecutive_falls = 0;
  std::size_t index = 0;
  for (double pressure : escalation_schedule(config)) {
    for (int repeat = 0; repeat < config.repeats_per_pressure; ++repeat, ++index) {
      const OperatorAction action = derive_action(config, index, pressure);
      TestOutcome outcome;
      try {
        outcome = execute(index, repeat, action);
      } catch (const NoContact&) {
        outcome = TestOutcome{};
        outcome.record.valid = false;
        outcome.record.pressure = pressure;
        outcome.record.seed = action.seed;
      }
      outcome.record.test_id = make_test_id(kind, pressure, repeat);
      outcome.record.controller_kind = kind;
      if (outcome.record.valid) {
        consecutive_falls = outcome.record.fallover ? consecutive_falls + 1 : 0;
      }
      result.record.tests.push_back(outcome.record);
      result.outcomes.push_back(std::move(outcome));
      if (consecutive_falls >= config.consecutive_fail_stop) {
        result.record.stop_reason = StopReason::ConsecutiveFails;
        return result;
      }
    }
  }
  result.record.stop_reason = StopReason::ScheduleExhausted;
  return result;
}

CampaignResult run_campaign(ControllerKind kind, const CampaignConfig& config, TestSetup setup,
                            const PolicyTable* table) {
  setup.fallover.window = config.observation_window;
  const ControllerHandle prototype = ControllerHandle::make(kind, table);
  return run_campaign(kind, config, setup.calibration,
                      [&](std::size_t, int, const OperatorAction& action) {
                        return run_test(prototype, action, setup);
                      });
}

}  // namespace legimpact
