#include "legimpact/sim_core.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "legimpact/errors.hpp"

namespace legimpact {

void SimConfig::validate() const {
  if (!(dt > 0)) throw ConfigError("sim config: dt must be positive");
  if (!(horizon >= 4.0)) throw ConfigError("sim config: horizon must be at least 4 s");
  if (!(foam_stiffness > 0 && foam_damping >= 0 && foam_thickness >= 0)) {
    throw ConfigError("sim config: foam constants out of range");
  }
  if (contact_substeps < 1) throw ConfigError("sim config: contact_substeps must be >= 1");
}

WorldState make_world(const RobotState& robot, const ImpactorState& impactor,
                      unsigned long long seed) {
  WorldState w;
  w.robot = robot;
  w.impactor = impactor;
  w.rng.seed(seed);
  return w;
}

double kelvin_voigt(double penetration, double penetration_rate, double stiffness,
                    double damping) {
  if (penetration <= 0) return 0.0;
  return std::max(0.0, stiffness * penetration + damping * penetration_rate);
}

double foam_face_x(const RobotState& robot, const SimConfig& config) {
  const double lever = config.impact_axis_height - robot.com_z;
  return robot.com_x - config.torso_half_depth + lever * std::sin(robot.pitch) -
         config.foam_thickness;
}

ContactGeometry contact_geometry(const ImpactorState& ram, const RobotState& robot,
                                 const SimConfig& config) {
  const double lever = config.impact_axis_height - robot.com_z;
  const double face_velocity = robot.com_vx + lever * std::cos(robot.pitch) * robot.pitch_rate;
  ContactGeometry g;
  g.gap = foam_face_x(robot, config) - ram.ram_position;
  g.penetration = std::max(0.0, -g.gap);
  g.rate = ram.ram_velocity - face_velocity;
  return g;
}

double contact_force(const ImpactorState& ram, const RobotState& robot, const SimConfig& config) {
  const auto g = contact_geometry(ram, robot, config);
  return kelvin_voigt(g.penetration, g.rate, config.foam_stiffness, config.foam_damping);
}

namespace {

void bookkeep(ContactState& c, double force, double penetration, double h, double t) {
  c.penetration = penetration;
  c.contact_force = force;
  if (force > 0) {
    if (!c.first_contact_time) c.first_contact_time = t;
    if (!c.separation_time) c.impulse_accumulated += force * h;
    c.in_contact = true;
  } else {
    if (c.in_contact && !c.separation_time) c.separation_time = t;
    c.in_contact = false;
  }
}

bool needs_substeps(const WorldState& w, const SimConfig& config) {
  if (w.contact.in_contact) return true;
  if (w.impactor.phase == RamPhase::Charging || w.impactor.phase == RamPhase::Stopped) {
    return false;
  }
  const auto g = contact_geometry(w.impactor, w.robot, config);
  return g.gap <= 0 || g.gap < 2.0 * std::max(0.0, g.rate) * config.dt;
}

bool finite_world(const WorldState& w) {
  const auto& r = w.robot;
  const auto& i = w.impactor;
  for (double v : {r.com_x, r.com_z, r.com_vx, r.com_vz, r.pitch, r.pitch_rate, r.stance_foot_x,
                   r.swing_foot_x, r.swing_foot_z, i.ram_position, i.ram_velocity,
                   w.contact.contact_force, w.contact.impulse_accumulated}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

WorldState advance(const WorldState& world, const SimConfig& config, ControllerHandle& controller,
                   const RobotSpec& robot_spec, const ImpactorSpec& impactor_spec,
                   std::vector<RamSample>* trace) {
  if (!finite_world(world)) throw NonFiniteState("world state is non-finite before advance");

  WorldState w = world;
  const ControlCommand u = controller.compute(w.robot, robot_spec);

  const int n = needs_substeps(w, config) ? config.contact_substeps : 1;
  const double h = config.dt / n;
  const double t0 = static_cast<double>(w.tick) * config.dt;
  // Force-free substeps are integrated in one ram_step so that a tick
  // without contact advances the ram by exactly dt, however it was split.
  ImpactorState anchor = w.impactor;
  double anchor_t = t0;
  int pending = 0;
  auto free_flight = [&](int m) {
    if (m == 0) return anchor;
    const double span = m == n ? config.dt : m * h;
    return ram_step(anchor, impactor_spec, 0.0, span, anchor_t);
  };
  for (int k = 0; k < n; ++k) {
    const double t = t0 + k * h;
    const ImpactorState ram = free_flight(pending);
    const auto g = contact_geometry(ram, w.robot, config);
    const double force =
        kelvin_voigt(g.penetration, g.rate, config.foam_stiffness, config.foam_damping);
    if (trace) trace->push_back({t, ram.ram_velocity, force});

    w.robot = robot_step(w.robot, u, {force, config.impact_axis_height}, robot_spec, h, w.rng);
    if (force > 0.0) {
      anchor = ram_step(ram, impactor_spec, force, h, t);
      anchor_t = t + h;
      pending = 0;
    } else {
      ++pending;
    }
    bookkeep(w.contact, force, g.penetration, h, t);
  }
  w.impactor = free_flight(pending);

  ++w.tick;
  w.time = static_cast<double>(w.tick) * config.dt;
  if (!finite_world(w)) {
    throw NonFiniteState("world state became non-finite at tick " + std::to_string(w.tick));
  }
  return w;
}

TickLogRow log_row(const WorldState& w) {
  const auto& r = w.robot;
  return {w.tick,       w.time,   w.impactor.ram_position, w.impactor.ram_velocity,
          w.contact.contact_force, r.com_x, r.com_z,  r.com_vx,
          r.com_vz,     r.pitch,  r.pitch_rate,            r.gait.stance,
          r.gait.swing_dir};
}

void write_trajectory_csv(std::ostream& out, std::span<const TickLogRow> rows) {
  out << "tick,time_s,ram_pos_m,ram_vel_mps,contact_force_N,com_x_m,com_z_m,com_vx_mps,"
         "com_vz_mps,pitch_rad,pitch_rate_radps,stance_label,swing_label\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.tick << ',' << r.time_s << ',' << r.ram_pos_m << ',' << r.ram_vel_mps << ','
        << r.contact_force_N << ',' << r.com_x_m << ',' << r.com_z_m << ',' << r.com_vx_mps << ','
        << r.com_vz_mps << ',' << r.pitch_rad << ',' << r.pitch_rate_radps << ','
        << to_string(r.stance) << ',' << to_string(r.swing) << '\n';
  }
}

namespace {

using nlohmann::json;

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

Stance stance_from(const std::string& s) {
  if (s == "Left") return Stance::Left;
  if (s == "Right") return Stance::Right;
  if (s == "Dual") return Stance::Dual;
  throw SchemaMismatch("stance", 1, "unknown stance '" + s + "'");
}

RamPhase ram_phase_from(const std::string& s) {
  for (auto p : {RamPhase::Charging, RamPhase::Accelerating, RamPhase::Coasting,
                 RamPhase::InContact, RamPhase::Rebounding, RamPhase::Stopped}) {
    if (to_string(p) == s) return p;
  }
  throw SchemaMismatch("phase", 1, "unknown ram phase '" + s + "'");
}

}  // namespace

std::string serialize_world(const WorldState& w) {
  const auto& r = w.robot;
  const auto& i = w.impactor;
  const auto& c = w.contact;
  std::ostringstream rng;
  rng << w.rng;
  json j = {
      {"tick", w.tick},
      {"time", w.time},
      {"robot",
       {{"com_x", r.com_x}, {"com_z", r.com_z}, {"com_vx", r.com_vx}, {"com_vz", r.com_vz},
        {"pitch", r.pitch}, {"pitch_rate", r.pitch_rate}, {"stance_foot_x", r.stance_foot_x},
        {"swing_foot_x", r.swing_foot_x}, {"swing_foot_z", r.swing_foot_z},
        {"gait", r.gait.label()}, {"phase_clock", r.phase_clock},
        {"step_duration", r.step_duration}, {"swing_start_x", r.swing_start_x},
        {"swing_target_x", r.swing_target_x},
        {"support_side", std::string(to_string(r.support_side))}, {"holding", r.holding},
        {"falling", r.falling}, {"fallen", r.fallen}, {"steps", r.steps}}},
      {"impactor",
       {{"ram_position", i.ram_position}, {"ram_velocity", i.ram_velocity},
        {"phase", std::string(to_string(i.phase))},
        {"peak_velocity_achieved", i.peak_velocity_achieved}, {"peak_time", i.peak_time},
        {"launch_position", i.launch_position}, {"target_peak", i.target_peak}}},
      {"contact",
       {{"in_contact", c.in_contact}, {"penetration", c.penetration},
        {"contact_force", c.contact_force}, {"impulse_accumulated", c.impulse_accumulated},
        {"first_contact_time", optional_json(c.first_contact_time)},
        {"separation_time", optional_json(c.separation_time)}}},
      {"rng_state", rng.str()},
  };
  return j.dump();
}

WorldState deserialize_world(std::string_view text) {
  const json j = json::parse(text);
  WorldState w;
  w.tick = j.at("tick").get<long long>();
  w.time = j.at("time").get<double>();

  const auto& r = j.at("robot");
  auto& rs = w.robot;
  rs.com_x = r.at("com_x");
  rs.com_z = r.at("com_z");
  rs.com_vx = r.at("com_vx");
  rs.com_vz = r.at("com_vz");
  rs.pitch = r.at("pitch");
  rs.pitch_rate = r.at("pitch_rate");
  rs.stance_foot_x = r.at("stance_foot_x");
  rs.swing_foot_x = r.at("swing_foot_x");
  rs.swing_foot_z = r.at("swing_foot_z");
  const auto gait = GaitPhase::parse(r.at("gait").get<std::string>());
  if (!gait) throw SchemaMismatch("gait", 1, "illegal gait label");
  rs.gait = *gait;
  rs.phase_clock = r.at("phase_clock");
  rs.step_duration = r.at("step_duration");
  rs.swing_start_x = r.at("swing_start_x");
  rs.swing_target_x = r.at("swing_target_x");
  rs.support_side = stance_from(r.at("support_side").get<std::string>());
  rs.holding = r.at("holding");
  rs.falling = r.at("falling");
  rs.fallen = r.at("fallen");
  rs.steps = r.at("steps");

  const auto& i = j.at("impactor");
  auto& is = w.impactor;
  is.ram_position = i.at("ram_position");
  is.ram_velocity = i.at("ram_velocity");
  is.phase = ram_phase_from(i.at("phase").get<std::string>());
  is.peak_velocity_achieved = i.at("peak_velocity_achieved");
  is.peak_time = i.at("peak_time");
  is.launch_position = i.at("launch_position");
  is.target_peak = i.at("target_peak");

  const auto& c = j.at("contact");
  auto& cs = w.contact;
  cs.in_contact = c.at("in_contact");
  cs.penetration = c.at("penetration");
  cs.contact_force = c.at("contact_force");
  cs.impulse_accumulated = c.at("impulse_accumulated");
  cs.first_contact_time = optional_from(c.at("first_contact_time"));
  cs.separation_time = optional_from(c.at("separation_time"));

  std::istringstream rng(j.at("rng_state").get<std::string>());
  rng >> w.rng;
  if (!rng) throw SchemaMismatch("rng_state", 1, "unreadable generator state");
  return w;
}

WallImpactResult simulate_wall_impact(const ImpactorSpec& spec, const SimConfig& config,
                                      double approach_velocity, double post_contact_time) {
  WallImpactResult out;
  out.approach_velocity = approach_velocity;

  ImpactorState ram = make_charged_ram(std::min(-0.5, 0.3 - spec.travel_length));
  ram.phase = RamPhase::Coasting;
  ram.target_peak = approach_velocity;
  ram.ram_velocity = approach_velocity;
  ram.peak_velocity_achieved = approach_velocity;
  ram.ram_position = -approach_velocity * config.dt;  // one tick from the face

  const int n = config.contact_substeps;
  const double h = config.dt / n;
  ContactState contact;
  double t = 0.0;
  const long long max_steps = static_cast<long long>(std::ceil(1.0 / h));
  for (long long step = 0; step < max_steps; ++step) {
    t = static_cast<double>(step) * h;
    const double pen = std::max(0.0, ram.ram_position);
    const double force = kelvin_voigt(pen, ram.ram_velocity, config.foam_stiffness,
                                      config.foam_damping);
    out.trace.push_back({t, ram.ram_velocity, force});
    ram = ram_step(ram, spec, force, h, t);
    bookkeep(contact, force, pen, h, t);
    if (contact.separation_time && t - *contact.separation_time >= post_contact_time) break;
  }
  if (!contact.first_contact_time || !contact.separation_time) {
    throw NoContact("wall impact did not complete a contact episode");
  }
  out.impulse = contact.impulse_accumulated;
  out.contact_duration = *contact.separation_time - *contact.first_contact_time;
  const auto ev = detect_impact(out.trace);
  out.rebound_velocity = ev.rebound_velocity;
  return out;
}

}  // namespace legimpact
