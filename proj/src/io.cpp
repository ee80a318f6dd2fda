#include "legimpact/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "legimpact/errors.hpp"

namespace legimpact {

using ojson = nlohmann::ordered_json;

namespace {

// Shortest decimal that round-trips.
std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

ojson thresholds_json(const FalloverThresholds& t) {
  return ojson{{"pitch_limit", t.pitch_limit},
               {"com_height_ratio", t.com_height_ratio},
               {"capture_violation_steps", t.capture_violation_steps},
               {"window", t.window}};
}

ojson config_json(const CampaignConfig& c) {
  return ojson{{"start_pressure", c.start_pressure},
               {"end_pressure", c.end_pressure},
               {"pressure_step", c.pressure_step},
               {"consecutive_fail_stop", c.consecutive_fail_stop},
               {"observation_window", c.observation_window},
               {"repeats_per_pressure", c.repeats_per_pressure},
               {"seed_base", c.seed_base},
               {"placement_jitter", c.placement_jitter}};
}

ojson calibration_json(const CalibrationMap& m) {
  return ojson{{"slope", m.slope},
               {"intercept", m.intercept},
               {"min_pressure", m.min_pressure},
               {"max_pressure", m.max_pressure},
               {"max_residual", m.max_residual}};
}

ojson opt(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

// Typed field access with schema errors that name the field and line.
class Fields {
 public:
  Fields(const ojson& obj, std::size_t line, std::string prefix = {})
      : obj_(obj), line_(line), prefix_(std::move(prefix)) {}

  const ojson& at(const char* name) const {
    auto it = obj_.find(name);
    if (it == obj_.end()) throw SchemaMismatch(prefix_ + name, line_, "missing");
    return *it;
  }
  bool is_null(const char* name) const { return at(name).is_null(); }

  double number(const char* name) const {
    const ojson& v = at(name);
    if (!v.is_number()) throw SchemaMismatch(prefix_ + name, line_, "expected a number");
    return v.get<double>();
  }
  double number_or(const char* name, double fallback) const {
    return is_null(name) ? fallback : number(name);
  }
  std::optional<double> optional_number(const char* name) const {
    if (is_null(name)) return std::nullopt;
    return number(name);
  }
  long long integer(const char* name) const {
    const ojson& v = at(name);
    if (!v.is_number_integer()) throw SchemaMismatch(prefix_ + name, line_, "expected an integer");
    return v.get<long long>();
  }
  std::uint64_t unsigned_integer(const char* name) const {
    const ojson& v = at(name);
    if (!v.is_number_unsigned()) {
      throw SchemaMismatch(prefix_ + name, line_, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }
  bool boolean(const char* name) const {
    const ojson& v = at(name);
    if (!v.is_boolean()) throw SchemaMismatch(prefix_ + name, line_, "expected true or false");
    return v.get<bool>();
  }
  std::string string(const char* name) const {
    const ojson& v = at(name);
    if (!v.is_string()) throw SchemaMismatch(prefix_ + name, line_, "expected a string");
    return v.get<std::string>();
  }
  Fields object(const char* name) const {
    const ojson& v = at(name);
    if (!v.is_object()) throw SchemaMismatch(prefix_ + name, line_, "expected an object");
    return Fields(v, line_, prefix_ + name + ".");
  }
  std::size_t line() const { return line_; }
  const std::string& prefix() const { return prefix_; }

  template <typename F>
  auto parsed(const char* name, F&& f) const {
    try {
      return f(string(name));
    } catch (const SchemaMismatch&) {
      throw;
    } catch (const std::exception& e) {
      throw SchemaMismatch(prefix_ + name, line_, e.what());
    }
  }

 private:
  const ojson& obj_;
  std::size_t line_;
  std::string prefix_;
};

const char* const kRecordFields[] = {
    "test_id",         "controller_kind",    "pressure",        "peak_velocity",
    "impact_velocity", "impact_momentum",    "peak_to_impact_gap", "impact_duration",
    "phase_at_impact", "fallover",           "seed",            "trajectory_ref",
    "valid",           "fallover_thresholds"};

FalloverThresholds thresholds_from(const Fields& f) {
  FalloverThresholds t;
  t.pitch_limit = f.number("pitch_limit");
  t.com_height_ratio = f.number("com_height_ratio");
  t.capture_violation_steps = static_cast<int>(f.integer("capture_violation_steps"));
  t.window = f.number("window");
  return t;
}

GaitPhase phase_from(const std::string& s) {
  auto p = GaitPhase::parse(s);
  if (!p || !p->legal()) throw std::invalid_argument("not a legal gait phase: '" + s + "'");
  return *p;
}

}  // namespace

std::string_view tool_version() { return LEGIMPACT_VERSION; }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string record_to_json(const TestRecord& r) {
  const bool ok = r.valid;
  auto val = [ok](double v) { return ok ? ojson(v) : ojson(nullptr); };
  ojson j;
  j["test_id"] = r.test_id;
  j["controller_kind"] = std::string(to_string(r.controller_kind));
  j["pressure"] = r.pressure;
  j["peak_velocity"] = val(r.peak_velocity);
  j["impact_velocity"] = val(r.impact_velocity);
  j["impact_momentum"] = val(r.impact_momentum);
  j["peak_to_impact_gap"] = val(r.peak_to_impact_gap);
  j["impact_duration"] = val(r.impact_duration);
  j["phase_at_impact"] = ok ? ojson(r.phase_at_impact.label()) : ojson(nullptr);
  j["fallover"] = ok ? ojson(r.fallover) : ojson(nullptr);
  j["seed"] = r.seed;
  j["trajectory_ref"] = r.trajectory_ref ? ojson(*r.trajectory_ref) : ojson(nullptr);
  j["valid"] = r.valid;
  j["fallover_thresholds"] = thresholds_json(r.fallover_thresholds);
  return j.dump();
}

TestRecord record_from_json(std::string_view line, std::size_t line_no,
                            std::vector<std::string>* warnings) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const std::exception& e) {
    throw SchemaMismatch("<record>", line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaMismatch("<record>", line_no, "expected a JSON object");
  const Fields f(j, line_no);

  TestRecord r;
  r.valid = f.boolean("valid");
  r.test_id = f.string("test_id");
  r.controller_kind = f.parsed("controller_kind", parse_controller_kind);
  r.pressure = f.number("pressure");
  r.seed = f.unsigned_integer("seed");
  r.fallover_thresholds = thresholds_from(f.object("fallover_thresholds"));
  if (!f.is_null("trajectory_ref")) r.trajectory_ref = f.string("trajectory_ref");
  if (r.valid) {
    r.peak_velocity = f.number("peak_velocity");
    r.impact_velocity = f.number("impact_velocity");
    r.impact_momentum = f.number("impact_momentum");
    r.peak_to_impact_gap = f.number("peak_to_impact_gap");
    r.impact_duration = f.number("impact_duration");
    r.phase_at_impact = f.parsed("phase_at_impact", phase_from);
    r.fallover = f.boolean("fallover");
  } else {
    for (const char* name : {"peak_velocity", "impact_velocity", "impact_momentum",
                             "peak_to_impact_gap", "impact_duration", "phase_at_impact",
                             "fallover"}) {
      if (!f.is_null(name)) throw SchemaMismatch(name, line_no, "must be null on an invalid test");
    }
  }
  if (warnings != nullptr) {
    for (const auto& [key, _] : j.items()) {
      if (std::find(std::begin(kRecordFields), std::end(kRecordFields), key) ==
          std::end(kRecordFields)) {
        warnings->push_back("line " + std::to_string(line_no) + ": unknown field '" + key +
                            "' ignored");
      }
    }
  }
  return r;
}

std::string campaign_summary_json(const CampaignRecord& c) {
  const ControllerSummary s = summarize_records(c.controller_kind, c.tests);
  ojson body;
  body["controller_kind"] = std::string(to_string(c.controller_kind));
  body["stop_reason"] = std::string(to_string(c.stop_reason));
  body["test_count"] = s.test_count;
  body["fall_count"] = s.fall_count;
  body["invalid_count"] = s.invalid_count;
  body["max_recovered_momentum"] = opt(s.max_recovered_momentum);
  body["min_fallen_momentum"] = opt(s.min_fallen_momentum);
  body["boxer_flag"] = s.boxer_flag;
  body["config"] = config_json(c.config);
  body["calibration"] = calibration_json(c.calibration);
  ojson j;
  j["campaign_summary"] = std::move(body);
  return j.dump();
}

void write_campaign(std::ostream& out, const CampaignRecord& c) {
  for (const auto& r : c.tests) out << record_to_json(r) << '\n';
  out << campaign_summary_json(c) << '\n';
}

void write_campaign(const std::filesystem::path& path, const CampaignRecord& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_campaign(out, c);
  if (!out) throw Error("write failed: " + path.string());
}

RecordFile read_records(std::istream& in) {
  RecordFile file;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (line.find("\"campaign_summary\"") != std::string::npos) {
      ojson j;
      try {
        j = ojson::parse(line);
      } catch (const std::exception& e) {
        throw SchemaMismatch("campaign_summary", line_no, std::string("malformed JSON: ") + e.what());
      }
      if (j.is_object() && j.contains("campaign_summary")) {
        if (file.campaign) throw SchemaMismatch("campaign_summary", line_no, "duplicate summary");
        const Fields s = Fields(j, line_no).object("campaign_summary");
        CampaignRecord c;
        c.controller_kind = s.parsed("controller_kind", parse_controller_kind);
        c.stop_reason = s.parsed("stop_reason", parse_stop_reason);
        const Fields cf = s.object("config");
        c.config.start_pressure = cf.number("start_pressure");
        c.config.end_pressure = cf.number("end_pressure");
        c.config.pressure_step = cf.number("pressure_step");
        c.config.consecutive_fail_stop = static_cast<int>(cf.integer("consecutive_fail_stop"));
        c.config.observation_window = cf.number("observation_window");
        c.config.repeats_per_pressure = static_cast<int>(cf.integer("repeats_per_pressure"));
        c.config.seed_base = cf.unsigned_integer("seed_base");
        c.config.placement_jitter = cf.number("placement_jitter");
        const Fields mf = s.object("calibration");
        c.calibration.slope = mf.number("slope");
        c.calibration.intercept = mf.number("intercept");
        c.calibration.min_pressure = mf.number("min_pressure");
        c.calibration.max_pressure = mf.number("max_pressure");
        c.calibration.max_residual = mf.number("max_residual");
        file.campaign = std::move(c);
        continue;
      }
    }
    if (file.campaign) {
      throw SchemaMismatch("campaign_summary", line_no, "records after the campaign summary");
    }
    file.records.push_back(record_from_json(line, line_no, &file.warnings));
  }
  if (file.campaign) file.campaign->tests = file.records;
  return file;
}

RecordFile read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_records(in);
}

// ---- configuration -------------------------------------------------------

namespace {

struct ConfigValue {
  enum class Kind { Number, String, Bool, StringList } kind;
  double number = 0.0;
  std::string text;
  bool flag = false;
  std::vector<std::string> list;
};

[[noreturn]] void config_fail(std::size_t line, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

std::string unquote(const std::string& s, std::size_t line) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') config_fail(line, "expected a quoted string");
  return s.substr(1, s.size() - 2);
}

ConfigValue parse_value(const std::string& raw, std::size_t line) {
  ConfigValue v{};
  if (raw.empty()) config_fail(line, "missing value");
  if (raw.front() == '"') {
    v.kind = ConfigValue::Kind::String;
    v.text = unquote(raw, line);
  } else if (raw.front() == '[') {
    if (raw.back() != ']') config_fail(line, "unterminated array");
    v.kind = ConfigValue::Kind::StringList;
    std::string body = raw.substr(1, raw.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) v.list.push_back(unquote(item, line));
    }
  } else if (raw == "true" || raw == "false") {
    v.kind = ConfigValue::Kind::Bool;
    v.flag = raw == "true";
  } else {
    v.kind = ConfigValue::Kind::Number;
    const char* first = raw.data();
    const char* last = raw.data() + raw.size();
    auto [ptr, ec] = std::from_chars(first, last, v.number);
    if (ec != std::errc() || ptr != last || !std::isfinite(v.number)) {
      config_fail(line, "cannot parse value '" + raw + "'");
    }
  }
  return v;
}

// Binds every configurable setting to a name; used both for parsing and
// for the canonical dump so the two can never drift.
class Schema {
 public:
  explicit Schema(CampaignFile& c) {
    CampaignConfig& k = c.campaign;
    real("campaign.start_pressure", k.start_pressure);
    real("campaign.end_pressure", k.end_pressure);
    real("campaign.pressure_step", k.pressure_step);
    integer("campaign.consecutive_fail_stop", k.consecutive_fail_stop);
    real("campaign.observation_window", k.observation_window);
    integer("campaign.repeats_per_pressure", k.repeats_per_pressure);
    real("campaign.placement_jitter", k.placement_jitter);
    seed("campaign.seed_base", k.seed_base);

    RobotSpec& r = c.setup.robot;
    real("robot.total_mass", r.total_mass);
    real("robot.com_height_nominal", r.com_height_nominal);
    real("robot.flywheel_inertia", r.flywheel_inertia);
    real("robot.max_step_length", r.max_step_length);
    real("robot.ankle_torque_limit", r.ankle_torque_limit);
    real("robot.flywheel_torque_limit", r.flywheel_torque_limit);
    real("robot.dual_support_fraction", r.dual_support_fraction);
    real("robot.support_reach", r.support_reach);
    real("robot.swing_retarget_limit", r.swing_retarget_limit);
    real("robot.gravity", r.gravity);
    real("robot.touchdown_time_noise", r.touchdown_time_noise);
    real("robot.touchdown_place_noise", r.touchdown_place_noise);

    ImpactorSpec& m = c.setup.impactor;
    real("impactor.ram_mass", m.ram_mass);
    real("impactor.face_width", m.face_width);
    real("impactor.face_height_extent", m.face_height_extent);
    real("impactor.face_center_height", m.face_center_height);
    real("impactor.travel_length", m.travel_length);
    real("impactor.max_velocity", m.max_velocity);
    real("impactor.accel_stroke", m.accel_stroke);

    SimConfig& s = c.setup.sim;
    real("sim.dt", s.dt);
    real("sim.horizon", s.horizon);
    real("sim.foam_stiffness", s.foam_stiffness);
    real("sim.foam_damping", s.foam_damping);
    real("sim.foam_thickness", s.foam_thickness);
    real("sim.torso_half_depth", s.torso_half_depth);
    integer("sim.contact_substeps", s.contact_substeps);

    CalibrationMap& cal = c.setup.calibration;
    real("calibration.slope", cal.slope);
    real("calibration.intercept", cal.intercept);
    real("calibration.min_pressure", cal.min_pressure);
    real("calibration.max_pressure", cal.max_pressure);

    FalloverThresholds& f = c.setup.fallover;
    real("fallover.pitch_limit", f.pitch_limit);
    real("fallover.com_height_ratio", f.com_height_ratio);
    integer("fallover.capture_violation_steps", f.capture_violation_steps);

    real("test.settle_time", c.setup.settle_time);
    real("test.coast_distance", c.setup.coast_distance);
    real("test.home_x", c.setup.home_x);
  }

  bool set(const std::string& key, const ConfigValue& v, std::size_t line) {
    auto it = setters_.find(key);
    if (it == setters_.end()) return false;
    if (v.kind != ConfigValue::Kind::Number) config_fail(line, key + " expects a number");
    it->second(v.number, line);
    return true;
  }

  void dump(std::map<std::string, std::string>& out) const {
    for (const auto& [key, get] : getters_) out[key] = get();
  }

 private:
  void real(const std::string& key, double& ref) {
    setters_[key] = [&ref](double v, std::size_t) { ref = v; };
    getters_[key] = [&ref] { return num(ref); };
  }
  void integer(const std::string& key, int& ref) {
    setters_[key] = [&ref, key](double v, std::size_t line) {
      if (v != std::floor(v) || std::abs(v) > 1e9) config_fail(line, key + " expects an integer");
      ref = static_cast<int>(v);
    };
    getters_[key] = [&ref] { return std::to_string(ref); };
  }
  void seed(const std::string& key, std::uint64_t& ref) {
    setters_[key] = [&ref, key](double v, std::size_t line) {
      if (v != std::floor(v) || v < 0 || v > 9007199254740992.0) {
        config_fail(line, key + " expects a non-negative integer below 2^53");
      }
      ref = static_cast<std::uint64_t>(v);
    };
    getters_[key] = [&ref] { return std::to_string(ref); };
  }

  std::map<std::string, std::function<void(double, std::size_t)>> setters_;
  std::map<std::string, std::function<std::string()>> getters_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

CampaignFile parse_campaign_file(std::string_view text, const std::filesystem::path& base_dir) {
  CampaignFile cfg;
  Schema schema(cfg);
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  std::map<std::string, std::size_t> seen;
  bool calibration_keys = false;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') config_fail(line, "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) config_fail(line, "expected key = value");
    const std::string name = trim(s.substr(0, eq));
    const std::string key = section.empty() ? name : section + "." + name;
    const ConfigValue v = parse_value(trim(s.substr(eq + 1)), line);
    if (auto [it, fresh] = seen.emplace(key, line); !fresh) {
      config_fail(line, "duplicate key " + key + " (first set on line " +
                            std::to_string(it->second) + ")");
    }

    if (key == "name") {
      if (v.kind != ConfigValue::Kind::String) config_fail(line, "name expects a string");
      cfg.name = v.text;
    } else if (key == "controllers" || key == "controller") {
      std::vector<std::string> names;
      if (v.kind == ConfigValue::Kind::String) names = {v.text};
      else if (v.kind == ConfigValue::Kind::StringList) names = v.list;
      else config_fail(line, key + " expects a string or a list of strings");
      if (names.empty()) config_fail(line, key + " is empty");
      cfg.controllers.clear();
      for (const auto& n : names) {
        try {
          cfg.controllers.push_back(parse_controller_kind(n));
        } catch (const std::exception& e) {
          config_fail(line, e.what());
        }
      }
    } else if (key == "calibration_file") {
      if (v.kind != ConfigValue::Kind::String) config_fail(line, key + " expects a string");
      cfg.calibration_file = resolve(base_dir, v.text);
    } else if (key == "policy_table") {
      if (v.kind != ConfigValue::Kind::String) config_fail(line, key + " expects a string");
      cfg.policy_table = resolve(base_dir, v.text);
    } else if (key == "test.log_trajectory") {
      if (v.kind != ConfigValue::Kind::Bool) config_fail(line, key + " expects true or false");
      cfg.setup.log_trajectory = v.flag;
    } else if (schema.set(key, v, line)) {
      if (key.rfind("calibration.", 0) == 0) calibration_keys = true;
    } else {
      config_fail(line, "unknown key " + key);
    }
  }
  if (cfg.calibration_file && calibration_keys) {
    throw ConfigError("config: calibration_file and [calibration] keys are mutually exclusive");
  }
  if (cfg.calibration_file) {
    const auto samples = read_calibration_csv(*cfg.calibration_file);
    cfg.setup.calibration = fit_calibration(samples);
  }
  cfg.setup.fallover.window = cfg.campaign.observation_window;
  cfg.campaign.validate();
  cfg.setup.robot.validate();
  cfg.setup.impactor.validate();
  cfg.setup.sim.validate();
  cfg.setup.calibration.validate(cfg.setup.impactor);
  return cfg;
}

CampaignFile load_campaign_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  CampaignFile cfg = parse_campaign_file(ss.str(), path.parent_path());
  if (!ss.str().empty() && cfg.name == "campaign") cfg.name = path.stem().string();
  return cfg;
}

std::string canonical_config(const CampaignFile& cfg) {
  CampaignFile copy = cfg;
  std::map<std::string, std::string> kv;
  Schema(copy).dump(kv);
  kv["name"] = cfg.name;
  std::string kinds;
  for (auto k : cfg.controllers) kinds += (kinds.empty() ? "" : ",") + std::string(to_string(k));
  kv["controllers"] = kinds;
  kv["test.log_trajectory"] = cfg.setup.log_trajectory ? "true" : "false";
  kv["calibration.max_residual"] = num(cfg.setup.calibration.max_residual);
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::vector<CalibrationSample> read_calibration_csv(std::istream& in) {
  std::vector<CalibrationSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    if (s.rfind("pressure", 0) == 0) continue;  // header
    const auto comma = s.find(',');
    if (comma == std::string::npos) {
      throw SchemaMismatch("pressure_psi", line_no, "expected two comma-separated columns");
    }
    CalibrationSample c{};
    const std::string a = trim(s.substr(0, comma));
    const std::string b = trim(s.substr(comma + 1));
    auto parse = [&](const std::string& text, double& dst, const char* field) {
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), dst);
      if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(dst)) {
        throw SchemaMismatch(field, line_no, "cannot parse '" + text + "'");
      }
    };
    parse(a, c.pressure, "pressure_psi");
    parse(b, c.peak_velocity, "peak_velocity_mps");
    out.push_back(c);
  }
  return out;
}

std::vector<CalibrationSample> read_calibration_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open calibration file " + path.string());
  return read_calibration_csv(in);
}

std::filesystem::path default_policy_table_path() {
  if (const char* dir = std::getenv("LEGIMPACT_DATA_DIR"); dir != nullptr && *dir != '\0') {
    return std::filesystem::path(dir) / "tl_policy_v1.csv";
  }
  return std::filesystem::path(LEGIMPACT_DATA_DIR) / "tl_policy_v1.csv";
}

// ---- tables --------------------------------------------------------------

void write_summary_csv(std::ostream& out, std::span<const ControllerSummary> rows) {
  out << "controller,test_count,fall_count,invalid_count,max_recovered_momentum,"
         "min_fallen_momentum,boxer_flag\n";
  for (const auto& r : rows) {
    out << to_string(r.kind) << ',' << r.test_count << ',' << r.fall_count << ','
        << r.invalid_count << ',' << (r.max_recovered_momentum ? num(*r.max_recovered_momentum) : "")
        << ',' << (r.min_fallen_momentum ? num(*r.min_fallen_momentum) : "") << ','
        << (r.boxer_flag ? "true" : "false") << '\n';
  }
}

void write_scatter_csv(std::ostream& out, std::span<const ScatterPoint> points) {
  out << "velocity_mps,momentum_kgmps,stance,swing,fallover,controller\n";
  for (const auto& p : points) {
    out << num(p.impact_velocity) << ',' << num(p.impact_momentum) << ','
        << to_string(p.phase.stance) << ',' << to_string(p.phase.swing_dir) << ','
        << (p.fallover ? "true" : "false") << ',' << to_string(p.controller) << '\n';
  }
}

void write_profiles_csv(std::ostream& out, std::span<const VelocityProfile> profiles) {
  out << "controller,test_id,t_s,v_mps\n";
  for (const auto& p : profiles) {
    for (std::size_t i = 0; i < p.t.size(); ++i) {
      out << to_string(p.controller) << ',' << p.test_id << ',' << num(p.t[i]) << ','
          << num(p.v[i]) << '\n';
    }
  }
}

std::vector<VelocityProfile> read_profiles_csv(std::istream& in) {
  std::vector<VelocityProfile> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(line);
    if (s.empty() || s.rfind("controller,", 0) == 0) continue;
    std::vector<std::string> cols;
    std::stringstream ss(s);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(trim(c));
    if (cols.size() != 4) throw SchemaMismatch("<row>", line_no, "expected four columns");
    ControllerKind kind;
    try {
      kind = parse_controller_kind(cols[0]);
    } catch (const std::exception& e) {
      throw SchemaMismatch("controller", line_no, e.what());
    }
    double t = 0, v = 0;
    for (auto [text, dst, field] : {std::tuple{&cols[2], &t, "t_s"}, {&cols[3], &v, "v_mps"}}) {
      auto [ptr, ec] = std::from_chars(text->data(), text->data() + text->size(), *dst);
      if (ec != std::errc() || ptr != text->data() + text->size()) {
        throw SchemaMismatch(field, line_no, "cannot parse '" + *text + "'");
      }
    }
    if (out.empty() || out.back().test_id != cols[1] || out.back().controller != kind) {
      out.push_back({kind, cols[1], {}, {}});
    }
    out.back().t.push_back(t);
    out.back().v.push_back(v);
  }
  return out;
}

// ---- plots ---------------------------------------------------------------

namespace {

constexpr double kW = 720, kH = 420, kLeft = 70, kRight = 160, kTop = 30, kBottom = 50;

struct Axis {
  double lo, hi, px_lo, px_hi;
  double map(double v) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

std::string fmt(double v, int prec = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

std::string svg_open(const std::string& title) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << title
     << "</text>\n";
  return os.str();
}

void axes(std::ostringstream& os, const Axis& x, const Axis& y, const std::string& xlabel,
          const std::string& ylabel, int xprec, int yprec) {
  os << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n"
     << "<line x1=\"" << x.px_lo << "\" y1=\"" << y.px_lo << "\" x2=\"" << x.px_hi << "\" y2=\""
     << y.px_lo << "\"/>\n"
     << "<line x1=\"" << x.px_lo << "\" y1=\"" << y.px_lo << "\" x2=\"" << x.px_lo << "\" y2=\""
     << y.px_hi << "\"/>\n</g>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x.lo + (x.hi - x.lo) * i / 5.0;
    const double yv = y.lo + (y.hi - y.lo) * i / 5.0;
    os << "<text x=\"" << fmt(x.map(xv)) << "\" y=\"" << y.px_lo + 16
       << "\" text-anchor=\"middle\">" << fmt(xv, xprec) << "</text>\n";
    os << "<text x=\"" << x.px_lo - 6 << "\" y=\"" << fmt(y.map(yv) + 4)
       << "\" text-anchor=\"end\">" << fmt(yv, yprec) << "</text>\n";
  }
  os << "<text x=\"" << (x.px_lo + x.px_hi) / 2 << "\" y=\"" << kH - 10
     << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  os << "<text x=\"16\" y=\"" << (y.px_lo + y.px_hi) / 2
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << (y.px_lo + y.px_hi) / 2
     << ")\">" << ylabel << "</text>\n";
}

const char* phase_color(const GaitPhase& p) {
  if (p.stance == Stance::Dual) return "#7f7f7f";
  if (p.stance == Stance::Left) return p.swing_dir == SwingDir::Up ? "#1f77b4" : "#17becf";
  return p.swing_dir == SwingDir::Up ? "#d62728" : "#ff7f0e";
}

// Glyph centred on (cx, cy) with half-size r; shape encodes the controller.
std::string glyph(ControllerKind k, double cx, double cy, double r, const std::string& attrs) {
  std::ostringstream os;
  switch (k) {
    case ControllerKind::TMAnalog:
      os << "<circle cx=\"" << fmt(cx) << "\" cy=\"" << fmt(cy) << "\" r=\"" << fmt(r) << "\" "
         << attrs << "/>";
      break;
    case ControllerKind::TLAnalog:
      os << "<rect x=\"" << fmt(cx - r) << "\" y=\"" << fmt(cy - r) << "\" width=\"" << fmt(2 * r)
         << "\" height=\"" << fmt(2 * r) << "\" " << attrs << "/>";
      break;
    case ControllerKind::BBAnalog:
      os << "<polygon points=\"" << fmt(cx) << ',' << fmt(cy - r) << ' ' << fmt(cx + r) << ','
         << fmt(cy + r) << ' ' << fmt(cx - r) << ',' << fmt(cy + r) << "\" " << attrs << "/>";
      break;
    case ControllerKind::Passive:
      os << "<polygon points=\"" << fmt(cx) << ',' << fmt(cy - r) << ' ' << fmt(cx + r) << ','
         << fmt(cy) << ' ' << fmt(cx) << ',' << fmt(cy + r) << ' ' << fmt(cx - r) << ','
         << fmt(cy) << "\" " << attrs << "/>";
      break;
  }
  return os.str();
}

std::pair<double, double> padded(double lo, double hi) {
  if (!(hi > lo)) return {lo - 0.5, hi + 0.5};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

std::string scatter_svg(std::span<const TestRecord> records) {
  std::vector<ControllerKind> rows;
  double vmin = INFINITY, vmax = -INFINITY;
  for (const auto& r : records) {
    if (!r.valid) continue;
    if (std::find(rows.begin(), rows.end(), r.controller_kind) == rows.end()) {
      rows.push_back(r.controller_kind);
    }
    vmin = std::min(vmin, r.impact_velocity);
    vmax = std::max(vmax, r.impact_velocity);
  }
  std::sort(rows.begin(), rows.end());
  if (rows.empty()) vmin = 0, vmax = 1;
  const auto [xlo, xhi] = padded(vmin, vmax);
  const Axis x{xlo, xhi, kLeft, kW - kRight};
  const double row_h = (kH - kTop - kBottom) / static_cast<double>(std::max<std::size_t>(rows.size(), 1));

  std::ostringstream os;
  os << svg_open("Impact tests: size = fallover, color = phase, shape = controller");
  os << "<g class=\"axes\" stroke=\"black\" fill=\"none\"><line x1=\"" << kLeft << "\" y1=\""
     << kH - kBottom << "\" x2=\"" << kW - kRight << "\" y2=\"" << kH - kBottom << "\"/></g>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = xlo + (xhi - xlo) * i / 5.0;
    os << "<text x=\"" << fmt(x.map(xv)) << "\" y=\"" << kH - kBottom + 16
       << "\" text-anchor=\"middle\">" << fmt(xv, 2) << "</text>\n";
  }
  os << "<text x=\"" << (kLeft + kW - kRight) / 2 << "\" y=\"" << kH - 10
     << "\" text-anchor=\"middle\">impact velocity (m/s)</text>\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << "<text x=\"" << kLeft - 8 << "\" y=\"" << fmt(kTop + row_h * (i + 0.5) + 4)
       << "\" text-anchor=\"end\">" << to_string(rows[i]) << "</text>\n";
  }

  // Offsets inside a row keep equal velocities from hiding each other.
  std::map<ControllerKind, int> seen;
  for (const auto& r : records) {
    if (!r.valid) continue;
    const auto row = static_cast<std::size_t>(
        std::find(rows.begin(), rows.end(), r.controller_kind) - rows.begin());
    const int k = seen[r.controller_kind]++;
    const double cy = kTop + row_h * (row + 0.5) + ((k % 5) - 2) * row_h * 0.12;
    const double size = r.fallover ? 9.0 : 5.0;
    const std::string phase = r.phase_at_impact.label();
    const std::string attrs =
        "class=\"marker " + std::string(r.fallover ? "size-fall" : "size-recover") + " shape-" +
        std::string(to_string(r.controller_kind)) + " phase-" + phase + "\" fill=\"" +
        phase_color(r.phase_at_impact) + "\" fill-opacity=\"0.8\" stroke=\"black\" data-test-id=\"" +
        r.test_id + "\"";
    os << glyph(r.controller_kind, x.map(r.impact_velocity), cy, size, attrs) << '\n';
  }

  // Legend.
  double ly = kTop + 10;
  const double lx = kW - kRight + 20;
  for (const char* label : {"Left_Up", "Left_Down", "Right_Up", "Right_Down", "Dual_None"}) {
    const GaitPhase p = *GaitPhase::parse(label);
    os << "<rect class=\"legend\" x=\"" << lx << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\""
       << phase_color(p) << "\"/><text x=\"" << lx + 16 << "\" y=\"" << ly << "\">" << label
       << "</text>\n";
    ly += 16;
  }
  ly += 8;
  os << "<text x=\"" << lx << "\" y=\"" << ly << "\">large = fell</text>\n";
  os << "<text x=\"" << lx << "\" y=\"" << ly + 16 << "\">small = recovered</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::string profiles_svg(std::span<const VelocityProfile> profiles, double window) {
  double vmin = 0, vmax = 0;
  for (const auto& p : profiles) {
    for (double v : p.v) {
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  }
  const auto [ylo, yhi] = padded(vmin, vmax);
  const Axis x{0.0, window, kLeft, kW - kRight};
  const Axis y{ylo, yhi, kH - kBottom, kTop};
  std::ostringstream os;
  os << svg_open("Ram velocity after impact");
  axes(os, x, y, "time since impact (s)", "ram velocity (m/s)", 3, 2);
  os << "<line class=\"zero\" x1=\"" << x.px_lo << "\" y1=\"" << fmt(y.map(0)) << "\" x2=\""
     << x.px_hi << "\" y2=\"" << fmt(y.map(0)) << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>\n";
  static const std::map<ControllerKind, const char*> colors = {
      {ControllerKind::TMAnalog, "#1f77b4"},
      {ControllerKind::TLAnalog, "#2ca02c"},
      {ControllerKind::BBAnalog, "#d62728"},
      {ControllerKind::Passive, "#7f7f7f"}};
  for (const auto& p : profiles) {
    double tmax = 0;
    os << "<polyline class=\"profile\" data-controller=\"" << to_string(p.controller)
       << "\" data-test-id=\"" << p.test_id << "\" fill=\"none\" stroke=\"" << colors.at(p.controller)
       << "\" stroke-opacity=\"0.7\" points=\"";
    for (std::size_t i = 0; i < p.t.size(); ++i) {
      if (p.t[i] > window + 1e-12) break;
      tmax = p.t[i];
      os << (i ? " " : "") << fmt(x.map(p.t[i])) << ',' << fmt(y.map(p.v[i]));
    }
    os << "\" data-t-max=\"" << num(tmax) << "\"/>\n";
  }
  double ly = kTop + 10;
  for (const auto& [kind, color] : colors) {
    os << "<rect class=\"legend\" x=\"" << kW - kRight + 20 << "\" y=\"" << ly - 8
       << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/><text x=\"" << kW - kRight + 36
       << "\" y=\"" << ly << "\">" << to_string(kind) << "</text>\n";
    ly += 16;
  }
  os << "</svg>\n";
  return os.str();
}

std::string calibration_svg(std::span<const CalibrationSample> samples, const CalibrationMap& map) {
  double pmin = map.min_pressure, pmax = map.max_pressure;
  double vmin = INFINITY, vmax = -INFINITY;
  for (const auto& s : samples) {
    pmin = std::min(pmin, s.pressure);
    pmax = std::max(pmax, s.pressure);
  }
  for (double p : {pmin, pmax}) {
    vmin = std::min(vmin, map.slope * p + map.intercept);
    vmax = std::max(vmax, map.slope * p + map.intercept);
  }
  for (const auto& s : samples) {
    vmin = std::min(vmin, s.peak_velocity);
    vmax = std::max(vmax, s.peak_velocity);
  }
  const auto [xlo, xhi] = padded(pmin, pmax);
  const auto [ylo, yhi] = padded(vmin, vmax);
  const Axis x{xlo, xhi, kLeft, kW - kRight};
  const Axis y{ylo, yhi, kH - kBottom, kTop};
  std::ostringstream os;
  os << svg_open("Peak velocity vs pressure: v = " + fmt(map.slope, 4) + " p + " +
                 fmt(map.intercept, 3) + ", max residual " + fmt(map.max_residual, 3) + " m/s");
  axes(os, x, y, "pressure (PSI)", "peak velocity (m/s)", 0, 2);
  os << "<line class=\"fit\" x1=\"" << fmt(x.map(pmin)) << "\" y1=\""
     << fmt(y.map(map.slope * pmin + map.intercept)) << "\" x2=\"" << fmt(x.map(pmax))
     << "\" y2=\"" << fmt(y.map(map.slope * pmax + map.intercept))
     << "\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
  for (const auto& s : samples) {
    os << "<circle class=\"sample\" cx=\"" << fmt(x.map(s.pressure)) << "\" cy=\""
       << fmt(y.map(s.peak_velocity)) << "\" r=\"4\" fill=\"#d62728\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// ---- manifest ------------------------------------------------------------

RunManifest make_manifest(const CampaignFile& cfg, std::vector<std::string> output_paths) {
  RunManifest m;
  m.tool_version = std::string(tool_version());
  m.effective_config = canonical_config(cfg);
  m.config_hash = hex64(fnv1a64(m.effective_config));
  m.calibration_hash = hex64(fnv1a64(calibration_json(cfg.setup.calibration).dump()));
  m.seed_base = cfg.campaign.seed_base;
  m.output_paths = std::move(output_paths);
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  m.created_at = buf;
  return m;
}

std::string manifest_json(const RunManifest& m) {
  ojson j;
  j["tool_version"] = m.tool_version;
  j["config_hash"] = m.config_hash;
  j["calibration_hash"] = m.calibration_hash;
  j["seed_base"] = m.seed_base;
  j["output_paths"] = m.output_paths;
  j["created_at"] = m.created_at;
  j["effective_config"] = m.effective_config;
  return j.dump(2) + "\n";
}

}  // namespace legimpact
