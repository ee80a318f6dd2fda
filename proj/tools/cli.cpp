#include "cli.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "legimpact/analysis.hpp"
#include "legimpact/errors.hpp"
#include "legimpact/io.hpp"
#include "legimpact/protocol.hpp"

namespace legimpact {

namespace fs = std::filesystem;

namespace {

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("LEGIMPACT_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return ".";
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("write failed: " + path.string());
}

template <typename F>
std::string render(F&& f) {
  std::ostringstream os;
  f(os);
  return os.str();
}

std::optional<PolicyTable> load_table_if_needed(const std::vector<ControllerKind>& kinds,
                                                const std::optional<fs::path>& path) {
  for (auto k : kinds) {
    if (k == ControllerKind::TLAnalog) return PolicyTable::load(path ? *path : default_policy_table_path());
  }
  return std::nullopt;
}

std::vector<VelocityProfile> profiles_of(const CampaignResult& result) {
  std::vector<VelocityTrace> traces;
  for (const auto& o : result.outcomes) {
    if (!o.record.valid) continue;
    traces.push_back({o.record.controller_kind, o.record.test_id, o.ram_trace});
  }
  return velocity_profiles(traces);
}

std::string version_text() {
  const CalibrationMap c = CalibrationMap::defaults();
  std::ostringstream os;
  os << "legimpact " << tool_version() << "\n"
     << "default calibration: v = " << c.slope << " * p + " << c.intercept << " (m/s, PSI), valid "
     << c.min_pressure << ".." << c.max_pressure << " PSI\n";
  return os.str();
}

struct CampaignJob {
  std::size_t config_index;
  ControllerKind kind;
};

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Desk-scale impact-test harness for legged-robot disturbance rejection", "legimpact"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "Print tool version and calibration defaults");
  std::string out_dir_flag;
  app.add_option("--out-dir", out_dir_flag,
                 "Output directory (default: $LEGIMPACT_OUT_DIR, else the working directory)");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Fit the pressure to peak-velocity map");
  std::string calib_input;
  calibrate->add_option("samples", calib_input, "CSV of pressure_psi,peak_velocity_mps")->required();

  // run-test
  auto* run_test_cmd = app.add_subcommand("run-test", "Run one impact test and print its record");
  std::string controller_name;
  double pressure = 0;
  unsigned long long seed = 0;
  double placement = 0;
  std::optional<double> phase;
  std::string policy_table_flag;
  std::string trajectory_out;
  run_test_cmd->add_option("--controller", controller_name, "TM, TL, BB or Passive")
      ->required()
      ->check(CLI::IsMember({"TM", "TL", "BB", "Passive", "TMAnalog", "TLAnalog", "BBAnalog"}));
  run_test_cmd->add_option("--pressure", pressure, "Tank pressure in PSI")->required();
  run_test_cmd->add_option("--seed", seed, "Test seed")->required();
  run_test_cmd->add_option("--placement", placement, "Placement offset in meters")
      ->check(CLI::Range(-0.05, 0.05));
  run_test_cmd->add_option("--phase", phase, "Force the initial gait phase fraction")
      ->check(CLI::Range(0.0, 1.0));
  run_test_cmd->add_option("--policy-table", policy_table_flag, "TL policy table CSV");
  run_test_cmd->add_option("--trajectory", trajectory_out, "Write the per-tick log to this CSV");

  // run-campaign
  auto* campaign_cmd = app.add_subcommand("run-campaign", "Run pressure-escalation campaigns");
  std::vector<std::string> config_paths;
  unsigned jobs = 1;
  campaign_cmd->add_option("--config", config_paths, "Campaign config file (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  campaign_cmd->add_option("--jobs", jobs, "Campaigns run concurrently")->check(CLI::Range(1u, 256u));

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "Summaries, gap statistics and anomalies");
  std::vector<std::string> analyze_inputs;
  analyze_cmd->add_option("records", analyze_inputs, "Campaign JSONL files")
      ->required()
      ->check(CLI::ExistingFile);

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "Emit an SVG figure");
  std::string plot_kind;
  std::vector<std::string> plot_inputs;
  std::string plot_out;
  plot_cmd->add_option("--kind", plot_kind, "scatter, profiles or calibration")
      ->required()
      ->check(CLI::IsMember({"scatter", "profiles", "calibration"}));
  plot_cmd->add_option("input", plot_inputs,
                       "scatter: JSONL files; profiles: profiles CSV; calibration: samples CSV")
      ->required()
      ->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", plot_out, "SVG path (default: derived from the input name)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  }

  if (show_version) {
    out << version_text();
    return 0;
  }
  if (app.get_subcommands().empty()) {
    err << "usage error: a subcommand is required\n" << app.help();
    return 1;
  }

  const fs::path out_dir = output_dir(out_dir_flag);

  try {
    if (*calibrate) {
      const auto samples = read_calibration_csv(calib_input);
      const CalibrationMap map = fit_calibration(samples);
      err << "slope " << map.slope << " (m/s)/PSI\nintercept " << map.intercept
          << " m/s\nmax residual " << map.max_residual << " m/s\nrange " << map.min_pressure
          << ".." << map.max_pressure << " PSI\n";
      const fs::path path = out_dir / (fs::path(calib_input).stem().string() + "_calibration.json");
      nlohmann::ordered_json j{{"slope", map.slope},
                               {"intercept", map.intercept},
                               {"min_pressure", map.min_pressure},
                               {"max_pressure", map.max_pressure},
                               {"max_residual", map.max_residual},
                               {"samples", samples.size()}};
      write_file(path, j.dump(2) + "\n");
      out << path.string() << "\n";
      return 0;
    }

    if (*run_test_cmd) {
      const ControllerKind kind = parse_controller_kind(controller_name);
      std::optional<fs::path> table_path;
      if (!policy_table_flag.empty()) table_path = policy_table_flag;
      const auto table = load_table_if_needed({kind}, table_path);
      TestSetup setup;
      setup.log_trajectory = !trajectory_out.empty();
      OperatorAction action;
      action.pressure = pressure;
      action.seed = seed;
      action.placement_offset = placement;
      TestOutcome o = run_test(ControllerHandle::make(kind, table ? &*table : nullptr), action,
                               setup, phase);
      o.record.test_id = make_test_id(kind, pressure, 0);
      if (!trajectory_out.empty()) {
        o.record.trajectory_ref = trajectory_out;
        write_file(trajectory_out, render([&](std::ostream& os) {
                     write_trajectory_csv(os, o.trajectory);
                   }));
        out << trajectory_out << "\n";
      }
      out << record_to_json(o.record) << "\n";
      return 0;
    }

    if (*campaign_cmd) {
      std::vector<CampaignFile> configs;
      for (const auto& p : config_paths) configs.push_back(load_campaign_file(p));
      std::vector<std::optional<PolicyTable>> tables;
      std::vector<CampaignJob> work;
      for (std::size_t i = 0; i < configs.size(); ++i) {
        tables.push_back(load_table_if_needed(configs[i].controllers, configs[i].policy_table));
        for (auto k : configs[i].controllers) work.push_back({i, k});
      }

      // Each job owns its output files; nothing is shared between workers.
      std::vector<std::vector<std::string>> produced(work.size());
      std::vector<std::exception_ptr> failures(work.size());
      std::atomic<std::size_t> next{0};
      auto worker = [&] {
        for (std::size_t j = next++; j < work.size(); j = next++) {
          try {
            const CampaignFile& cfg = configs[work[j].config_index];
            const auto& table = tables[work[j].config_index];
            const CampaignResult result = run_campaign(work[j].kind, cfg.campaign, cfg.setup,
                                                       table ? &*table : nullptr);
            const std::string stem = cfg.name + "_" + std::string(to_string(work[j].kind));
            const fs::path records = out_dir / (stem + ".jsonl");
            const fs::path profiles = out_dir / (stem + "_profiles.csv");
            write_file(records, render([&](std::ostream& os) { write_campaign(os, result.record); }));
            const auto curves = profiles_of(result);
            write_file(profiles, render([&](std::ostream& os) { write_profiles_csv(os, curves); }));
            produced[j] = {records.string(), profiles.string()};
          } catch (...) {
            failures[j] = std::current_exception();
          }
        }
      };
      std::vector<std::thread> pool;
      const unsigned n = std::min<unsigned>(jobs, static_cast<unsigned>(work.size()));
      for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
      worker();
      for (auto& t : pool) t.join();
      for (auto& f : failures) {
        if (f) std::rethrow_exception(f);
      }

      for (std::size_t i = 0; i < configs.size(); ++i) {
        std::vector<std::string> paths;
        for (std::size_t j = 0; j < work.size(); ++j) {
          if (work[j].config_index != i) continue;
          for (const auto& p : produced[j]) {
            paths.push_back(p);
            out << p << "\n";
          }
        }
        const fs::path manifest = out_dir / (configs[i].name + "_manifest.json");
        write_file(manifest, manifest_json(make_manifest(configs[i], paths)));
        out << manifest.string() << "\n";
      }
      return 0;
    }

    if (*analyze_cmd) {
      std::vector<TestRecord> records;
      std::vector<CampaignRecord> campaigns;
      for (const auto& p : analyze_inputs) {
        RecordFile f = read_records(fs::path(p));
        for (const auto& w : f.warnings) err << p << ": warning: " << w << "\n";
        records.insert(records.end(), f.records.begin(), f.records.end());
        if (f.campaign) {
          campaigns.push_back(std::move(*f.campaign));
        } else {
          // Bare record files: group by controller into ad hoc campaigns.
          for (const auto& r : f.records) {
            auto it = std::find_if(campaigns.begin(), campaigns.end(), [&](const CampaignRecord& c) {
              return c.controller_kind == r.controller_kind && c.config.seed_base == 0;
            });
            if (it == campaigns.end()) {
              CampaignRecord c;
              c.controller_kind = r.controller_kind;
              c.config.seed_base = 0;
              campaigns.push_back(c);
              it = std::prev(campaigns.end());
            }
            it->tests.push_back(r);
          }
        }
      }
      const std::string stem = fs::path(analyze_inputs.front()).stem().string();
      const auto summary = summarize(campaigns);
      const auto scatter = scatter_dataset(records);
      const auto pairs = find_anti_monotone_pairs(records);

      nlohmann::ordered_json report;
      try {
        const GapStatistics g = gap_statistics(records);
        nlohmann::ordered_json per = nlohmann::ordered_json::object();
        for (const auto& [k, s] : g.per_controller) {
          per[std::string(to_string(k))] = {{"mean", s.mean}, {"std", s.std}, {"count", s.count}};
        }
        report["gap_statistics"] = {
            {"mean", g.mean}, {"std", g.std}, {"count", g.count}, {"per_controller", per}};
      } catch (const EmptyInput&) {
        report["gap_statistics"] = nullptr;
      }
      report["anti_monotone_pairs"] = nlohmann::ordered_json::array();
      for (const auto& p : pairs) {
        report["anti_monotone_pairs"].push_back({{"controller", std::string(to_string(p.low.controller_kind))},
                                                 {"fell", p.low.test_id},
                                                 {"fell_momentum", p.low.impact_momentum},
                                                 {"recovered", p.high.test_id},
                                                 {"recovered_momentum", p.high.impact_momentum},
                                                 {"momentum_gap", p.momentum_gap}});
      }

      const fs::path summary_path = out_dir / (stem + "_summary.csv");
      const fs::path scatter_path = out_dir / (stem + "_scatter.csv");
      const fs::path report_path = out_dir / (stem + "_analysis.json");
      write_file(summary_path, render([&](std::ostream& os) { write_summary_csv(os, summary); }));
      write_file(scatter_path, render([&](std::ostream& os) { write_scatter_csv(os, scatter); }));
      write_file(report_path, report.dump(2) + "\n");
      for (const auto& s : summary) {
        err << to_string(s.kind) << ": " << s.test_count << " tests, " << s.fall_count
            << " falls, max recovered momentum "
            << (s.max_recovered_momentum ? std::to_string(*s.max_recovered_momentum) : "n/a")
            << (s.boxer_flag ? " (at or above boxer punch)" : "") << "\n";
      }
      err << pairs.size() << " anti-monotone pair(s)\n";
      out << summary_path.string() << "\n" << scatter_path.string() << "\n" << report_path.string() << "\n";
      return 0;
    }

    if (*plot_cmd) {
      const std::string stem = fs::path(plot_inputs.front()).stem().string();
      const fs::path path = plot_out.empty() ? out_dir / (stem + "_" + plot_kind + ".svg") : fs::path(plot_out);
      if (plot_kind == "scatter") {
        std::vector<TestRecord> records;
        for (const auto& p : plot_inputs) {
          RecordFile f = read_records(fs::path(p));
          for (const auto& w : f.warnings) err << p << ": warning: " << w << "\n";
          records.insert(records.end(), f.records.begin(), f.records.end());
        }
        write_file(path, scatter_svg(records));
      } else if (plot_kind == "profiles") {
        std::vector<VelocityProfile> profiles;
        for (const auto& p : plot_inputs) {
          std::ifstream in(p);
          auto part = read_profiles_csv(in);
          profiles.insert(profiles.end(), part.begin(), part.end());
        }
        write_file(path, profiles_svg(profiles));
      } else {
        if (plot_inputs.size() != 1) {
          err << "usage error: plot --kind calibration takes exactly one input\n";
          return 1;
        }
        const auto samples = read_calibration_csv(plot_inputs.front());
        write_file(path, calibration_svg(samples, fit_calibration(samples)));
      }
      out << path.string() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace legimpact
