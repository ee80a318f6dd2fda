#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "legimpact/analysis.hpp"
#include "legimpact/protocol.hpp"

namespace legimpact {

std::string_view tool_version();

// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// ---- records -------------------------------------------------------------

// One JSON object, no trailing newline. Field order is fixed.
std::string record_to_json(const TestRecord& r);
TestRecord record_from_json(std::string_view line, std::size_t line_no,
                            std::vector<std::string>* warnings = nullptr);

std::string campaign_summary_json(const CampaignRecord& c);

// Records one per line, then the campaign-summary object.
void write_campaign(std::ostream& out, const CampaignRecord& c);
void write_campaign(const std::filesystem::path& path, const CampaignRecord& c);

struct RecordFile {
  std::vector<TestRecord> records;
  std::optional<CampaignRecord> campaign;  // present when a summary line was read
  std::vector<std::string> warnings;
};

// Unknown fields are accepted and reported in `warnings`; missing or
// mistyped fields raise SchemaMismatch with the 1-based line.
RecordFile read_records(std::istream& in);
RecordFile read_records(const std::filesystem::path& path);

// ---- configuration -------------------------------------------------------

struct CampaignFile {
  std::string name = "campaign";
  std::vector<ControllerKind> controllers{ControllerKind::TMAnalog};
  CampaignConfig campaign;
  TestSetup setup;
  std::optional<std::filesystem::path> calibration_file;
  std::optional<std::filesystem::path> policy_table;
};

// Key/value text with optional [section] headers, '#' comments, quoted
// strings and string arrays. Unknown keys and bad values raise ConfigError
// naming the line.
CampaignFile parse_campaign_file(std::string_view text, const std::filesystem::path& base_dir = {});
CampaignFile load_campaign_file(const std::filesystem::path& path);

// Every effective setting as sorted `section.key = value` lines; the
// config hash is computed over these bytes.
std::string canonical_config(const CampaignFile& cfg);

std::vector<CalibrationSample> read_calibration_csv(const std::filesystem::path& path);
std::vector<CalibrationSample> read_calibration_csv(std::istream& in);

std::filesystem::path default_policy_table_path();

// ---- tables --------------------------------------------------------------

void write_summary_csv(std::ostream& out, std::span<const ControllerSummary> rows);
void write_scatter_csv(std::ostream& out, std::span<const ScatterPoint> points);
void write_profiles_csv(std::ostream& out, std::span<const VelocityProfile> profiles);
std::vector<VelocityProfile> read_profiles_csv(std::istream& in);

// ---- plots ---------------------------------------------------------------

// Marker classes: `marker`, `size-fall` / `size-recover`, `shape-<kind>`,
// `phase-<label>`. One marker per valid record.
std::string scatter_svg(std::span<const TestRecord> records);
std::string profiles_svg(std::span<const VelocityProfile> profiles, double window = 0.05);
std::string calibration_svg(std::span<const CalibrationSample> samples, const CalibrationMap& map);

// ---- manifest ------------------------------------------------------------

struct RunManifest {
  std::string tool_version;
  std::string config_hash;
  std::string calibration_hash;
  std::uint64_t seed_base = 0;
  std::vector<std::string> output_paths;
  std::string created_at;  // excluded from every hash
  std::string effective_config;
};

RunManifest make_manifest(const CampaignFile& cfg, std::vector<std::string> output_paths);
std::string manifest_json(const RunManifest& m);

}  // namespace legimpact
