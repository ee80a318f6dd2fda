#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "legimpact/protocol.hpp"

namespace legimpact {

struct GapSummary {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) convention; 0 when count == 1
  std::size_t count = 0;
  bool std_defined = false;
};

struct GapStatistics {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
  bool std_defined = false;
  std::map<ControllerKind, GapSummary> per_controller;
};

// Peak-to-impact gap statistics over valid records. Throws EmptyInput when
// no valid record is present.
GapStatistics gap_statistics(std::span<const TestRecord> records);

// Average effective momentum of an Olympic boxer's straight punch, kg m/s.
inline constexpr double kBoxerPunchMomentum = 26.506;

struct ControllerSummary {
  ControllerKind kind = ControllerKind::TMAnalog;
  std::optional<double> max_recovered_momentum;
  std::optional<double> min_fallen_momentum;
  std::size_t test_count = 0;  // valid tests
  std::size_t fall_count = 0;
  std::size_t invalid_count = 0;
  bool boxer_flag = false;
};

std::vector<ControllerSummary> summarize(std::span<const CampaignRecord> campaigns);
ControllerSummary summarize_records(ControllerKind kind, std::span<const TestRecord> records);

struct ScatterPoint {
  double impact_velocity;
  double impact_momentum;
  GaitPhase phase;
  bool fallover;
  ControllerKind controller;
};

std::vector<ScatterPoint> scatter_dataset(std::span<const TestRecord> records);

// A fall at lower impact momentum paired with a recovery at strictly higher
// momentum, same controller. Indices refer to the input span.
struct AntiMonotonePair {
  std::size_t low_index;
  std::size_t high_index;
  TestRecord low;
  TestRecord high;
  double momentum_gap;
};

// Sorted by (momentum_gap, low_index, high_index).
std::vector<AntiMonotonePair> find_anti_monotone_pairs(std::span<const TestRecord> records);

struct VelocityTrace {
  ControllerKind controller;
  std::string test_id;
  std::vector<RamSample> samples;
};

struct VelocityProfile {
  ControllerKind controller;
  std::string test_id;
  std::vector<double> t;  // seconds since impact
  std::vector<double> v;
};

// Ram velocity after impact resampled by linear interpolation onto
// [0, window] at `rate_hz`, grouped by controller (stable within a group).
std::vector<VelocityProfile> velocity_profiles(std::span<const VelocityTrace> traces,
                                               double window = 0.05, double rate_hz = 1000.0);

// One-sided exact sign test: probability of at least `wins` successes out
// of `wins + losses` fair coin flips.
double sign_test_p_value(std::size_t wins, std::size_t losses);

}  // namespace legimpact
