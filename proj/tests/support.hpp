#pragma once

#include <cmath>
#include <vector>

#include "legimpact/controllers.hpp"
#include "legimpact/io.hpp"
#include "legimpact/protocol.hpp"
#include "legimpact/sim_core.hpp"

namespace legimpact::fixtures {

inline const PolicyTable& shipped_table() {
  static const PolicyTable t = PolicyTable::load(default_policy_table_path());
  return t;
}

// Closed-loop run of a controller without any impactor in range.
inline std::vector<RobotState> walk(ControllerHandle c, RobotState s0, double seconds,
                                    std::uint64_t seed = 1) {
  RobotSpec spec = c.adapt(RobotSpec{});
  SimConfig cfg;
  WorldState w = make_world(s0, make_charged_ram(-5.0), seed);
  std::vector<RobotState> out;
  const auto ticks = static_cast<long>(std::llround(seconds / cfg.dt));
  out.reserve(static_cast<std::size_t>(ticks));
  for (long i = 0; i < ticks; ++i) {
    w = advance(w, cfg, c, spec, ImpactorSpec{});
    out.push_back(w.robot);
  }
  return out;
}

}  // namespace legimpact::fixtures
