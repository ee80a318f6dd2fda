#include "legimpact/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "legimpact/errors.hpp"

namespace legimpact {

namespace {

struct Welford {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }

  GapSummary summary() const {
    GapSummary s;
    s.count = n;
    s.mean = mean;
    s.std_defined = n > 1;
    s.std = n > 1 ? std::sqrt(std::max(0.0, m2 / static_cast<double>(n - 1))) : 0.0;
    return s;
  }
};

}  // namespace

GapStatistics gap_statistics(std::span<const TestRecord> records) {
  Welford all;
  std::map<ControllerKind, Welford> per;
  for (const auto& r : records) {
    if (!r.valid) continue;
    all.push(r.peak_to_impact_gap);
    per[r.controller_kind].push(r.peak_to_impact_gap);
  }
  if (all.n == 0) throw EmptyInput("gap_statistics: no valid records");
  const GapSummary s = all.summary();
  GapStatistics g;
  g.mean = s.mean;
  g.std = s.std;
  g.count = s.count;
  g.std_defined = s.std_defined;
  for (const auto& [kind, w] : per) g.per_controller.emplace(kind, w.summary());
  return g;
}

ControllerSummary summarize_records(ControllerKind kind, std::span<const TestRecord> records) {
  ControllerSummary s;
  s.kind = kind;
  for (const auto& r : records) {
    if (r.controller_kind != kind) continue;
    if (!r.valid) {
      ++s.invalid_count;
      continue;
    }
    ++s.test_count;
    if (r.fallover) {
      ++s.fall_count;
      if (!s.min_fallen_momentum || r.impact_momentum < *s.min_fallen_momentum) {
        s.min_fallen_momentum = r.impact_momentum;
      }
    } else if (!s.max_recovered_momentum || r.impact_momentum > *s.max_recovered_momentum) {
      s.max_recovered_momentum = r.impact_momentum;
    }
  }
  s.boxer_flag = s.max_recovered_momentum && *s.max_recovered_momentum >= kBoxerPunchMomentum;
  return s;
}

std::vector<ControllerSummary> summarize(std::span<const CampaignRecord> campaigns) {
  if (campaigns.empty()) throw EmptyInput("summarize: no campaigns");
  std::map<ControllerKind, std::vector<TestRecord>> by_kind;
  for (const auto& c : campaigns) {
    auto& bucket = by_kind[c.controller_kind];
    bucket.insert(bucket.end(), c.tests.begin(), c.tests.end());
  }
  std::vector<ControllerSummary> out;
  for (const auto& [kind, recs] : by_kind) out.push_back(summarize_records(kind, recs));
  return out;
}

std::vector<ScatterPoint> scatter_dataset(std::span<const TestRecord> records) {
  std::vector<ScatterPoint> out;
  for (const auto& r : records) {
    if (!r.valid) continue;
    out.push_back({r.impact_velocity, r.impact_momentum, r.phase_at_impact, r.fallover,
                   r.controller_kind});
  }
  return out;
}

std::vector<AntiMonotonePair> find_anti_monotone_pairs(std::span<const TestRecord> records) {
  std::vector<std::size_t> falls;
  std::vector<std::size_t> recoveries;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].valid) continue;
    (records[i].fallover ? falls : recoveries).push_back(i);
  }
  std::vector<AntiMonotonePair> out;
  for (std::size_t lo : falls) {
    for (std::size_t hi : recoveries) {
      const TestRecord& a = records[lo];
      const TestRecord& b = records[hi];
      if (a.controller_kind != b.controller_kind) continue;
      if (!(a.impact_momentum < b.impact_momentum)) continue;
      out.push_back({lo, hi, a, b, b.impact_momentum - a.impact_momentum});
    }
  }
  std::sort(out.begin(), out.end(), [](const AntiMonotonePair& x, const AntiMonotonePair& y) {
    if (x.momentum_gap != y.momentum_gap) return x.momentum_gap < y.momentum_gap;
    if (x.low_index != y.low_index) return x.low_index < y.low_index;
    return x.high_index < y.high_index;
  });
  return out;
}

std::vector<VelocityProfile> velocity_profiles(std::span<const VelocityTrace> traces,
                                               double window, double rate_hz) {
  if (!(window > 0) || !(rate_hz > 0)) throw std::invalid_argument("velocity_profiles: bad grid");
  const auto n = static_cast<std::size_t>(std::llround(window * rate_hz)) + 1;
  std::vector<VelocityProfile> out;
  out.reserve(traces.size());
  for (const auto& tr : traces) {
    const ImpactEvent ev = detect_impact(tr.samples);
    const auto& s = tr.samples;
    if (s.back().time < ev.impact_time + window - 1e-12) {
      throw WindowTooShort("velocity_profiles: log of " + tr.test_id +
                           " ends before the profile window");
    }
    VelocityProfile p{tr.controller, tr.test_id, {}, {}};
    p.t.reserve(n);
    p.v.reserve(n);
    std::size_t j = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double tk = std::min(window, static_cast<double>(k) / rate_hz);
      const double t_abs = ev.impact_time + tk;
      while (j + 1 < s.size() && s[j + 1].time < t_abs) ++j;
      double v = s[j].velocity;
      if (j + 1 < s.size() && s[j].time <= t_abs) {
        const double span = s[j + 1].time - s[j].time;
        const double w = span > 0 ? (t_abs - s[j].time) / span : 0.0;
        v = s[j].velocity + w * (s[j + 1].velocity - s[j].velocity);
      }
      p.t.push_back(tk);
      p.v.push_back(v);
    }
    out.push_back(std::move(p));
  }
  std::stable_sort(out.begin(), out.end(), [](const VelocityProfile& a, const VelocityProfile& b) {
    return a.controller < b.controller;
  });
  return out;
}

double sign_test_p_value(std::size_t wins, std::size_t losses) {
  const std::size_t n = wins + losses;
  if (n == 0) return 1.0;
  // Sum of C(n, k) / 2^n for k >= wins, in log space to stay finite.
  double p = 0.0;
  for (std::size_t k = wins; k <= n; ++k) {
    const double lc = std::lgamma(static_cast<double>(n) + 1) -
                      std::lgamma(static_cast<double>(k) + 1) -
                      std::lgamma(static_cast<double>(n - k) + 1);
    p += std::exp(lc - static_cast<double>(n) * std::log(2.0));
  }
  return std::min(1.0, p);
}

}  // namespace legimpact
