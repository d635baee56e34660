#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "joinsample/oracle.hpp"
#include "joinsample/stats.hpp"
#include "joinsample/table.hpp"

namespace testsupport {

namespace js = joinsample;

inline bool rel_close(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

inline js::Table table_of(const std::vector<std::string>& keys, const std::vector<double>& w = {}) {
  js::Table t;
  t.columns = w.empty() ? std::vector<std::string>{"J"} : std::vector<std::string>{"J", "W"};
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (w.empty()) {
      t.rows.push_back({keys[i]});
    } else {
      std::ostringstream s;
      s.precision(17);
      s << w[i];
      t.rows.push_back({keys[i], s.str()});
    }
  }
  return t;
}

inline js::JoinKeyHistogram hist_of(const std::map<std::string, std::int64_t>& m) {
  return js::JoinKeyHistogram::from_counts(m);
}

// Exact join sums of a tiny instance (W = 1 when absent).
inline js::JoinSums sums_of(const js::oracle::TinyInstance& inst) {
  std::vector<double> w = inst.w1;
  if (w.empty()) w.assign(inst.keys1.size(), 1.0);
  const auto t1 = table_of(inst.keys1, w);
  const auto t2 = table_of(inst.keys2);
  return js::join_sums(js::key_aggregates(t1, "J", "W"), js::build_histogram(t2, "J"));
}

inline const std::vector<double>& rate_levels() {
  static const std::vector<double> levels{0.25, 0.5, 1.0};
  return levels;
}

// Tiny instances: <= 4 keys, <= 8 tuples per table, integer W in [0, 9],
// rates drawn from {0.25, 0.5, 1}. Sizes are kept within the enumeration
// bound (keys + n1 + n2 <= 20).
inline js::oracle::TinyInstance random_tiny(std::mt19937_64& rng, bool equal_p = false) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  js::oracle::TinyInstance inst;
  const int nkeys = pick(1, 4);
  int n1 = pick(1, 8), n2 = pick(1, 8);
  while (nkeys + n1 + n2 > static_cast<int>(js::oracle::kMaxEnumerationBits)) {
    if (n1 >= n2) --n1; else --n2;
  }
  for (int i = 0; i < n1; ++i) {
    inst.keys1.push_back(std::to_string(pick(1, nkeys)));
    inst.w1.push_back(static_cast<double>(pick(0, 9)));
  }
  for (int i = 0; i < n2; ++i) inst.keys2.push_back(std::to_string(pick(1, nkeys)));
  const auto& lv = rate_levels();
  inst.p1 = lv[pick(0, 2)];
  inst.p2 = equal_p ? inst.p1 : lv[pick(0, 2)];
  inst.q1 = lv[pick(0, 2)];
  inst.q2 = lv[pick(0, 2)];
  return inst;
}

// Random full-table statistics for planner grids: up to `max_keys` keys with
// frequencies in [1, max_f] (some keys one-sided), W means and variances.
inline js::JoinSums random_stats(std::mt19937_64& rng, js::KeyAggregates* recs_out = nullptr,
                                 js::JoinKeyHistogram* hist_out = nullptr, int max_keys = 40, int max_f = 12) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int nkeys = pick(2, max_keys);
  js::KeyAggregates recs;
  js::JoinKeyHistogram hist;
  for (int k = 0; k < nkeys; ++k) {
    const std::string key = std::to_string(k);
    if (u(rng) < 0.85) {
      js::KeyAggregate r;
      r.key = key;
      r.a = pick(1, max_f);
      r.mu = 1.0 + 50.0 * u(rng) * u(rng);
      r.sigma2 = r.a > 1 ? 100.0 * u(rng) * u(rng) : 0.0;
      recs.push_back(r);
    }
    if (u(rng) < 0.85) hist.add(key, pick(1, max_f));
  }
  std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  if (recs.empty()) recs.push_back({"0", 1, 1.0, 0.0});
  if (hist.frequency(recs.front().key) == 0) hist.add(recs.front().key, 1);
  if (recs_out) *recs_out = recs;
  if (hist_out) *hist_out = hist;
  return js::join_sums(recs, hist);
}

// n points evenly spaced on [lo, hi] (inclusive).
inline std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return g;
}

}  // namespace testsupport
