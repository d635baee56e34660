#pragma once

// Join of two UBS samples, the scaled COUNT/SUM estimators, the ratio AVG
// estimator, and their closed-form variances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "joinsample/error.hpp"
#include "joinsample/sampler.hpp"
#include "joinsample/stats.hpp"
#include "joinsample/table.hpp"

namespace joinsample {

enum class Aggregate { Count, Sum, Avg };

inline std::string_view to_string(Aggregate a) noexcept {
  switch (a) {
    case Aggregate::Count: return "count";
    case Aggregate::Sum: return "sum";
    case Aggregate::Avg: return "avg";
  }
  return "count";
}

inline Aggregate parse_aggregate(std::string_view s) {
  if (s == "count" || s == "COUNT") return Aggregate::Count;
  if (s == "sum" || s == "SUM") return Aggregate::Sum;
  if (s == "avg" || s == "AVG") return Aggregate::Avg;
  throw UsageError("unknown aggregate '" + std::string(s) + "' (expected count|sum|avg)");
}

// The four sums that weight the variance terms: x22 multiplies the universe
// term (1-p)/p, x21 and x12 the one-sided Bernoulli terms, x11 the joint one.
// COUNT uses (g22, g21, g12, g11); SUM uses (b4, b1, b2, b3).
struct VarianceWeights {
  double x11 = 0.0;
  double x12 = 0.0;
  double x21 = 0.0;
  double x22 = 0.0;
};

constexpr VarianceWeights weights_of(const Moments& m) noexcept { return {m.g11, m.g12, m.g21, m.g22}; }
constexpr VarianceWeights weights_of(const Betas& b) noexcept { return {b.b3, b.b2, b.b1, b.b4}; }

inline VarianceWeights weights_of(Aggregate agg, const JoinSums& s) {
  switch (agg) {
    case Aggregate::Count: return weights_of(s.gamma);
    case Aggregate::Sum: return weights_of(s.beta);
    case Aggregate::Avg: break;
  }
  throw DomainError("AVG has no closed-form variance weights; use taylor_avg_variance");
}

// Variance of the COUNT/SUM estimator for arbitrary (p1, q1), (p2, q2); the
// universe stage acts through p = min(p1, p2).
inline double general_variance(double p1, double q1, double p2, double q2, const VarianceWeights& w) {
  for (double r : {p1, q1, p2, q2}) {
    if (!(r > 0.0 && r <= 1.0)) throw DomainError("sampling rates must be in (0, 1]");
  }
  const double p = std::min(p1, p2);
  return (1.0 - q2) / (p * q2) * w.x21 + (1.0 - q1) / (p * q1) * w.x12 +
         (1.0 - q1) * (1.0 - q2) / (p * q1 * q2) * w.x11 + (1.0 - p) / p * w.x22;
}

inline double general_variance(Aggregate agg, double p1, double q1, double p2, double q2, const JoinSums& s) {
  return general_variance(p1, q1, p2, q2, weights_of(agg, s));
}

inline void check_shared_rate(double p, double eps1, double eps2) {
  if (!(eps1 > 0.0 && eps1 <= 1.0 && eps2 > 0.0 && eps2 <= 1.0)) {
    throw DomainError("effective rates must be in (0, 1]");
  }
  const double lo = std::max(eps1, eps2);
  if (!(p >= lo * (1.0 - 1e-12) && p <= 1.0 + 1e-12)) {
    throw DomainError("universe rate p=" + std::to_string(p) + " outside [max(eps1,eps2), 1]");
  }
}

// Variance with a shared universe rate p and q_i = eps_i / p.
inline double closed_form_variance(double p, double eps1, double eps2, const VarianceWeights& w) {
  check_shared_rate(p, eps1, eps2);
  return (1.0 / p - 1.0) * w.x22 + (1.0 / eps2 - 1.0 / p) * w.x21 + (1.0 / eps1 - 1.0 / p) * w.x12 +
         (p / (eps1 * eps2) - 1.0 / eps1 - 1.0 / eps2 + 1.0 / p) * w.x11;
}

inline double closed_form_variance(Aggregate agg, double p, double eps1, double eps2, const JoinSums& s) {
  return closed_form_variance(p, eps1, eps2, weights_of(agg, s));
}

// Moments of the unscaled joined-sample sum S and count C, and the
// first-order (delta method) variance of S/C.
struct TaylorAvgReport {
  double es = 0.0;
  double ec = 0.0;
  double var_s = 0.0;
  double var_c = 0.0;
  double cov_sc = 0.0;
  double variance = 0.0;
};

inline TaylorAvgReport taylor_avg_variance(double p1, double q1, double p2, double q2, const JoinSums& s) {
  for (double r : {p1, q1, p2, q2}) {
    if (!(r > 0.0 && r <= 1.0)) throw DomainError("sampling rates must be in (0, 1]");
  }
  const double p = std::min(p1, p2);
  const double k = p * q1 * q2;
  TaylorAvgReport r;
  r.es = k * s.m11;
  r.ec = k * s.gamma.g11;
  if (!(r.ec > 0.0)) throw UndefinedRatioError("E[C] = 0: the join is empty, AVG is undefined");
  const auto& b = s.beta;
  const auto& g = s.gamma;
  r.var_s = k * ((1 - q2) * q1 * b.b1 + (1 - q1) * q2 * b.b2 + (1 - q1) * (1 - q2) * b.b3 + (1 - p) * q1 * q2 * b.b4);
  r.var_c = k * ((1 - q2) * q1 * g.g21 + (1 - q1) * q2 * g.g12 + (1 - q1) * (1 - q2) * g.g11 + (1 - p) * q1 * q2 * g.g22);
  r.cov_sc = k * ((1 - q2) * q1 * s.m21 + (1 - q1) * q2 * s.m12 + (1 - q1) * (1 - q2) * s.m11 + (1 - p) * q1 * q2 * s.m22);
  // (ES/EC)^2 (VarS/ES^2 - 2Cov/(ES EC) + VarC/EC^2), expanded so ES = 0 is allowed.
  const double ec2 = r.ec * r.ec;
  r.variance = r.var_s / ec2 - 2.0 * r.es * r.cov_sc / (ec2 * r.ec) + r.es * r.es * r.var_c / (ec2 * ec2);
  r.variance = std::max(0.0, r.variance);
  return r;
}

inline TaylorAvgReport taylor_avg_variance(double p, double q1, double q2, const KeyAggregates& t1,
                                           const JoinKeyHistogram& hist2) {
  return taylor_avg_variance(p, q1, p, q2, join_sums(t1, hist2));
}

struct JoinedPair {
  std::size_t row1 = 0;
  std::size_t row2 = 0;
  friend bool operator==(const JoinedPair&, const JoinedPair&) = default;
};

// Multiset equi-join, hash table built on the smaller input. Output is sorted
// by (key, row1, row2) so that it does not depend on which side was built.
inline std::vector<JoinedPair> join_tables(const Table& t1, std::string_view key1, const Table& t2,
                                           std::string_view key2) {
  const auto k1 = key_indices(t1, key1);
  const auto k2 = key_indices(t2, key2);
  const bool build_left = t1.size() <= t2.size();
  const Table& build = build_left ? t1 : t2;
  const Table& probe = build_left ? t2 : t1;
  const auto& bk = build_left ? k1 : k2;
  const auto& pk = build_left ? k2 : k1;
  std::unordered_map<std::string, std::vector<std::size_t>> ht;
  for (std::size_t i = 0; i < build.size(); ++i) ht[row_key(build.rows[i], bk)].push_back(i);
  struct Keyed {
    const std::string* key;
    JoinedPair pair;
  };
  std::vector<Keyed> out;
  for (std::size_t j = 0; j < probe.size(); ++j) {
    auto it = ht.find(row_key(probe.rows[j], pk));
    if (it == ht.end()) continue;
    for (auto i : it->second) {
      out.push_back({&it->first, build_left ? JoinedPair{i, j} : JoinedPair{j, i}});
    }
  }
  std::sort(out.begin(), out.end(), [](const Keyed& x, const Keyed& y) {
    if (*x.key != *y.key) return *x.key < *y.key;
    if (x.pair.row1 != y.pair.row1) return x.pair.row1 < y.pair.row1;
    return x.pair.row2 < y.pair.row2;
  });
  std::vector<JoinedPair> pairs;
  pairs.reserve(out.size());
  for (const auto& k : out) pairs.push_back(k.pair);
  return pairs;
}

inline std::vector<JoinedPair> join_samples(const Sample& s1, const Sample& s2) {
  return join_tables(s1.table, s1.key_column, s2.table, s2.key_column);
}

// Per-key aggregates of a sample; the join is evaluated through these so
// that skewed keys never materialize their cross product.
struct SampleKeyAgg {
  double count = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;
};

inline std::map<std::string, SampleKeyAgg> sample_key_aggregates(const Table& t, std::string_view key_column,
                                                                 std::string_view agg_column = {}) {
  const auto kidx = key_indices(t, key_column);
  const std::optional<std::size_t> widx =
      agg_column.empty() ? std::nullopt : std::optional<std::size_t>(t.column_index(agg_column));
  std::map<std::string, SampleKeyAgg> out;
  for (const auto& row : t.rows) {
    auto& a = out[row_key(row, kidx)];
    a.count += 1.0;
    if (widx) {
      const double w = parse_double(row[*widx], agg_column);
      a.sum += w;
      a.sum_sq += w * w;
    }
  }
  return out;
}

// Unbiased estimates of every JoinSums entry from two UBS samples. A key
// survives both universe stages with probability p = min(p1, p2); within a
// key, x(x - (1-q))/q^2 is unbiased for a^2 under Binomial(a, q) thinning.
inline JoinSums plug_in_sums(const std::map<std::string, SampleKeyAgg>& s1, const std::map<std::string, SampleKeyAgg>& s2,
                             double p1, double q1, double p2, double q2) {
  const double p = std::min(p1, p2);
  JoinSums s;
  for (const auto& [key, l] : s1) {
    auto it = s2.find(key);
    if (it == s2.end()) continue;
    const double y = it->second.count;
    const double b = y / q2;
    const double b2 = y * (y - (1.0 - q2)) / (q2 * q2);
    const double a = l.count / q1;
    const double a2 = l.count * (l.count - (1.0 - q1)) / (q1 * q1);
    const double amu = l.sum / q1;
    const double a2mu = (l.count * l.sum - (1.0 - q1) * l.sum) / (q1 * q1);
    const double lin = l.sum_sq / q1;                                      // a (mu^2 + sigma^2)
    const double sq = (l.sum * l.sum - (1.0 - q1) * l.sum_sq) / (q1 * q1);  // a^2 mu^2
    s.gamma.g11 += a * b;
    s.gamma.g12 += a * b2;
    s.gamma.g21 += a2 * b;
    s.gamma.g22 += a2 * b2;
    s.m11 += amu * b;
    s.m12 += amu * b2;
    s.m21 += a2mu * b;
    s.m22 += a2mu * b2;
    s.beta.b1 += sq * b;
    s.beta.b2 += lin * b2;
    s.beta.b3 += lin * b;
    s.beta.b4 += sq * b2;
  }
  auto scale = [p](double& v) { v /= p; };
  for (double* v : {&s.gamma.g11, &s.gamma.g12, &s.gamma.g21, &s.gamma.g22, &s.m11, &s.m12, &s.m21, &s.m22,
                    &s.beta.b1, &s.beta.b2, &s.beta.b3, &s.beta.b4}) {
    scale(*v);
  }
  return s;
}

struct Estimate {
  Aggregate agg = Aggregate::Count;
  double value = 0.0;
  double variance = 0.0;
  double stderr_ = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double joined_rows = 0.0;
  double scale = 1.0;         // 1 / (p_min q1 q2)
  bool approximate = false;   // AVG: Taylor variance, no unbiasedness claim
  std::string variance_source;  // "closed_form" or "plug_in"
};

// Normal-approximation multiplier for the reported interval.
inline constexpr double kCi95 = 1.96;

inline void finish_interval(Estimate& e) {
  e.variance = std::max(0.0, e.variance);
  e.stderr_ = std::sqrt(e.variance);
  e.ci_lo = e.value - kCi95 * e.stderr_;
  e.ci_hi = e.value + kCi95 * e.stderr_;
}

// COUNT/SUM: scale * (count or W-sum over the joined samples).
// AVG: (W-sum) / count, unscaled since the scales cancel.
// `stats` (exact JoinSums of the full tables) switches the variance from
// the plug-in estimate to the closed form.
inline Estimate estimate(Aggregate agg, const Table& s1, std::string_view key1, const UbsParams& params1,
                         const Table& s2, std::string_view key2, const UbsParams& params2,
                         std::string_view agg_column = {}, const std::optional<JoinSums>& stats = std::nullopt) {
  params1.validate();
  params2.validate();
  if (params1.hash_seed != params2.hash_seed) {
    throw CoordinationError("samples were drawn with different hash seeds (" + std::to_string(params1.hash_seed) +
                            " vs " + std::to_string(params2.hash_seed) + ")");
  }
  if (agg != Aggregate::Count && agg_column.empty()) throw SchemaError("SUM/AVG need an aggregate column on T1");
  const auto l = sample_key_aggregates(s1, key1, agg == Aggregate::Count ? std::string_view{} : agg_column);
  const auto r = sample_key_aggregates(s2, key2);
  double joined = 0.0, wsum = 0.0;
  for (const auto& [key, a] : l) {
    auto it = r.find(key);
    if (it == r.end()) continue;
    joined += a.count * it->second.count;
    wsum += a.sum * it->second.count;
  }
  Estimate e;
  e.agg = agg;
  e.joined_rows = joined;
  e.scale = 1.0 / (std::min(params1.p, params2.p) * params1.q * params2.q);
  const JoinSums sums = stats ? *stats : plug_in_sums(l, r, params1.p, params1.q, params2.p, params2.q);
  e.variance_source = stats ? "closed_form" : "plug_in";
  switch (agg) {
    case Aggregate::Count:
      e.value = e.scale * joined;
      e.variance = general_variance(Aggregate::Count, params1.p, params1.q, params2.p, params2.q, sums);
      break;
    case Aggregate::Sum:
      e.value = e.scale * wsum;
      e.variance = general_variance(Aggregate::Sum, params1.p, params1.q, params2.p, params2.q, sums);
      break;
    case Aggregate::Avg:
      if (joined == 0.0) throw UndefinedRatioError("AVG over an empty sample join is undefined");
      e.value = wsum / joined;
      e.approximate = true;
      try {
        e.variance = taylor_avg_variance(params1.p, params1.q, params2.p, params2.q, sums).variance;
      } catch (const UndefinedRatioError&) {
        e.variance = 0.0;
      }
      break;
  }
  finish_interval(e);
  return e;
}

inline Estimate estimate(Aggregate agg, const Sample& s1, const Sample& s2, std::string_view agg_column = {},
                         const std::optional<JoinSums>& stats = std::nullopt) {
  return estimate(agg, s1.table, s1.key_column, s1.ubs(), s2.table, s2.key_column, s2.ubs(), agg_column, stats);
}

// Fraction of the original join's tuples that survive in the sample join.
inline double measure_output_fraction(const Sample& s1, const Sample& s2, double true_join_size) {
  if (!(true_join_size > 0.0)) throw DomainError("true join size must be positive");
  const auto l = sample_key_aggregates(s1.table, s1.key_column);
  const auto r = sample_key_aggregates(s2.table, s2.key_column);
  double joined = 0.0;
  for (const auto& [key, a] : l) {
    if (auto it = r.find(key); it != r.end()) joined += a.count * it->second.count;
  }
  return joined / true_join_size;
}

}  // namespace joinsample
