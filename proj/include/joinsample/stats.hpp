#pragma once

// Frequency and moment statistics over join keys. Every variance formula and
// planner in the library consumes these types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "joinsample/error.hpp"
#include "joinsample/table.hpp"

namespace joinsample {

// Frequency vector of one table: key -> number of tuples carrying that key.
// Only keys with frequency >= 1 are stored.
class JoinKeyHistogram {
 public:
  JoinKeyHistogram() = default;

  // Builds from raw counts; zero counts are dropped, negative ones rejected.
  static JoinKeyHistogram from_counts(const std::map<std::string, std::int64_t>& counts) {
    JoinKeyHistogram h;
    for (const auto& [k, c] : counts) {
      if (c < 0) throw DomainError("negative frequency for key '" + k + "'");
      if (c == 0) continue;
      h.entries_.emplace(k, c);
      h.n_ += c;
    }
    return h;
  }

  void add(const std::string& key, std::int64_t count = 1) {
    if (count <= 0) return;
    entries_[key] += count;
    n_ += count;
  }

  [[nodiscard]] const std::map<std::string, std::int64_t>& entries() const noexcept { return entries_; }
  [[nodiscard]] std::int64_t n() const noexcept { return n_; }
  [[nodiscard]] std::size_t distinct() const noexcept { return entries_.size(); }
  [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }

  [[nodiscard]] std::int64_t frequency(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second;
  }

  friend bool operator==(const JoinKeyHistogram&, const JoinKeyHistogram&) = default;

 private:
  std::map<std::string, std::int64_t> entries_;
  std::int64_t n_ = 0;
};

inline JoinKeyHistogram build_histogram(const Table& rows, std::string_view key_column) {
  const auto idx = key_indices(rows, key_column);
  JoinKeyHistogram h;
  for (const auto& row : rows.rows) h.add(row_key(row, idx));
  return h;
}

// Cross moments gamma_{i,j} = sum_v a_v^i b_v^j for i, j in {1, 2}.
struct Moments {
  double g11 = 0.0;
  double g12 = 0.0;
  double g21 = 0.0;
  double g22 = 0.0;

  // sum_v (a_v^2 - a_v)(b_v^2 - b_v); zero iff every joining key has a_v = 1 or b_v = 1.
  [[nodiscard]] double excess() const noexcept { return g22 - g21 - g12 + g11; }
};

namespace detail {

// Calls f(a_v, b_v) for every key present in both histograms, iterating the
// smaller one.
template <typename F>
void for_each_shared(const JoinKeyHistogram& h1, const JoinKeyHistogram& h2, F&& f) {
  if (h1.distinct() <= h2.distinct()) {
    for (const auto& [k, a] : h1.entries()) {
      if (auto b = h2.frequency(k); b > 0) f(k, a, b);
    }
  } else {
    for (const auto& [k, b] : h2.entries()) {
      if (auto a = h1.frequency(k); a > 0) f(k, a, b);
    }
  }
}

}  // namespace detail

inline Moments cross_moments(const JoinKeyHistogram& h1, const JoinKeyHistogram& h2) {
  Moments m;
  detail::for_each_shared(h1, h2, [&](const std::string&, std::int64_t ai, std::int64_t bi) {
    const double a = static_cast<double>(ai);
    const double b = static_cast<double>(bi);
    m.g11 += a * b;
    m.g12 += a * b * b;
    m.g21 += a * a * b;
    m.g22 += a * a * b * b;
  });
  return m;
}

inline std::int64_t max_frequency(const JoinKeyHistogram& h) {
  if (h.empty()) throw DomainError("max_frequency of an empty histogram");
  std::int64_t f = 0;
  for (const auto& [k, c] : h.entries()) f = std::max(f, c);
  return f;
}

// Per-key summary of the aggregate column W on T1. sigma2 is the population
// variance (divides by a): tuple values are fixed constants of the table,
// not a sample from some distribution.
struct KeyAggregate {
  std::string key;
  std::int64_t a = 0;
  double mu = 0.0;
  double sigma2 = 0.0;

  [[nodiscard]] double second_moment() const noexcept { return mu * mu + sigma2; }
};

// Sorted by key.
using KeyAggregates = std::vector<KeyAggregate>;

inline KeyAggregates key_aggregates(const Table& rows, std::string_view key_column,
                                    std::string_view agg_column) {
  const auto kidx = key_indices(rows, key_column);
  const auto widx = rows.column_index(agg_column);
  struct Acc {
    std::int64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& row : rows.rows) {
    const double w = parse_double(row[widx], agg_column);
    auto& s = acc[row_key(row, kidx)];
    ++s.n;
    const double delta = w - s.mean;
    s.mean += delta / static_cast<double>(s.n);
    s.m2 += delta * (w - s.mean);
  }
  KeyAggregates out;
  out.reserve(acc.size());
  for (auto& [k, s] : acc) {
    const double var = s.n > 1 ? std::max(0.0, s.m2 / static_cast<double>(s.n)) : 0.0;
    out.push_back({k, s.n, s.mean, var});
  }
  return out;
}

inline JoinKeyHistogram histogram_of(const KeyAggregates& recs) {
  JoinKeyHistogram h;
  for (const auto& r : recs) h.add(r.key, r.a);
  return h;
}

// SUM-variance coefficients (all summed over v):
//   b1 = a^2 mu^2 b,  b2 = a (mu^2 + s^2) b^2,  b3 = a (mu^2 + s^2) b,  b4 = a^2 mu^2 b^2
struct Betas {
  double b1 = 0.0;
  double b2 = 0.0;
  double b3 = 0.0;
  double b4 = 0.0;

  [[nodiscard]] double excess() const noexcept { return b4 - b1 - b2 + b3; }
};

struct AggStats {
  KeyAggregates records;
  Betas beta;
};

inline AggStats agg_stats(KeyAggregates records, const JoinKeyHistogram& other) {
  AggStats s{std::move(records), {}};
  for (const auto& r : s.records) {
    const double b = static_cast<double>(other.frequency(r.key));
    if (b == 0.0) continue;
    const double a = static_cast<double>(r.a);
    const double lin = a * r.second_moment();
    const double sq = a * a * r.mu * r.mu;
    s.beta.b1 += sq * b;
    s.beta.b2 += lin * b * b;
    s.beta.b3 += lin * b;
    s.beta.b4 += sq * b * b;
  }
  return s;
}

inline AggStats agg_stats(const Table& rows, std::string_view key_column, std::string_view agg_column,
                          const JoinKeyHistogram& other) {
  return agg_stats(key_aggregates(rows, key_column, agg_column), other);
}

// The inner products sum_v x_v y_v that appear in the COUNT, SUM and AVG
// variances, where x is held by T1's owner and y by T2's owner.
//   g_ij = a^i b^j,  m_ij = a^i mu b^j (with a mu = sum of W on the key),
//   b1..b4 as in Betas.
struct JoinSums {
  Moments gamma;
  double m11 = 0.0;
  double m12 = 0.0;
  double m21 = 0.0;
  double m22 = 0.0;
  Betas beta;
};

inline JoinSums join_sums(const KeyAggregates& records, const JoinKeyHistogram& other) {
  JoinSums s;
  for (const auto& r : records) {
    const double b = static_cast<double>(other.frequency(r.key));
    if (b == 0.0) continue;
    const double a = static_cast<double>(r.a);
    s.gamma.g11 += a * b;
    s.gamma.g12 += a * b * b;
    s.gamma.g21 += a * a * b;
    s.gamma.g22 += a * a * b * b;
    s.m11 += a * r.mu * b;
    s.m12 += a * r.mu * b * b;
    s.m21 += a * a * r.mu * b;
    s.m22 += a * a * r.mu * b * b;
    const double lin = a * r.second_moment();
    const double sq = a * a * r.mu * r.mu;
    s.beta.b1 += sq * b;
    s.beta.b2 += lin * b * b;
    s.beta.b3 += lin * b;
    s.beta.b4 += sq * b * b;
  }
  return s;
}

// A point in the filter space: one value per filter column.
using FilterValue = std::vector<double>;

// Joint counts of (join key, filter value) over T1 for one or more numeric
// filter columns.
class ConditionalHistogram {
 public:
  ConditionalHistogram() = default;

  [[nodiscard]] const std::vector<std::string>& filter_columns() const noexcept { return columns_; }
  [[nodiscard]] std::size_t dimensions() const noexcept { return columns_.size(); }
  [[nodiscard]] std::int64_t n1() const noexcept { return n1_; }

  // a_{v,x}: key -> (filter value -> count)
  [[nodiscard]] const std::map<std::string, std::map<FilterValue, std::int64_t>>& counts() const noexcept {
    return counts_;
  }
  // c_x: tuples with filter value x.
  [[nodiscard]] const std::map<FilterValue, std::int64_t>& value_counts() const noexcept { return c_x_; }
  // Sorted distinct values per filter column.
  [[nodiscard]] const std::vector<std::vector<double>>& distinct_values() const noexcept { return distinct_; }

  // Number of distinct filter values (distinct tuples when several columns).
  [[nodiscard]] std::size_t m_c() const noexcept { return c_x_.size(); }

  [[nodiscard]] std::int64_t a_v(const std::string& key) const {
    auto it = counts_.find(key);
    if (it == counts_.end()) return 0;
    std::int64_t s = 0;
    for (const auto& [x, c] : it->second) s += c;
    return s;
  }

  // a_{v,>=x}: tuples with key v whose filter values dominate x componentwise.
  [[nodiscard]] std::int64_t a_v_geq(const std::string& key, const FilterValue& x) const {
    if (x.size() != columns_.size()) throw DomainError("filter value has wrong dimension");
    auto it = counts_.find(key);
    if (it == counts_.end()) return 0;
    if (columns_.size() == 1) {
      const auto& vals = distinct_[0];
      const auto pos = static_cast<std::size_t>(std::lower_bound(vals.begin(), vals.end(), x[0]) - vals.begin());
      const auto& suffix = suffix_.at(key);
      return pos < suffix.size() ? suffix[pos] : 0;
    }
    std::int64_t s = 0;
    for (const auto& [v, c] : it->second) {
      bool dominates = true;
      for (std::size_t j = 0; j < x.size(); ++j) dominates = dominates && v[j] >= x[j];
      if (dominates) s += c;
    }
    return s;
  }

  // Per-key suffix sums over distinct_values()[0]; single-column only.
  [[nodiscard]] const std::vector<std::int64_t>& geq_profile(const std::string& key) const {
    if (columns_.size() != 1) throw DomainError("geq_profile requires a single filter column");
    return suffix_.at(key);
  }

  [[nodiscard]] JoinKeyHistogram marginal() const {
    JoinKeyHistogram h;
    for (const auto& [k, xs] : counts_) {
      for (const auto& [x, c] : xs) h.add(k, c);
    }
    return h;
  }

  static ConditionalHistogram build(const Table& rows, std::string_view key_column,
                                    const std::vector<std::string>& filter_columns) {
    if (filter_columns.empty()) throw SchemaError("at least one filter column is required");
    ConditionalHistogram h;
    h.columns_ = filter_columns;
    const auto kidx = key_indices(rows, key_column);
    std::vector<std::size_t> fidx;
    for (const auto& c : filter_columns) fidx.push_back(rows.column_index(c));
    h.distinct_.assign(fidx.size(), {});
    for (const auto& row : rows.rows) {
      FilterValue x(fidx.size());
      for (std::size_t j = 0; j < fidx.size(); ++j) {
        try {
          x[j] = parse_double(row[fidx[j]], filter_columns[j]);
        } catch (const ParseError& e) {
          throw SchemaError(std::string("filter column values must be numeric: ") + e.what());
        }
        if (std::isnan(x[j])) throw SchemaError("filter column '" + filter_columns[j] + "' contains NaN");
        h.distinct_[j].push_back(x[j]);
      }
      h.counts_[row_key(row, kidx)][x] += 1;
      h.c_x_[x] += 1;
      ++h.n1_;
    }
    for (auto& d : h.distinct_) {
      std::sort(d.begin(), d.end());
      d.erase(std::unique(d.begin(), d.end()), d.end());
    }
    if (h.columns_.size() == 1) {
      const auto& vals = h.distinct_[0];
      for (const auto& [k, xs] : h.counts_) {
        std::vector<std::int64_t> suffix(vals.size() + 1, 0);
        for (const auto& [x, c] : xs) {
          const auto pos = std::lower_bound(vals.begin(), vals.end(), x[0]) - vals.begin();
          suffix[static_cast<std::size_t>(pos)] += c;
        }
        for (std::size_t i = vals.size(); i-- > 0;) suffix[i] += suffix[i + 1];
        suffix.pop_back();
        h.suffix_.emplace(k, std::move(suffix));
      }
    }
    return h;
  }

 private:
  std::vector<std::string> columns_;
  std::map<std::string, std::map<FilterValue, std::int64_t>> counts_;
  std::map<FilterValue, std::int64_t> c_x_;
  std::vector<std::vector<double>> distinct_;
  std::map<std::string, std::vector<std::int64_t>> suffix_;
  std::int64_t n1_ = 0;
};

inline ConditionalHistogram conditional_histogram(const Table& rows, std::string_view key_column,
                                                  std::string_view filter_column) {
  return ConditionalHistogram::build(rows, key_column, {std::string(filter_column)});
}

}  // namespace joinsample
