#pragma once

// Universe-Bernoulli sampling (UBS): a tuple is kept iff the shared hash of
// its join key falls below p and an independent coin with bias q succeeds.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include "joinsample/error.hpp"
#include "joinsample/hash.hpp"
#include "joinsample/table.hpp"

namespace joinsample {

struct UbsParams {
  double p = 1.0;
  double q = 1.0;
  std::uint64_t hash_seed = 0;

  [[nodiscard]] double effective_rate() const noexcept { return p * q; }

  void validate() const {
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("universe rate p must be in (0, 1], got " + std::to_string(p));
    if (!(q > 0.0 && q <= 1.0)) throw DomainError("Bernoulli rate q must be in (0, 1], got " + std::to_string(q));
  }

  friend bool operator==(const UbsParams&, const UbsParams&) = default;
};

// Retention rule shared by every sampling path.
[[nodiscard]] inline bool ubs_keep(double key_hash_value, double p, double q, std::uint64_t bernoulli_seed,
                                   std::uint64_t table_id, std::uint64_t row) noexcept {
  return key_hash_value < p && counter_uniform(bernoulli_seed, table_id, row) < q;
}

struct SubsGroup {
  std::string id;
  bool large = false;
  std::int64_t size = 0;      // |G_i|
  std::int64_t distinct = 0;  // join keys in the group
  double epsilon = 0.0;       // effective rate p_i q_i
  double p = 1.0;
  double q = 1.0;
};

struct SubsPlan {
  std::vector<SubsGroup> groups;
  double shared_p = 1.0;
  bool shared_p_raised = false;  // a supplied p was lifted to keep every q_i <= 1
  double epsilon = 0.0;
  std::int64_t k_key = 1;
  std::int64_t k_tuple = 1;

  [[nodiscard]] const SubsGroup& group(std::string_view id) const {
    for (const auto& g : groups) {
      if (g.id == id) return g;
    }
    throw SchemaError("group '" + std::string(id) + "' is not in the SUBS plan");
  }
};

struct SubsSampleParams {
  SubsPlan plan;
  std::string group_column;
  std::uint64_t hash_seed = 0;
};

using SampleParams = std::variant<UbsParams, SubsSampleParams>;

// A materialized sample: the retained rows (schema identical to the source)
// plus everything needed to reproduce or rescale it.
struct Sample {
  Table table;
  std::vector<std::size_t> source_rows;  // indices into the source table
  SampleParams params;
  std::string key_column;
  std::uint64_t bernoulli_seed = 0;
  std::uint64_t table_id = 1;
  std::size_t source_n = 0;

  [[nodiscard]] std::uint64_t hash_seed() const {
    return std::visit([](const auto& prm) { return prm.hash_seed; }, params);
  }
  [[nodiscard]] const UbsParams& ubs() const {
    if (const auto* u = std::get_if<UbsParams>(&params)) return *u;
    throw DomainError("sample was drawn with SUBS; select a group first");
  }
};

// Indices of retained rows, in source order. Rows are split into contiguous
// chunks across threads; the decision for each row depends only on
// (key, row index, seeds), so the result does not depend on `threads`.
inline std::vector<std::size_t> ubs_select(const Table& table, std::string_view key_column,
                                           const UbsParams& params, std::uint64_t bernoulli_seed,
                                           std::uint64_t table_id, unsigned threads = 1) {
  params.validate();
  const auto kidx = key_indices(table, key_column);
  const std::size_t n = table.size();
  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, n / 1024))));
  std::vector<std::vector<std::size_t>> parts(threads);
  auto work = [&](unsigned t) {
    const std::size_t lo = n * t / threads;
    const std::size_t hi = n * (t + 1) / threads;
    for (std::size_t i = lo; i < hi; ++i) {
      const double h = key_hash(row_key(table.rows[i], kidx), params.hash_seed);
      if (ubs_keep(h, params.p, params.q, bernoulli_seed, table_id, i)) parts[t].push_back(i);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }
  std::vector<std::size_t> out;
  for (auto& part : parts) out.insert(out.end(), part.begin(), part.end());
  return out;
}

inline Sample materialize(const Table& table, std::vector<std::size_t> rows, SampleParams params,
                          std::string_view key_column, std::uint64_t bernoulli_seed, std::uint64_t table_id) {
  Sample s;
  s.table = table.empty_like();
  s.table.rows.reserve(rows.size());
  for (auto i : rows) s.table.rows.push_back(table.rows[i]);
  s.source_rows = std::move(rows);
  s.params = std::move(params);
  s.key_column = std::string(key_column);
  s.bernoulli_seed = bernoulli_seed;
  s.table_id = table_id;
  s.source_n = table.size();
  return s;
}

inline Sample ubs_sample(const Table& table, std::string_view key_column, const UbsParams& params,
                         std::uint64_t bernoulli_seed, std::uint64_t table_id = 1, unsigned threads = 1) {
  return materialize(table, ubs_select(table, key_column, params, bernoulli_seed, table_id, threads), params,
                     key_column, bernoulli_seed, table_id);
}

// Post-hoc check that every retained row passed the universe stage.
inline bool universe_consistent(const Sample& s, double p) {
  const auto kidx = key_indices(s.table, s.key_column);
  for (const auto& row : s.table.rows) {
    if (!(key_hash(row_key(row, kidx), s.hash_seed()) < p)) return false;
  }
  return true;
}

// Dense-id view of two tables sharing one key dictionary, used by the
// Monte-Carlo harness to draw many samples without re-hashing strings.
// Selection follows exactly the same rule as ubs_select.
class KeyDictionary {
 public:
  std::uint32_t intern(const std::string& key) {
    auto [it, inserted] = ids_.try_emplace(key, static_cast<std::uint32_t>(keys_.size()));
    if (inserted) keys_.push_back(key);
    return it->second;
  }
  [[nodiscard]] std::size_t size() const noexcept { return keys_.size(); }
  [[nodiscard]] const std::vector<std::string>& keys() const noexcept { return keys_; }

  // h(key) for every id under the given seed.
  [[nodiscard]] std::vector<double> hashes(std::uint64_t seed) const {
    std::vector<double> h(keys_.size());
    for (std::size_t i = 0; i < keys_.size(); ++i) h[i] = key_hash(keys_[i], seed);
    return h;
  }

 private:
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<std::string> keys_;
};

struct PreparedTable {
  std::vector<std::uint32_t> key_ids;
  std::vector<double> weights;  // empty when no aggregate column
  std::uint64_t table_id = 1;

  [[nodiscard]] std::size_t size() const noexcept { return key_ids.size(); }

  static PreparedTable build(const Table& t, std::string_view key_column, KeyDictionary& dict,
                             std::uint64_t table_id, std::string_view agg_column = {}) {
    PreparedTable pt;
    pt.table_id = table_id;
    const auto kidx = key_indices(t, key_column);
    pt.key_ids.reserve(t.size());
    std::size_t widx = 0;
    if (!agg_column.empty()) {
      widx = t.column_index(agg_column);
      pt.weights.reserve(t.size());
    }
    for (const auto& row : t.rows) {
      pt.key_ids.push_back(dict.intern(row_key(row, kidx)));
      if (!agg_column.empty()) pt.weights.push_back(parse_double(row[widx], agg_column));
    }
    return pt;
  }
};

// Calls visit(row_index) for every retained row.
template <typename Visit>
void for_each_retained(const PreparedTable& t, std::span<const double> hash_by_id, double p, double q,
                       std::uint64_t bernoulli_seed, Visit&& visit) {
  for (std::size_t i = 0; i < t.key_ids.size(); ++i) {
    if (ubs_keep(hash_by_id[t.key_ids[i]], p, q, bernoulli_seed, t.table_id, i)) visit(i);
  }
}

}  // namespace joinsample
