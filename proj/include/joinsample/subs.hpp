#pragma once

// Stratified UBS: per-group budgets with a minimum expected number of tuples
// per group, and universe sampling only for groups with enough join keys.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "joinsample/error.hpp"
#include "joinsample/hash.hpp"
#include "joinsample/sampler.hpp"
#include "joinsample/table.hpp"

namespace joinsample {

struct GroupSummary {
  std::string id;
  std::int64_t size = 0;      // |G_i|
  std::int64_t distinct = 0;  // distinct join keys s_i
};

inline std::vector<GroupSummary> group_summaries(const Table& t, std::string_view key_column,
                                                 std::string_view group_column) {
  const auto kidx = key_indices(t, key_column);
  const auto gidx = t.column_index(group_column);
  std::map<std::string, std::pair<std::int64_t, std::set<std::string>>> acc;
  for (const auto& row : t.rows) {
    auto& [n, keys] = acc[row[gidx]];
    ++n;
    keys.insert(row_key(row, kidx));
  }
  std::vector<GroupSummary> out;
  for (auto& [g, v] : acc) out.push_back({g, v.first, static_cast<std::int64_t>(v.second.size())});
  return out;
}

struct SubsPlanResult {
  std::optional<SubsPlan> plan;
  std::string infeasible;  // the violated inequality, when plan is empty

  [[nodiscard]] bool feasible() const noexcept { return plan.has_value(); }
};

// Budget allocation: a group is large iff it has >= k_key join keys. Within
// each class the k_tuple floor is paid first and the residual budget is
// shared evenly. Large groups share one universe rate; small groups are
// Bernoulli-only (p_i = 1).
inline SubsPlanResult subs_plan(const std::vector<GroupSummary>& groups, double epsilon, std::int64_t k_key,
                                std::int64_t k_tuple, std::optional<double> shared_p = std::nullopt) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw DomainError("epsilon must be in (0, 1]");
  if (k_key < 1 || k_tuple < 1) throw DomainError("k_key and k_tuple must be >= 1");
  if (groups.empty()) throw DomainError("SUBS needs at least one group");

  double n_large = 0.0, n_small = 0.0;
  double m_large = 0.0, m_small = 0.0;
  for (const auto& g : groups) {
    if (g.size <= 0) throw DomainError("group '" + g.id + "' is empty");
    if (g.distinct >= k_key) {
      n_large += static_cast<double>(g.size);
      m_large += 1.0;
    } else {
      n_small += static_cast<double>(g.size);
      m_small += 1.0;
    }
  }
  const double kt = static_cast<double>(k_tuple);
  SubsPlanResult result;
  if (m_small * kt > epsilon * n_small) {
    result.infeasible = "M_s*k_tuple > eps*N_s (" + std::to_string(m_small * kt) + " > " +
                        std::to_string(epsilon * n_small) + ")";
    return result;
  }
  if (m_large * kt > epsilon * n_large) {
    result.infeasible = "M_b*k_tuple > eps*N_b (" + std::to_string(m_large * kt) + " > " +
                        std::to_string(epsilon * n_large) + ")";
    return result;
  }
  const double residual_small = n_small > 0 ? epsilon - m_small * kt / n_small : 0.0;
  const double residual_large = n_large > 0 ? epsilon - m_large * kt / n_large : 0.0;

  SubsPlan plan;
  plan.epsilon = epsilon;
  plan.k_key = k_key;
  plan.k_tuple = k_tuple;
  double max_large_eps = 0.0;
  for (const auto& g : groups) {
    SubsGroup sg;
    sg.id = g.id;
    sg.size = g.size;
    sg.distinct = g.distinct;
    sg.large = g.distinct >= k_key;
    const double base = kt / static_cast<double>(g.size);
    // Over-allocation on tiny groups is clamped to a full copy.
    sg.epsilon = std::min(1.0, base + (sg.large ? residual_large : residual_small));
    if (sg.large) max_large_eps = std::max(max_large_eps, sg.epsilon);
    plan.groups.push_back(sg);
  }
  const double lower = std::max(1.0 / static_cast<double>(k_key), max_large_eps);
  double p = lower;
  if (shared_p) {
    if (!(*shared_p > 0.0 && *shared_p <= 1.0)) throw DomainError("shared p must be in (0, 1]");
    p = *shared_p;
    if (p < lower) {
      p = lower;
      plan.shared_p_raised = true;
    }
  }
  p = std::min(1.0, p);
  plan.shared_p = p;
  for (auto& g : plan.groups) {
    if (g.large) {
      g.p = p;
      g.q = std::min(1.0, g.epsilon / p);
    } else {
      g.p = 1.0;
      g.q = g.epsilon;
    }
  }
  result.plan = std::move(plan);
  return result;
}

// Per-group UBS with (p_i, q_i); the hash seed is shared by every group and
// by the other table so that universe decisions stay coordinated.
inline Sample subs_sample(const Table& table, std::string_view key_column, std::string_view group_column,
                          const SubsPlan& plan, std::uint64_t hash_seed, std::uint64_t bernoulli_seed,
                          std::uint64_t table_id = 1) {
  const auto kidx = key_indices(table, key_column);
  const auto gidx = table.column_index(group_column);
  std::map<std::string, const SubsGroup*, std::less<>> lookup;
  for (const auto& g : plan.groups) lookup.emplace(g.id, &g);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& row = table.rows[i];
    auto it = lookup.find(row[gidx]);
    if (it == lookup.end()) throw SchemaError("row " + std::to_string(i) + " has unknown group '" + row[gidx] + "'");
    const SubsGroup& g = *it->second;
    const double h = key_hash(row_key(row, kidx), hash_seed);
    if (ubs_keep(h, g.p, g.q, bernoulli_seed, table_id, i)) rows.push_back(i);
  }
  return materialize(table, std::move(rows), SubsSampleParams{plan, std::string(group_column), hash_seed},
                     key_column, bernoulli_seed, table_id);
}

// The rows of one group as an ordinary UBS sample with that group's (p_i, q_i),
// e.g. to estimate a per-group aggregate.
inline Sample subs_group_view(const Sample& s, std::string_view group_id) {
  const auto* sp = std::get_if<SubsSampleParams>(&s.params);
  if (!sp) throw DomainError("sample was not drawn with SUBS");
  const SubsGroup& g = sp->plan.group(group_id);
  const auto gidx = s.table.column_index(sp->group_column);
  Sample out;
  out.table = s.table.empty_like();
  for (std::size_t i = 0; i < s.table.size(); ++i) {
    if (s.table.rows[i][gidx] != group_id) continue;
    out.table.rows.push_back(s.table.rows[i]);
    out.source_rows.push_back(s.source_rows[i]);
  }
  out.params = UbsParams{g.p, g.q, sp->hash_seed};
  out.key_column = s.key_column;
  out.bernoulli_seed = s.bernoulli_seed;
  out.table_id = s.table_id;
  out.source_n = static_cast<std::size_t>(g.size);
  return out;
}

}  // namespace joinsample
