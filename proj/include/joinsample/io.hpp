#pragma once

// JSON encodings of statistics, plans, sample sidecars, estimates, query
// graphs and benchmark records.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <variant>

#include "json.hpp"
#include "joinsample/bench.hpp"
#include "joinsample/error.hpp"
#include "joinsample/estimator.hpp"
#include "joinsample/multi_query.hpp"
#include "joinsample/planner.hpp"
#include "joinsample/sampler.hpp"
#include "joinsample/stats.hpp"

namespace joinsample::io {

using nlohmann::json;

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

// Wraps nlohmann's type/lookup errors as ParseError with context.
template <typename F>
auto parsing(std::string_view what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

inline json to_json(const Moments& m) { return {{"g11", m.g11}, {"g12", m.g12}, {"g21", m.g21}, {"g22", m.g22}}; }
inline json to_json(const Betas& b) { return json::array({b.b1, b.b2, b.b3, b.b4}); }

// Per-table statistics. Without an aggregate column, entries carry only
// (key, a). With `sums`, the cross moments against the other table are
// included for reference.
struct TableStats {
  KeyAggregates records;
  bool has_aggregate = false;

  [[nodiscard]] JoinKeyHistogram histogram() const { return histogram_of(records); }
  [[nodiscard]] std::int64_t n() const { return histogram().n(); }
};

inline TableStats table_stats(const Table& t, std::string_view key_column, std::string_view agg_column = {}) {
  TableStats s;
  if (agg_column.empty()) {
    const auto hist = build_histogram(t, key_column);
    for (const auto& [k, f] : hist.entries()) s.records.push_back({k, f, 0.0, 0.0});
  } else {
    s.records = key_aggregates(t, key_column, agg_column);
    s.has_aggregate = true;
  }
  return s;
}

inline json to_json(const TableStats& s, const std::optional<JoinSums>& sums = std::nullopt) {
  json entries = json::array();
  std::int64_t n = 0;
  for (const auto& r : s.records) {
    n += r.a;
    json e = {{"key", r.key}, {"a", r.a}};
    if (s.has_aggregate) {
      e["mu"] = r.mu;
      e["sigma2"] = r.sigma2;
    }
    entries.push_back(std::move(e));
  }
  json j = {{"n", n}, {"entries", std::move(entries)}};
  if (sums) {
    j["gamma"] = to_json(sums->gamma);
    if (s.has_aggregate) j["beta"] = to_json(sums->beta);
  }
  return j;
}

inline TableStats table_stats_from_json(const json& j) {
  return parsing("statistics", [&] {
    TableStats s;
    std::int64_t n = 0;
    for (const auto& e : j.at("entries")) {
      KeyAggregate r;
      r.key = e.at("key").is_string() ? e.at("key").get<std::string>() : e.at("key").dump();
      r.a = e.at("a").get<std::int64_t>();
      if (r.a < 1) throw DomainError("statistics entry with frequency < 1");
      if (e.contains("mu")) {
        s.has_aggregate = true;
        r.mu = e.at("mu").get<double>();
        r.sigma2 = e.value("sigma2", 0.0);
        if (r.sigma2 < 0.0) throw DomainError("negative sigma2 in statistics");
      }
      n += r.a;
      s.records.push_back(std::move(r));
    }
    if (j.contains("n") && j.at("n").get<std::int64_t>() != n) throw DomainError("statistics n does not match entries");
    std::sort(s.records.begin(), s.records.end(), [](const auto& x, const auto& y) { return x.key < y.key; });
    return s;
  });
}

inline json to_json(const Plan& p) {
  return {{"p", p.p},
          {"q1", p.q1},
          {"q2", p.q2},
          {"predicted_variance", p.predicted_variance},
          {"mode", std::string(to_string(p.mode))},
          {"objective", p.objective},
          {"degenerate", p.degenerate}};
}

inline Plan plan_from_json(const json& j) {
  return parsing("plan", [&] {
    Plan p;
    p.p = j.at("p").get<double>();
    p.q1 = j.at("q1").get<double>();
    p.q2 = j.at("q2").get<double>();
    p.predicted_variance = j.value("predicted_variance", 0.0);
    p.mode = j.value("mode", std::string("central")) == "decentral" ? PlanMode::Decentralized : PlanMode::Centralized;
    p.objective = j.value("objective", std::string("variance"));
    p.degenerate = j.value("degenerate", false);
    return p;
  });
}

inline json to_json(const SubsPlan& plan) {
  json groups = json::array();
  for (const auto& g : plan.groups) {
    groups.push_back({{"id", g.id},
                      {"class", g.large ? "large" : "small"},
                      {"size", g.size},
                      {"distinct", g.distinct},
                      {"epsilon", g.epsilon},
                      {"p", g.p},
                      {"q", g.q}});
  }
  return {{"groups", std::move(groups)},
          {"shared_p", plan.shared_p},
          {"shared_p_raised", plan.shared_p_raised},
          {"epsilon", plan.epsilon},
          {"k_key", plan.k_key},
          {"k_tuple", plan.k_tuple}};
}

inline SubsPlan subs_plan_from_json(const json& j) {
  return parsing("SUBS plan", [&] {
    SubsPlan plan;
    for (const auto& g : j.at("groups")) {
      SubsGroup sg;
      sg.id = g.at("id").get<std::string>();
      sg.large = g.at("class").get<std::string>() == "large";
      sg.size = g.value("size", std::int64_t{0});
      sg.distinct = g.value("distinct", std::int64_t{0});
      sg.epsilon = g.at("epsilon").get<double>();
      sg.p = g.at("p").get<double>();
      sg.q = g.at("q").get<double>();
      UbsParams{sg.p, sg.q, 0}.validate();
      plan.groups.push_back(std::move(sg));
    }
    plan.shared_p = j.value("shared_p", 1.0);
    plan.shared_p_raised = j.value("shared_p_raised", false);
    plan.epsilon = j.value("epsilon", 0.0);
    plan.k_key = j.value("k_key", std::int64_t{1});
    plan.k_tuple = j.value("k_tuple", std::int64_t{1});
    return plan;
  });
}

// Sidecar written next to a sample CSV.
inline json sidecar_json(const Sample& s) {
  json params;
  if (const auto* u = std::get_if<UbsParams>(&s.params)) {
    params = {{"scheme", "ubs"}, {"p", u->p}, {"q", u->q}};
  } else {
    const auto& sp = std::get<SubsSampleParams>(s.params);
    params = {{"scheme", "subs"}, {"group_column", sp.group_column}, {"plan", to_json(sp.plan)}};
  }
  return {{"params", std::move(params)},
          {"seeds", {{"hash_seed", s.hash_seed()}, {"bernoulli_seed", s.bernoulli_seed}, {"table_id", s.table_id}}},
          {"key_column", s.key_column},
          {"source_n", s.source_n},
          {"rows", s.table.size()}};
}

// Rebuilds a sample from its CSV rows and sidecar.
inline Sample sample_from_sidecar(Table rows, const json& j) {
  return parsing("sample sidecar", [&] {
    Sample s;
    s.table = std::move(rows);
    const auto& seeds = j.at("seeds");
    const auto hash_seed = seeds.at("hash_seed").get<std::uint64_t>();
    s.bernoulli_seed = seeds.value("bernoulli_seed", std::uint64_t{0});
    s.table_id = seeds.value("table_id", std::uint64_t{1});
    s.key_column = j.at("key_column").get<std::string>();
    s.source_n = j.value("source_n", std::size_t{0});
    const auto& prm = j.at("params");
    if (prm.at("scheme").get<std::string>() == "ubs") {
      UbsParams u{prm.at("p").get<double>(), prm.at("q").get<double>(), hash_seed};
      u.validate();
      s.params = u;
    } else {
      s.params = SubsSampleParams{subs_plan_from_json(prm.at("plan")), prm.at("group_column").get<std::string>(), hash_seed};
    }
    return s;
  });
}

inline json to_json(const Estimate& e) {
  return {{"agg", std::string(to_string(e.agg))},
          {"estimate", e.value},
          {"variance", e.variance},
          {"stderr", e.stderr_},
          {"ci95", json::array({e.ci_lo, e.ci_hi})},
          {"joined_rows", e.joined_rows},
          {"scale", e.scale},
          {"approximate", e.approximate},
          {"variance_source", e.variance_source}};
}

inline json to_json(const TaylorAvgReport& r) {
  return {{"ES", r.es}, {"EC", r.ec}, {"VarS", r.var_s}, {"VarC", r.var_c}, {"CovSC", r.cov_sc}, {"variance", r.variance}};
}

// Graph file: {"budget": B, "vertices": [{"name", "size", "eps"?}],
//  "edges": [{"v1", "v2", "agg", "weight", "coefficients": {"A","B","C","D"}}
//            or {"v1", "v2", "agg", "weight", "stats1": path, "stats2": path}]}
// Stats paths are relative to the graph file.
inline QueryGraph graph_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
  return parsing("query graph", [&] {
    QueryGraph g;
    g.budget = j.value("budget", 0.0);
    std::map<std::string, std::size_t> index;
    for (const auto& v : j.at("vertices")) {
      QueryVertex qv;
      qv.name = v.at("name").get<std::string>();
      qv.size = v.at("size").get<double>();
      if (v.contains("eps")) qv.eps = v.at("eps").get<double>();
      if (!index.emplace(qv.name, g.vertices.size()).second) throw DomainError("duplicate vertex '" + qv.name + "'");
      g.vertices.push_back(std::move(qv));
    }
    auto vertex = [&](const json& name) {
      auto it = index.find(name.get<std::string>());
      if (it == index.end()) throw DomainError("edge refers to unknown vertex '" + name.get<std::string>() + "'");
      return it->second;
    };
    for (const auto& e : j.at("edges")) {
      QueryEdge qe;
      qe.v1 = vertex(e.at("v1"));
      qe.v2 = vertex(e.at("v2"));
      qe.agg = parse_aggregate(e.value("agg", std::string("count")));
      qe.weight = e.value("weight", 1.0);
      if (e.contains("coefficients")) {
        const auto& c = e.at("coefficients");
        qe.coef = {c.at("A").get<double>(), c.at("B").get<double>(), c.at("C").get<double>(), c.at("D").get<double>()};
      } else {
        const auto s1 = table_stats_from_json(read_json_file((base_dir / e.at("stats1").get<std::string>()).string()));
        const auto s2 = table_stats_from_json(read_json_file((base_dir / e.at("stats2").get<std::string>()).string()));
        if (qe.agg != Aggregate::Count && !s1.has_aggregate) throw DomainError("SUM/AVG edge needs W statistics on v1");
        qe.coef = edge_coefficients(qe.agg, join_sums(s1.records, s2.histogram()));
      }
      g.edges.push_back(qe);
    }
    return g;
  });
}

inline json to_json(const QueryGraph& g, const MultiQueryAssignment& a) {
  json vertices = json::array();
  for (std::size_t v = 0; v < g.vertices.size(); ++v) {
    vertices.push_back({{"name", g.vertices[v].name}, {"eps", a.eps[v]}, {"p", a.p[v]}, {"q", a.eps[v] / a.p[v]}});
  }
  json edges = json::array();
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    edges.push_back({{"v1", g.vertices[g.edges[e].v1].name},
                     {"v2", g.vertices[g.edges[e].v2].name},
                     {"p_e", a.p_edge[e]}});
  }
  return {{"vertices", std::move(vertices)},
          {"edges", std::move(edges)},
          {"objective", a.objective},
          {"budget", g.budget},
          {"budget_used", a.budget_used}};
}

inline json to_json(const BenchRecord& r) {
  json j = {{"scheme", r.scheme},
            {"agg", std::string(to_string(r.agg))},
            {"p1", r.rates.p1},
            {"q1", r.rates.q1},
            {"p2", r.rates.p2},
            {"q2", r.rates.q2},
            {"trials", r.trials},
            {"empty_trials", r.empty_trials},
            {"mc_variance", r.mc_variance},
            {"mean", r.mean},
            {"truth", r.truth},
            {"relative_error", r.relative_error},
            {"kurtosis", r.kurtosis},
            {"gap_bound", r.gap_bound}};
  j["closed_form_variance"] = r.closed_form_variance ? json(*r.closed_form_variance) : json(nullptr);
  return j;
}

}  // namespace joinsample::io
