// joinsample: command-line workbench for planning, drawing and evaluating
// join samples. Exit status: 0 success, 1 domain/data error, 2 usage error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "joinsample/ams.hpp"
#include "joinsample/bench.hpp"
#include "joinsample/datagen.hpp"
#include "joinsample/error.hpp"
#include "joinsample/estimator.hpp"
#include "joinsample/filters.hpp"
#include "joinsample/io.hpp"
#include "joinsample/multi_query.hpp"
#include "joinsample/oracle.hpp"
#include "joinsample/planner.hpp"
#include "joinsample/protocol.hpp"
#include "joinsample/sampler.hpp"
#include "joinsample/subs.hpp"
#include "joinsample/table.hpp"

namespace js = joinsample;
using nlohmann::json;

namespace {

// (0, 1]
const CLI::Validator kRate = CLI::Validator(
    [](std::string& s) -> std::string {
      double v = 0.0;
      try {
        std::size_t pos = 0;
        v = std::stod(s, &pos);
        if (pos != s.size()) return "not a number: " + s;
      } catch (const std::exception&) {
        return "not a number: " + s;
      }
      if (!(v > 0.0 && v <= 1.0)) return "value " + s + " not in (0, 1]";
      return {};
    },
    "RATE in (0,1]", "rate");

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    js::io::write_json_file(out_path, j);
  }
}

std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

js::io::TableStats load_stats(const std::string& path) {
  return js::io::table_stats_from_json(js::io::read_json_file(path));
}

// ---------------------------------------------------------------- datagen
struct DatagenArgs {
  std::string dist1 = "uniform", dist2 = "uniform";
  std::int64_t n1 = 100000, n2 = 100000, domain1 = 10000, domain2 = 10000;
  double alpha1 = 1.5, alpha2 = 1.5;
  std::optional<double> worst_case_frac;
  std::uint64_t seed = 1;
  std::string out1 = "t1.csv", out2 = "t2.csv";
};

void add_datagen(CLI::App& app, DatagenArgs& a) {
  auto* c = app.add_subcommand("datagen", "Generate synthetic T1 (J, W) and T2 (J) tables");
  c->add_option("--dist1", a.dist1, "uniform|normal|power_law")->capture_default_str();
  c->add_option("--dist2", a.dist2, "uniform|normal|power_law")->capture_default_str();
  c->add_option("--n1", a.n1)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--n2", a.n2)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--domain1", a.domain1)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--domain2", a.domain2)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--alpha1", a.alpha1)->capture_default_str();
  c->add_option("--alpha2", a.alpha2)->capture_default_str();
  c->add_option("--worst-case-frac", a.worst_case_frac, "Build T2 adversarially from T1 with this heavy fraction")
      ->check(CLI::Range(0.0, 1.0));
  c->add_option("--seed", a.seed)->capture_default_str();
  c->add_option("--out1", a.out1)->capture_default_str();
  c->add_option("--out2", a.out2)->capture_default_str();
  c->callback([&a] {
    const js::DistSpec s1{js::parse_dist_kind(a.dist1), a.n1, a.domain1, a.alpha1};
    const js::DistSpec s2{js::parse_dist_kind(a.dist2), a.n2, a.domain2, a.alpha2};
    auto [t1, t2] = js::gen_synthetic(s1, s2, js::WeightSpec{}, a.seed);
    if (a.worst_case_frac) {
      t2 = js::gen_worst_case_t2(js::build_histogram(t1, "J"), a.n2, *a.worst_case_frac, a.domain2, a.seed);
    }
    js::csv::write_file(a.out1, t1);
    js::csv::write_file(a.out2, t2);
  });
}

// ---------------------------------------------------------------- stats
struct StatsArgs {
  std::string table, key = "J", w, other, other_key, out;
};

void add_stats(CLI::App& app, StatsArgs& a) {
  auto* c = app.add_subcommand("stats", "Per-key statistics of one table");
  c->add_option("--table", a.table)->required()->check(CLI::ExistingFile);
  c->add_option("--key", a.key, "Join column(s), comma separated")->capture_default_str();
  c->add_option("--w", a.w, "Aggregate column");
  c->add_option("--other", a.other, "Other table: adds gamma/beta cross moments")->check(CLI::ExistingFile);
  c->add_option("--other-key", a.other_key, "Join column of the other table (default: --key)");
  c->add_option("--out", a.out);
  c->callback([&a] {
    const auto t = js::csv::read_file(a.table);
    const auto s = js::io::table_stats(t, a.key, a.w);
    std::optional<js::JoinSums> sums;
    if (!a.other.empty()) {
      const auto o = js::csv::read_file(a.other);
      sums = js::join_sums(s.records, js::build_histogram(o, a.other_key.empty() ? a.key : a.other_key));
    }
    emit(js::io::to_json(s, sums), a.out);
  });
}

// ---------------------------------------------------------------- plan
struct PlanArgs {
  std::string agg = "count", mode = "central", stats1, stats2, out;
  std::optional<std::int64_t> f_a, f_b, n_b;
  double eps1 = 0.01, eps2 = 0.01;
  std::string filter_mode, t1, key = "J", filter;
  std::uint32_t sketch_width = js::kDefaultSketchWidth, sketch_depth = js::kDefaultSketchDepth;
  std::uint64_t seed = 1;
};

void add_plan(CLI::App& app, PlanArgs& a) {
  auto* c = app.add_subcommand("plan", "Optimal UBS parameters for one join");
  c->add_option("--agg", a.agg, "count|sum|avg")->capture_default_str();
  c->add_option("--mode", a.mode, "central|decentral")->capture_default_str()->check(CLI::IsMember({"central", "decentral"}));
  c->add_option("--stats1", a.stats1, "Statistics of T1 (from `stats`)")->check(CLI::ExistingFile);
  c->add_option("--stats2", a.stats2, "Statistics of T2")->check(CLI::ExistingFile);
  c->add_option("--F-a", a.f_a, "Maximum key frequency of T1")->check(CLI::PositiveNumber);
  c->add_option("--F-b", a.f_b, "Maximum key frequency of T2")->check(CLI::PositiveNumber);
  c->add_option("--n-b", a.n_b, "Size of T2")->check(CLI::PositiveNumber);
  c->add_option("--eps1", a.eps1)->capture_default_str()->check(kRate);
  c->add_option("--eps2", a.eps2)->capture_default_str()->check(kRate);
  c->add_option("--filter-mode", a.filter_mode, "worst_case|uniform_x|identical|k_pred|equality");
  c->add_option("--t1", a.t1, "T1 CSV (filter planning)")->check(CLI::ExistingFile);
  c->add_option("--key", a.key, "T1 join column (filter planning)")->capture_default_str();
  c->add_option("--filter", a.filter, "Filter column(s) of T1, comma separated");
  c->add_option("--sketch-width", a.sketch_width)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--sketch-depth", a.sketch_depth)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--seed", a.seed, "Sketch seed")->capture_default_str();
  c->add_option("--out", a.out);
  c->callback([&a] {
    const auto agg = js::parse_aggregate(a.agg);
    js::Plan plan;
    if (!a.filter_mode.empty()) {
      if (agg != js::Aggregate::Count) throw js::UsageError("filter planning is defined for COUNT");
      if (a.t1.empty() || a.filter.empty() || a.stats2.empty()) {
        throw js::UsageError("--filter-mode needs --t1, --filter and --stats2");
      }
      const auto cond = js::ConditionalHistogram::build(js::csv::read_file(a.t1), a.key, split(a.filter));
      plan = js::opt_filter(js::parse_filter_mode(a.filter_mode), cond, load_stats(a.stats2).histogram(), a.eps1, a.eps2);
    } else if (a.mode == "central") {
      if (a.stats1.empty() || a.stats2.empty()) throw js::UsageError("central planning needs --stats1 and --stats2");
      const auto s1 = load_stats(a.stats1);
      if (agg != js::Aggregate::Count && !s1.has_aggregate) throw js::UsageError("--stats1 has no aggregate column");
      plan = js::opt_central(agg, js::join_sums(s1.records, load_stats(a.stats2).histogram()), a.eps1, a.eps2);
    } else {
      switch (agg) {
        case js::Aggregate::Count: {
          auto fa = a.f_a, fb = a.f_b;
          if (!fa && !a.stats1.empty()) fa = js::max_frequency(load_stats(a.stats1).histogram());
          if (!fb && !a.stats2.empty()) fb = js::max_frequency(load_stats(a.stats2).histogram());
          if (!fa || !fb) throw js::UsageError("decentral COUNT needs --F-a and --F-b (or --stats1/--stats2)");
          plan = js::opt_count_decentral(*fa, *fb, a.eps1, a.eps2);
          break;
        }
        case js::Aggregate::Sum: {
          if (a.stats1.empty()) throw js::UsageError("decentral SUM needs --stats1");
          auto nb = a.n_b;
          if (!nb && !a.stats2.empty()) nb = load_stats(a.stats2).n();
          if (!nb) throw js::UsageError("decentral SUM needs --n-b (or --stats2)");
          const auto s1 = load_stats(a.stats1);
          if (!s1.has_aggregate) throw js::UsageError("--stats1 has no aggregate column");
          plan = js::opt_sum_decentral(s1.records, *nb, a.eps1, a.eps2).plan;
          break;
        }
        case js::Aggregate::Avg: {
          if (a.stats1.empty() || a.stats2.empty()) throw js::UsageError("decentral AVG needs --stats1 and --stats2");
          const auto s1 = load_stats(a.stats1);
          if (!s1.has_aggregate) throw js::UsageError("--stats1 has no aggregate column");
          const auto x = js::sketch_t1(s1.records, a.sketch_width, a.sketch_depth, a.seed);
          const auto y = js::sketch_t2(load_stats(a.stats2).histogram(), a.sketch_width, a.sketch_depth, a.seed);
          plan = js::opt_avg_decentral(x, y, a.eps1, a.eps2);
          break;
        }
      }
    }
    emit(js::io::to_json(plan), a.out);
  });
}

// ---------------------------------------------------------------- plan-multi
struct PlanMultiArgs {
  std::string graph, out;
  std::optional<double> budget;
  std::uint64_t seed = 1;
  int restarts = 16, iterations = 2000;
};

void add_plan_multi(CLI::App& app, PlanMultiArgs& a) {
  auto* c = app.add_subcommand("plan-multi", "Joint rates for several joins sharing tables");
  c->add_option("--graph", a.graph)->required()->check(CLI::ExistingFile);
  c->add_option("--budget", a.budget, "Total sampled tuples (overrides the graph file)")->check(CLI::PositiveNumber);
  c->add_option("--seed", a.seed)->capture_default_str();
  c->add_option("--restarts", a.restarts)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--iterations", a.iterations)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--out", a.out);
  c->callback([&a] {
    auto g = js::io::graph_from_json(js::io::read_json_file(a.graph), std::filesystem::path(a.graph).parent_path());
    if (a.budget) g.budget = *a.budget;
    js::MultiQueryOptions opt;
    opt.seed = a.seed;
    opt.restarts = a.restarts;
    opt.iterations = a.iterations;
    emit(js::io::to_json(g, js::solve_multi_query(g, opt)), a.out);
  });
}

// ---------------------------------------------------------------- sample
struct SampleArgs {
  std::string table, key = "J", group, plan, subs_plan, out = "sample.csv";
  std::optional<double> p, q, subs_eps, shared_p;
  int side = 1;
  std::int64_t k_key = 1, k_tuple = 1;
  std::uint64_t seed = 1, table_id = 0;
  unsigned threads = 1;
};

void add_sample(CLI::App& app, SampleArgs& a) {
  auto* c = app.add_subcommand("sample", "Draw a UBS or SUBS sample; writes CSV plus a .json sidecar");
  c->add_option("--table", a.table)->required()->check(CLI::ExistingFile);
  c->add_option("--key", a.key)->capture_default_str();
  c->add_option("--p", a.p)->check(kRate);
  c->add_option("--q", a.q)->check(kRate);
  c->add_option("--plan", a.plan, "Plan JSON from `plan`/`protocol`")->check(CLI::ExistingFile);
  c->add_option("--side", a.side, "Which table of the plan this is (1 or 2)")->capture_default_str()->check(CLI::IsMember({1, 2}));
  c->add_option("--group", a.group, "Group column: draw a SUBS sample");
  c->add_option("--subs-plan", a.subs_plan, "SUBS plan JSON")->check(CLI::ExistingFile);
  c->add_option("--eps", a.subs_eps, "SUBS budget (plans inline)")->check(kRate);
  c->add_option("--k-key", a.k_key)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--k-tuple", a.k_tuple)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--shared-p", a.shared_p)->check(kRate);
  c->add_option("--seed", a.seed, "Shared hash seed; use the same value for both tables")->capture_default_str();
  c->add_option("--table-id", a.table_id, "Bernoulli stream id (default: --side)");
  c->add_option("--threads", a.threads)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--out", a.out)->capture_default_str();
  c->callback([&a] {
    const auto t = js::csv::read_file(a.table);
    const std::uint64_t table_id = a.table_id ? a.table_id : static_cast<std::uint64_t>(a.side);
    const std::uint64_t bseed = js::derive_seed(a.seed, table_id, 0xb);
    js::Sample s;
    if (!a.group.empty()) {
      js::SubsPlan plan;
      if (!a.subs_plan.empty()) {
        plan = js::io::subs_plan_from_json(js::io::read_json_file(a.subs_plan));
      } else {
        if (!a.subs_eps) throw js::UsageError("SUBS sampling needs --subs-plan or --eps");
        auto r = js::subs_plan(js::group_summaries(t, a.key, a.group), *a.subs_eps, a.k_key, a.k_tuple, a.shared_p);
        if (!r.feasible()) throw js::DomainError("SUBS plan infeasible: " + r.infeasible);
        plan = *r.plan;
      }
      s = js::subs_sample(t, a.key, a.group, plan, a.seed, bseed, table_id);
    } else {
      js::UbsParams prm{1.0, 1.0, a.seed};
      if (!a.plan.empty()) {
        if (a.p || a.q) throw js::UsageError("give either --plan or --p/--q");
        const auto plan = js::io::plan_from_json(js::io::read_json_file(a.plan));
        prm.p = plan.p;
        prm.q = a.side == 1 ? plan.q1 : plan.q2;
      } else {
        if (!a.p || !a.q) throw js::UsageError("UBS sampling needs --p and --q (or --plan)");
        prm.p = *a.p;
        prm.q = *a.q;
      }
      s = js::ubs_sample(t, a.key, prm, bseed, table_id, a.threads);
    }
    js::csv::write_file(a.out, s.table);
    js::io::write_json_file(a.out + ".json", js::io::sidecar_json(s));
  });
}

// ---------------------------------------------------------------- estimate
struct EstimateArgs {
  std::string agg = "count", s1, s2, params1, params2, w, stats1, stats2, group, out;
};

js::Sample load_sample(const std::string& csv_path, const std::string& sidecar_path) {
  return js::io::sample_from_sidecar(js::csv::read_file(csv_path),
                                     js::io::read_json_file(sidecar_path.empty() ? csv_path + ".json" : sidecar_path));
}

void add_estimate(CLI::App& app, EstimateArgs& a) {
  auto* c = app.add_subcommand("estimate", "Estimate COUNT/SUM/AVG of T1 join T2 from two samples");
  c->add_option("--agg", a.agg, "count|sum|avg")->capture_default_str();
  c->add_option("--s1", a.s1)->required()->check(CLI::ExistingFile);
  c->add_option("--s2", a.s2)->required()->check(CLI::ExistingFile);
  c->add_option("--params1", a.params1, "Sidecar of s1 (default: <s1>.json)");
  c->add_option("--params2", a.params2, "Sidecar of s2 (default: <s2>.json)");
  c->add_option("--w", a.w, "Aggregate column of T1");
  c->add_option("--stats1", a.stats1, "Exact T1 statistics: closed-form variance")->check(CLI::ExistingFile);
  c->add_option("--stats2", a.stats2, "Exact T2 statistics")->check(CLI::ExistingFile);
  c->add_option("--group", a.group, "SUBS samples: estimate within this group of s1");
  c->add_option("--out", a.out);
  c->callback([&a] {
    const auto agg = js::parse_aggregate(a.agg);
    auto s1 = load_sample(a.s1, a.params1);
    auto s2 = load_sample(a.s2, a.params2);
    if (!a.group.empty()) s1 = js::subs_group_view(s1, a.group);
    std::optional<js::JoinSums> sums;
    if (!a.stats1.empty() != !a.stats2.empty()) throw js::UsageError("give both --stats1 and --stats2 or neither");
    if (!a.stats1.empty()) sums = js::join_sums(load_stats(a.stats1).records, load_stats(a.stats2).histogram());
    emit(js::io::to_json(js::estimate(agg, s1, s2, a.w, sums)), a.out);
  });
}

// ---------------------------------------------------------------- bench
struct BenchArgs {
  std::string t1, t2, key1 = "J", key2 = "J", w = "W", aggs = "count,sum,avg", out, csv_out;
  double eps = 0.01;
  std::size_t beta = 500;
  bool baselines = false, opt = false;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

void add_bench(CLI::App& app, BenchArgs& a) {
  auto* c = app.add_subcommand("bench", "Monte-Carlo variance of OPT and the six baselines");
  c->add_option("--t1", a.t1)->required()->check(CLI::ExistingFile);
  c->add_option("--t2", a.t2)->required()->check(CLI::ExistingFile);
  c->add_option("--key1", a.key1)->capture_default_str();
  c->add_option("--key2", a.key2)->capture_default_str();
  c->add_option("--w", a.w)->capture_default_str();
  c->add_option("--agg", a.aggs, "Comma-separated aggregates")->capture_default_str();
  c->add_option("--eps", a.eps, "Budget of each table")->capture_default_str()->check(kRate);
  c->add_option("--beta", a.beta, "Trials per scheme")->capture_default_str()->check(CLI::Range(2, 100000000));
  c->add_flag("--baselines", a.baselines, "Include B1..B6");
  c->add_flag("--opt", a.opt, "Include the centralized optimum");
  c->add_option("--seed", a.seed)->capture_default_str();
  c->add_option("--threads", a.threads)->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--out", a.out, "JSON report path (default stdout)");
  c->add_option("--csv", a.csv_out, "Also write a flat CSV table");
  c->callback([&a] {
    if (!a.baselines && !a.opt) a.baselines = a.opt = true;
    const auto t1 = js::csv::read_file(a.t1);
    const auto t2 = js::csv::read_file(a.t2);
    const auto work = js::JoinWorkload::build(t1, a.key1, t2, a.key2, a.w);
    const auto sums = js::join_sums(js::key_aggregates(t1, a.key1, a.w), js::build_histogram(t2, a.key2));
    json records = json::array();
    js::Table flat{{"agg", "scheme", "p", "q", "mc_variance", "closed_form_variance", "relative_error", "empty_trials"}, {}};
    for (const auto& name : split(a.aggs)) {
      const auto agg = js::parse_aggregate(name);
      std::vector<js::NamedParams> schemes;
      if (a.opt) {
        const auto plan = js::opt_central(agg, sums, a.eps, a.eps);
        schemes.push_back({"OPT", plan.p, plan.q1});
      }
      if (a.baselines) {
        for (auto& b : js::baseline_grid(a.eps)) schemes.push_back(b);
      }
      for (const auto& sc : schemes) {
        const auto o = js::run_trials(work, {sc.p, sc.q, sc.p, sc.q}, a.beta, a.seed, a.threads);
        const auto rec = js::bench_record(sc.name, agg, o, sums);
        records.push_back(js::io::to_json(rec));
        std::ostringstream cf;
        if (rec.closed_form_variance) cf << *rec.closed_form_variance;
        flat.rows.push_back({name, sc.name, std::to_string(sc.p), std::to_string(sc.q), std::to_string(rec.mc_variance),
                             cf.str(), std::to_string(rec.relative_error), std::to_string(rec.empty_trials)});
      }
    }
    emit({{"eps", a.eps}, {"beta", a.beta}, {"seed", a.seed}, {"records", records}}, a.out);
    if (!a.csv_out.empty()) js::csv::write_file(a.csv_out, flat);
  });
}

// ---------------------------------------------------------------- protocol
struct ProtocolArgs {
  std::string mode = "dictator", agg = "count", t1, t2, key1 = "J", key2 = "J", w, transcript, replay, out;
  double eps1 = 0.01, eps2 = 0.01;
  std::uint64_t seed = 1;
};

void add_protocol(CLI::App& app, ProtocolArgs& a) {
  auto* c = app.add_subcommand("protocol", "Simulate the two-party Dictatorship or Voter protocol");
  c->add_option("--mode", a.mode, "dictator|voter")->capture_default_str()->check(CLI::IsMember({"dictator", "voter"}));
  c->add_option("--agg", a.agg, "count|sum|avg")->capture_default_str();
  c->add_option("--t1", a.t1)->required()->check(CLI::ExistingFile);
  c->add_option("--t2", a.t2)->required()->check(CLI::ExistingFile);
  c->add_option("--key1", a.key1)->capture_default_str();
  c->add_option("--key2", a.key2)->capture_default_str();
  c->add_option("--w", a.w, "Aggregate column of T1 (SUM/AVG)");
  c->add_option("--eps1", a.eps1)->capture_default_str()->check(kRate);
  c->add_option("--eps2", a.eps2)->capture_default_str()->check(kRate);
  c->add_option("--seed", a.seed, "Seed for the parties' hash-seed shares")->capture_default_str();
  c->add_option("--transcript", a.transcript, "Write the JSONL transcript here");
  c->add_option("--replay", a.replay, "Replay this JSONL transcript instead of running")->check(CLI::ExistingFile);
  c->add_option("--out", a.out, "Plan JSON path (default stdout)");
  c->callback([&a] {
    const auto agg = js::parse_aggregate(a.agg);
    if (agg != js::Aggregate::Count && a.w.empty()) throw js::UsageError("SUM/AVG need --w");
    const auto t1 = js::csv::read_file(a.t1);
    const auto t2 = js::csv::read_file(a.t2);
    js::PartyState p1{1, js::build_histogram(t1, a.key1), std::nullopt, a.eps1, static_cast<std::int64_t>(t1.size()),
                      js::derive_seed(a.seed, 1)};
    if (!a.w.empty()) p1.aggregates = js::key_aggregates(t1, a.key1, a.w);
    js::PartyState p2{2, js::build_histogram(t2, a.key2), std::nullopt, a.eps2, static_cast<std::int64_t>(t2.size()),
                      js::derive_seed(a.seed, 2)};
    const js::ProtocolConfig cfg{js::parse_protocol_mode(a.mode), agg};
    js::ProtocolOutcome res;
    if (!a.replay.empty()) {
      std::ifstream in(a.replay);
      res = js::replay(js::Transcript::read_jsonl(in), std::move(p1), std::move(p2), cfg);
    } else {
      res = js::run_protocol(std::move(p1), std::move(p2), cfg);
    }
    if (!a.transcript.empty()) {
      std::ofstream out(a.transcript);
      if (!out) throw js::ConfigError("cannot write '" + a.transcript + "'");
      res.transcript.write_jsonl(out);
    }
    json j = js::io::to_json(res.plan);
    j["hash_seed"] = res.hash_seed;
    j["messages"] = res.transcript.messages.size();
    j["scalars_after_hello"] = res.transcript.scalars_after_hello();
    emit(j, a.out);
  });
}

// ---------------------------------------------------------------- oracle
struct OracleArgs {
  std::string keys1, keys2, w1, agg = "count";
  double p1 = 1.0, q1 = 1.0, p2 = 1.0, q2 = 1.0;
};

void add_oracle(CLI::App& app, OracleArgs& a) {
  auto* c = app.add_subcommand("oracle", "Exact estimator moments of a tiny instance by enumeration");
  c->add_option("--keys1", a.keys1, "T1 join keys, comma separated")->required();
  c->add_option("--keys2", a.keys2, "T2 join keys, comma separated")->required();
  c->add_option("--w1", a.w1, "T1 aggregate values, comma separated");
  c->add_option("--agg", a.agg, "count|sum|avg")->capture_default_str();
  c->add_option("--p1", a.p1)->capture_default_str()->check(kRate);
  c->add_option("--q1", a.q1)->capture_default_str()->check(kRate);
  c->add_option("--p2", a.p2)->capture_default_str()->check(kRate);
  c->add_option("--q2", a.q2)->capture_default_str()->check(kRate);
  c->callback([&a] {
    const auto agg = js::parse_aggregate(a.agg);
    js::oracle::TinyInstance inst;
    for (auto& k : split(a.keys1)) inst.keys1.push_back(js::canonical_key(k));
    for (auto& k : split(a.keys2)) inst.keys2.push_back(js::canonical_key(k));
    for (auto& w : split(a.w1)) inst.w1.push_back(js::parse_double(w, "w1"));
    inst.p1 = a.p1;
    inst.q1 = a.q1;
    inst.p2 = a.p2;
    inst.q2 = a.q2;
    json j = {{"agg", std::string(js::to_string(agg))}, {"truth", js::oracle::true_aggregate(inst, agg)}};
    if (agg == js::Aggregate::Avg) {
      const auto m = js::oracle::enumerate_avg(inst);
      j["mean"] = m.mean;
      j["variance"] = m.variance;
      j["p_empty"] = m.p_empty;
    } else {
      const auto m = js::oracle::enumerate_moments(inst, agg);
      j["mean"] = m.mean;
      j["variance"] = m.variance;
    }
    std::cout << j.dump(2) << '\n';
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampling-based approximation of two-table join aggregates"};
  app.require_subcommand(1);
  DatagenArgs datagen;
  StatsArgs stats;
  PlanArgs plan;
  PlanMultiArgs plan_multi;
  SampleArgs sample;
  EstimateArgs est;
  BenchArgs bench;
  ProtocolArgs protocol;
  OracleArgs oracle;
  add_datagen(app, datagen);
  add_stats(app, stats);
  add_plan(app, plan);
  add_plan_multi(app, plan_multi);
  add_sample(app, sample);
  add_estimate(app, est);
  add_bench(app, bench);
  add_protocol(app, protocol);
  add_oracle(app, oracle);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const js::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n' << app.help();
    return 2;
  } catch (const js::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
