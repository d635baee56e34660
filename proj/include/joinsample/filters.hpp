#pragma once

// Universe rates for COUNT queries with a WHERE clause on T1 whose constant
// is unknown at sampling time. The variance is averaged over the filter
// constant and minimized in p.

#include <cstdint>
#include <string_view>
#include <vector>

#include "joinsample/error.hpp"
#include "joinsample/planner.hpp"
#include "joinsample/stats.hpp"

namespace joinsample {

enum class FilterMode {
  WorstCase,  // no distributional knowledge: plan for the unfiltered query
  UniformX,   // C >= x, x uniform over the distinct values of C
  Identical,  // C = x, x distributed like the column itself
  KPred,      // C1 >= x1 and ... and Ck >= xk, x uniform over the value grid
  Equality,   // C1 = x1 and ... and Ck = xk, x uniform over observed tuples
};

inline FilterMode parse_filter_mode(std::string_view s) {
  if (s == "worst_case") return FilterMode::WorstCase;
  if (s == "uniform_x") return FilterMode::UniformX;
  if (s == "identical") return FilterMode::Identical;
  if (s == "k_pred") return FilterMode::KPred;
  if (s == "equality") return FilterMode::Equality;
  throw UsageError("unknown filter mode '" + std::string(s) + "'");
}

// Upper bound on grid points x keys examined by the k-predicate average.
inline constexpr double kMaxFilterWork = 5e8;

namespace detail {

// Weighted cross moments of (a_{v,x}, b_v) accumulated over (v, x) cells.
struct FilterSums {
  Moments m;
  double normalizer = 0.0;  // total probability mass of the x distribution (unnormalized)

  void add(double a, double b, double weight) {
    m.g11 += weight * a * b;
    m.g12 += weight * a * b * b;
    m.g21 += weight * a * a * b;
    m.g22 += weight * a * a * b * b;
  }
};

// Calls f(x) for every point of the product grid of distinct values.
template <typename F>
void for_each_grid_point(const std::vector<std::vector<double>>& axes, F&& f) {
  FilterValue x(axes.size());
  std::vector<std::size_t> idx(axes.size(), 0);
  for (const auto& ax : axes) {
    if (ax.empty()) return;
  }
  while (true) {
    for (std::size_t j = 0; j < axes.size(); ++j) x[j] = axes[j][idx[j]];
    f(x);
    std::size_t j = 0;
    while (j < axes.size() && ++idx[j] == axes[j].size()) idx[j++] = 0;
    if (j == axes.size()) return;
  }
}

}  // namespace detail

inline Plan opt_filter(FilterMode mode, const ConditionalHistogram& cond, const JoinKeyHistogram& hist2, double eps1,
                       double eps2) {
  check_budgets(eps1, eps2);
  if (mode == FilterMode::WorstCase) {
    Plan plan = opt_central(Aggregate::Count, JoinSums{cross_moments(cond.marginal(), hist2), 0, 0, 0, 0, {}}, eps1, eps2);
    plan.objective = "worst_case_filter";
    return plan;
  }
  detail::FilterSums sums;
  switch (mode) {
    case FilterMode::UniformX:
    case FilterMode::KPred: {
      if (mode == FilterMode::UniformX && cond.dimensions() != 1) {
        throw DomainError("uniform_x takes exactly one filter column; use k_pred for several");
      }
      if (cond.dimensions() == 1) {
        sums.normalizer = static_cast<double>(cond.distinct_values()[0].size());
        for (const auto& [key, xs] : cond.counts()) {
          const double b = static_cast<double>(hist2.frequency(key));
          if (b == 0.0) continue;
          for (auto a : cond.geq_profile(key)) sums.add(static_cast<double>(a), b, 1.0);
        }
      } else {
        double grid = 1.0;
        for (const auto& ax : cond.distinct_values()) grid *= static_cast<double>(ax.size());
        if (grid * static_cast<double>(cond.n1()) > kMaxFilterWork) {
          throw DomainError("k-predicate filter grid too large to average exactly");
        }
        sums.normalizer = grid;
        detail::for_each_grid_point(cond.distinct_values(), [&](const FilterValue& x) {
          for (const auto& [key, xs] : cond.counts()) {
            const double b = static_cast<double>(hist2.frequency(key));
            if (b == 0.0) continue;
            sums.add(static_cast<double>(cond.a_v_geq(key, x)), b, 1.0);
          }
        });
      }
      break;
    }
    case FilterMode::Identical:
    case FilterMode::Equality:
      sums.normalizer = mode == FilterMode::Identical ? static_cast<double>(cond.n1()) : static_cast<double>(cond.m_c());
      for (const auto& [key, xs] : cond.counts()) {
        const double b = static_cast<double>(hist2.frequency(key));
        if (b == 0.0) continue;
        for (const auto& [x, a] : xs) {
          const double weight = mode == FilterMode::Identical ? static_cast<double>(cond.value_counts().at(x)) : 1.0;
          sums.add(static_cast<double>(a), b, weight);
        }
      }
      break;
    case FilterMode::WorstCase:
      break;
  }
  if (!(sums.m.g11 > 0.0)) throw DomainError("no filtered tuple ever joins: average variance is identically zero");
  bool degenerate = false;
  const double p = sqrt_rule(sums.m.excess(), sums.m.g11, eps1, eps2, &degenerate);
  Plan plan = make_plan(p, eps1, eps2, PlanMode::Centralized);
  plan.degenerate = degenerate;
  plan.predicted_variance = closed_form_variance(plan.p, eps1, eps2, weights_of(sums.m)) / sums.normalizer;
  plan.objective = "filter_average_variance";
  return plan;
}

}  // namespace joinsample
