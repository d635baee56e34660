#pragma once

// Variance-optimal shared universe rate p for two-table UBS joins. Every
// objective is of the form  alpha / p + beta * p + const  on
// [max(eps1, eps2), 1], so most optima are a clamped square root.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "joinsample/error.hpp"
#include "joinsample/estimator.hpp"
#include "joinsample/stats.hpp"

namespace joinsample {

enum class PlanMode { Centralized, Decentralized };

inline std::string_view to_string(PlanMode m) noexcept {
  return m == PlanMode::Centralized ? "central" : "decentral";
}

struct Plan {
  double p = 1.0;
  double q1 = 1.0;
  double q2 = 1.0;
  double predicted_variance = 0.0;
  PlanMode mode = PlanMode::Centralized;
  // What predicted_variance measures, e.g. "variance", "worst_case_per_key".
  std::string objective = "variance";
  bool degenerate = false;  // radicand was 0/0 or negative; p fell back to max(eps1, eps2)
};

inline void check_budgets(double eps1, double eps2) {
  if (!(eps1 > 0.0 && eps1 <= 1.0)) throw DomainError("eps1 must be in (0, 1], got " + std::to_string(eps1));
  if (!(eps2 > 0.0 && eps2 <= 1.0)) throw DomainError("eps2 must be in (0, 1], got " + std::to_string(eps2));
}

inline double clamp_rate(double p, double eps1, double eps2) noexcept {
  return std::min(1.0, std::max(std::max(eps1, eps2), p));
}

// q_i = eps_i / p; for p == max(eps) one of them is exactly 1.
inline Plan make_plan(double p, double eps1, double eps2, PlanMode mode) {
  check_budgets(eps1, eps2);
  Plan plan;
  plan.p = clamp_rate(p, eps1, eps2);
  plan.q1 = std::min(1.0, eps1 / plan.p);
  plan.q2 = std::min(1.0, eps2 / plan.p);
  plan.mode = mode;
  return plan;
}

// argmin over [max(eps), 1] of  numer / (eps1 eps2 p) + denom * p / (eps1 eps2),
// i.e. clamp(sqrt(eps1 eps2 numer / denom)). A non-positive numerator makes
// the objective increasing in p, so the lower end wins.
inline double sqrt_rule(double numer, double denom, double eps1, double eps2, bool* degenerate = nullptr) {
  const bool bad = !(denom > 0.0) || !(numer > 0.0) || !std::isfinite(numer) || !std::isfinite(denom);
  if (degenerate) *degenerate = bad;
  if (bad) return std::max(eps1, eps2);
  return clamp_rate(std::sqrt(eps1 * eps2 * (numer / denom)), eps1, eps2);
}

// Centralized COUNT/SUM: p = clamp(sqrt(eps1 eps2 (x22 - x21 - x12 + x11) / x11)).
// For SUM the weights are the betas, giving (b4 - b1 - b2 + b3) / b3.
inline Plan opt_central(const VarianceWeights& w, double eps1, double eps2) {
  check_budgets(eps1, eps2);
  bool degenerate = false;
  const double p = sqrt_rule(w.x22 - w.x21 - w.x12 + w.x11, w.x11, eps1, eps2, &degenerate);
  Plan plan = make_plan(p, eps1, eps2, PlanMode::Centralized);
  plan.degenerate = degenerate;
  plan.predicted_variance = closed_form_variance(plan.p, eps1, eps2, w);
  return plan;
}

// Worst-case b for T1's histogram: all of T2's n_b tuples on the most
// frequent key of T1 (ties go to the smallest key).
inline JoinKeyHistogram worst_case_b(const JoinKeyHistogram& hist_a, std::int64_t n_b) {
  if (hist_a.empty()) throw DomainError("worst_case_b needs a non-empty histogram");
  if (n_b < 1) throw DomainError("n_b must be >= 1");
  const std::string* best = nullptr;
  std::int64_t best_f = 0;
  for (const auto& [k, f] : hist_a.entries()) {
    if (f > best_f) {
      best_f = f;
      best = &k;
    }
  }
  JoinKeyHistogram b;
  b.add(*best, n_b);
  return b;
}

// Decentralized COUNT from the two maximum frequencies only: the flat
// instance a = F_a, b = F_b bounds every key.
inline Plan opt_count_decentral(std::int64_t f_a, std::int64_t f_b, double eps1, double eps2) {
  check_budgets(eps1, eps2);
  if (f_a < 1 || f_b < 1) throw DomainError("maximum frequencies must be >= 1");
  const double fa = static_cast<double>(f_a);
  const double fb = static_cast<double>(f_b);
  // Per-key moments of the flat worst case; same arithmetic path as opt_central.
  const auto w = weights_of(Moments{fa * fb, fa * fb * fb, fa * fa * fb, fa * fa * fb * fb});
  bool degenerate = false;
  const double p = sqrt_rule(w.x22 - w.x21 - w.x12 + w.x11, w.x11, eps1, eps2, &degenerate);
  Plan plan = make_plan(p, eps1, eps2, PlanMode::Decentralized);
  plan.degenerate = degenerate;
  plan.predicted_variance = closed_form_variance(plan.p, eps1, eps2, w);
  plan.objective = "worst_case_per_key";
  return plan;
}

// A function h(p) = slope * p + inv / p + constant.
struct InverseLinear {
  double slope = 0.0;
  double inv = 0.0;
  double constant = 0.0;

  [[nodiscard]] double operator()(double p) const noexcept { return slope * p + inv / p + constant; }
};

// Closed-form variance written as slope * p + inv / p + constant.
inline InverseLinear as_inverse_linear(const VarianceWeights& w, double eps1, double eps2) {
  return {w.x11 / (eps1 * eps2), w.x22 - w.x21 - w.x12 + w.x11,
          -w.x22 + w.x21 / eps2 + w.x12 / eps1 - w.x11 / eps1 - w.x11 / eps2};
}

// Variance when all n_b tuples of T2 sit on key `r` of T1.
inline VarianceWeights point_mass_weights(const KeyAggregate& r, double n_b) {
  const double a = static_cast<double>(r.a);
  const double sq = a * a * r.mu * r.mu;    // a^2 mu^2
  const double lin = a * r.second_moment();  // a (mu^2 + sigma^2)
  return {lin * n_b, lin * n_b * n_b, sq * n_b, sq * n_b * n_b};
}

inline double h_key(const KeyAggregate& r, double n_b, double p, double eps1, double eps2) {
  return closed_form_variance(p, eps1, eps2, point_mass_weights(r, n_b));
}

// max over every key v of h_v(p): the exact worst-case SUM variance.
inline double h_star(const KeyAggregates& recs, double n_b, double p, double eps1, double eps2) {
  double best = 0.0;
  for (const auto& r : recs) best = std::max(best, h_key(r, n_b, p, eps1, eps2));
  return best;
}

struct SumDecentralResult {
  Plan plan;
  std::size_t v1 = 0;  // argmax a^2 mu^2
  std::size_t v2 = 0;  // argmax a (mu^2 + sigma^2)
  std::vector<double> candidates;
};

// Two-key surrogate h'(p) = max(h_{v1}(p), h_{v2}(p)) of the worst-case SUM
// variance; within a factor 2 of h*(p) pointwise. Its minimizer is among
// the crossing points of h_{v1} and h_{v2}, their individual minimizers,
// and the interval ends.
inline SumDecentralResult opt_sum_decentral(const KeyAggregates& recs, std::int64_t n_b, double eps1, double eps2) {
  check_budgets(eps1, eps2);
  if (recs.empty()) throw DomainError("opt_sum_decentral needs T1 statistics");
  if (n_b < 1) throw DomainError("n_b must be >= 1");
  const double nb = static_cast<double>(n_b);
  SumDecentralResult res;
  double best_sq = -1.0, best_lin = -1.0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const double a = static_cast<double>(recs[i].a);
    const double sq = a * a * recs[i].mu * recs[i].mu;
    const double lin = a * recs[i].second_moment();
    if (sq > best_sq) {
      best_sq = sq;
      res.v1 = i;
    }
    if (lin > best_lin) {
      best_lin = lin;
      res.v2 = i;
    }
  }
  const double lo = std::max(eps1, eps2);
  if (best_lin <= 0.0) {
    res.plan = make_plan(lo, eps1, eps2, PlanMode::Decentralized);
    res.plan.degenerate = true;
    res.plan.objective = "worst_case_two_key";
    return res;
  }
  const auto w1 = point_mass_weights(recs[res.v1], nb);
  const auto w2 = point_mass_weights(recs[res.v2], nb);
  const auto minimizer = [&](const VarianceWeights& w) {
    return sqrt_rule(w.x22 - w.x21 - w.x12 + w.x11, w.x11, eps1, eps2);
  };
  if (res.v1 == res.v2) {
    res.candidates = {minimizer(w1)};
  } else {
    const auto h1 = as_inverse_linear(w1, eps1, eps2);
    const auto h2 = as_inverse_linear(w2, eps1, eps2);
    // h1 = h2  <=>  da p^2 + dc p + db = 0
    const double da = h1.slope - h2.slope;
    const double db = h1.inv - h2.inv;
    const double dc = h1.constant - h2.constant;
    if (std::abs(da) > 0.0) {
      const double disc = dc * dc - 4.0 * da * db;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        // Numerically stable pair of roots.
        const double t = -0.5 * (dc + std::copysign(sq, dc));
        if (t != 0.0) {
          res.candidates.push_back(t / da);
          res.candidates.push_back(db / t);
        } else {
          res.candidates.push_back(0.0);
        }
      }
    } else if (dc != 0.0) {
      res.candidates.push_back(-db / dc);
    }
    res.candidates.push_back(minimizer(w1));
    res.candidates.push_back(minimizer(w2));
    res.candidates.push_back(lo);
    res.candidates.push_back(1.0);
  }
  double best_p = lo;
  double best_val = std::numeric_limits<double>::infinity();
  for (double p : res.candidates) {
    if (!(p >= lo && p <= 1.0)) continue;
    const double val = std::max(closed_form_variance(p, eps1, eps2, w1), closed_form_variance(p, eps1, eps2, w2));
    if (val < best_val) {
      best_val = val;
      best_p = p;
    }
  }
  res.plan = make_plan(best_p, eps1, eps2, PlanMode::Decentralized);
  res.plan.predicted_variance = std::max(closed_form_variance(res.plan.p, eps1, eps2, w1),
                                         closed_form_variance(res.plan.p, eps1, eps2, w2));
  res.plan.objective = "worst_case_two_key";
  return res;
}

// Coefficients of the p-dependent part of the relative Taylor variance of
// AVG (variance divided by (E[S]/E[C])^2):  (A - 2B + C) / p + D p.
struct AvgCoefficients {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
  double ratio = 0.0;  // E[S]/E[C] = sum a mu b / sum a b

  [[nodiscard]] double inverse_term() const noexcept { return a - 2.0 * b + c; }
  [[nodiscard]] double objective(double p) const noexcept { return inverse_term() / p + d * p; }
};

inline AvgCoefficients avg_coefficients(const JoinSums& s, double eps1, double eps2) {
  check_budgets(eps1, eps2);
  const double count = s.gamma.g11;
  const double msum = s.m11;
  if (!(count > 0.0)) throw DomainError("avg_coefficients: sum_v a_v b_v vanishes (empty join)");
  if (msum == 0.0) throw DomainError("avg_coefficients: sum_v a_v mu_v b_v vanishes");
  const double m2 = msum * msum;
  AvgCoefficients k;
  k.a = (s.beta.b3 + s.beta.b4 - s.beta.b1 - s.beta.b2) / m2;
  k.b = 1.0 / count + (s.m22 - s.m21 - s.m12) / (count * msum);
  k.c = (s.gamma.g11 + s.gamma.g22 - s.gamma.g21 - s.gamma.g12) / (count * count);
  k.d = (s.beta.b3 / m2 - 2.0 / count + count / (count * count)) / (eps1 * eps2);
  k.ratio = msum / count;
  return k;
}

// Case analysis on the signs of the 1/p and p coefficients.
inline Plan opt_avg_central(const AvgCoefficients& k, double eps1, double eps2) {
  check_budgets(eps1, eps2);
  const double lo = std::max(eps1, eps2);
  const double inv = k.inverse_term();
  double p = lo;
  if (inv <= 0.0 && k.d > 0.0) {
    p = lo;
  } else if (inv > 0.0 && k.d <= 0.0) {
    p = 1.0;
  } else if (inv > 0.0 && k.d > 0.0) {
    p = clamp_rate(std::sqrt(inv / k.d), eps1, eps2);
  } else {
    p = k.objective(lo) <= k.objective(1.0) ? lo : 1.0;
  }
  Plan plan = make_plan(p, eps1, eps2, PlanMode::Centralized);
  plan.predicted_variance = k.ratio * k.ratio * k.objective(plan.p);
  plan.objective = "taylor_p_terms";
  return plan;
}

// Centralized plan for any aggregate from exact join sums. For AVG the
// predicted variance is the full Taylor value.
inline Plan opt_central(Aggregate agg, const JoinSums& s, double eps1, double eps2) {
  if (agg != Aggregate::Avg) {
    const auto& w = weights_of(agg, s);
    if (!(w.x11 > 0.0)) {
      // Empty join (or W identically zero): every p gives zero variance.
      Plan plan = make_plan(std::max(eps1, eps2), eps1, eps2, PlanMode::Centralized);
      plan.degenerate = true;
      plan.predicted_variance = 0.0;
      return plan;
    }
    return opt_central(w, eps1, eps2);
  }
  Plan plan = opt_avg_central(avg_coefficients(s, eps1, eps2), eps1, eps2);
  plan.predicted_variance = taylor_avg_variance(plan.p, plan.q1, plan.p, plan.q2, s).variance;
  plan.objective = "taylor_variance";
  return plan;
}

}  // namespace joinsample
