#pragma once

// Monte-Carlo variance of the join estimators. Each trial draws a fresh
// hash seed and Bernoulli seed, both derived from (seed, trial); the same
// trial seeds are used for every parameter setting (common random numbers),
// and COUNT, SUM and AVG are read off the same pair of samples.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "joinsample/error.hpp"
#include "joinsample/estimator.hpp"
#include "joinsample/hash.hpp"
#include "joinsample/sampler.hpp"

namespace joinsample {

struct TrialRates {
  double p1 = 1.0;
  double q1 = 1.0;
  double p2 = 1.0;
  double q2 = 1.0;
};

// Unscaled sample-join size and W-sum for each trial.
struct TrialOutcomes {
  std::vector<double> count;
  std::vector<double> sum;
  TrialRates rates;

  [[nodiscard]] double scale() const noexcept { return 1.0 / (std::min(rates.p1, rates.p2) * rates.q1 * rates.q2); }
  [[nodiscard]] std::size_t trials() const noexcept { return count.size(); }
};

struct JoinWorkload {
  KeyDictionary dict;
  PreparedTable t1;
  PreparedTable t2;

  static JoinWorkload build(const Table& t1, std::string_view key1, const Table& t2, std::string_view key2,
                            std::string_view agg_column = {}) {
    JoinWorkload w;
    w.t1 = PreparedTable::build(t1, key1, w.dict, 1, agg_column);
    w.t2 = PreparedTable::build(t2, key2, w.dict, 2);
    return w;
  }
};

inline std::uint64_t trial_hash_seed(std::uint64_t seed, std::uint64_t trial) noexcept { return derive_seed(seed, trial, 0); }
inline std::uint64_t trial_bernoulli_seed(std::uint64_t seed, std::uint64_t trial) noexcept {
  return derive_seed(seed, trial, 1);
}

inline TrialOutcomes run_trials(const JoinWorkload& w, const TrialRates& r, std::size_t beta, std::uint64_t seed,
                                unsigned threads = 1) {
  for (double x : {r.p1, r.q1, r.p2, r.q2}) {
    if (!(x > 0.0 && x <= 1.0)) throw DomainError("sampling rates must be in (0, 1]");
  }
  TrialOutcomes out;
  out.rates = r;
  out.count.assign(beta, 0.0);
  out.sum.assign(beta, 0.0);
  const std::size_t nk = w.dict.size();
  const bool weighted = !w.t1.weights.empty();
  auto work = [&](std::size_t lo, std::size_t hi) {
    std::vector<double> x(nk, 0.0), xs(nk, 0.0);
    std::vector<std::uint32_t> touched;
    for (std::size_t t = lo; t < hi; ++t) {
      const auto hashes = w.dict.hashes(trial_hash_seed(seed, t));
      const auto bseed = trial_bernoulli_seed(seed, t);
      touched.clear();
      for_each_retained(w.t1, hashes, r.p1, r.q1, bseed, [&](std::size_t i) {
        const auto k = w.t1.key_ids[i];
        if (x[k] == 0.0) touched.push_back(k);
        x[k] += 1.0;
        xs[k] += weighted ? w.t1.weights[i] : 1.0;
      });
      double c = 0.0, s = 0.0;
      for_each_retained(w.t2, hashes, r.p2, r.q2, bseed, [&](std::size_t i) {
        const auto k = w.t2.key_ids[i];
        c += x[k];
        s += xs[k];
      });
      for (auto k : touched) x[k] = xs[k] = 0.0;
      out.count[t] = c;
      out.sum[t] = s;
    }
  };
  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, beta))));
  if (threads == 1) {
    work(0, beta);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work, beta * i / threads, beta * (i + 1) / threads);
  }
  return out;
}

struct SampleSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased (n - 1 denominator)
  double kurtosis = 0.0;  // m4 / m2^2 (3 for a normal); 0 when undefined

  // Relative half-width to expect between a sample variance and the true
  // variance at about three standard errors: 3 sqrt((kurtosis - 1) / n).
  [[nodiscard]] double variance_gap_bound() const noexcept {
    if (n < 2) return 0.0;
    return 3.0 * std::sqrt(std::max(0.0, kurtosis - 1.0) / static_cast<double>(n));
  }
};

inline SampleSummary summarize(const std::vector<double>& v) {
  SampleSummary s;
  s.n = v.size();
  if (s.n == 0) return s;
  long double sum = 0.0L;
  for (double x : v) sum += x;
  const long double mean = sum / static_cast<long double>(s.n);
  long double m2 = 0.0L, m4 = 0.0L;
  for (double x : v) {
    const long double d = x - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  s.mean = static_cast<double>(mean);
  if (s.n >= 2) s.variance = static_cast<double>(m2 / static_cast<long double>(s.n - 1));
  const long double pm2 = m2 / static_cast<long double>(s.n);
  if (pm2 > 0.0L) s.kurtosis = static_cast<double>((m4 / static_cast<long double>(s.n)) / (pm2 * pm2));
  return s;
}

// Estimator values per trial. AVG trials with an empty sample join are
// dropped and counted in `empty`.
struct EstimatorDraws {
  std::vector<double> values;
  std::size_t empty = 0;
};

inline EstimatorDraws estimator_draws(const TrialOutcomes& o, Aggregate agg) {
  EstimatorDraws d;
  d.values.reserve(o.trials());
  const double scale = o.scale();
  for (std::size_t t = 0; t < o.trials(); ++t) {
    switch (agg) {
      case Aggregate::Count: d.values.push_back(scale * o.count[t]); break;
      case Aggregate::Sum: d.values.push_back(scale * o.sum[t]); break;
      case Aggregate::Avg:
        if (o.count[t] > 0.0) {
          d.values.push_back(o.sum[t] / o.count[t]);
        } else {
          ++d.empty;
        }
        break;
    }
  }
  return d;
}

struct BenchRecord {
  std::string scheme;
  Aggregate agg = Aggregate::Count;
  TrialRates rates;
  std::size_t trials = 0;
  std::size_t empty_trials = 0;
  double mc_variance = 0.0;
  std::optional<double> closed_form_variance;
  double mean = 0.0;
  double truth = 0.0;
  double relative_error = 0.0;  // sqrt(mc_variance) / |truth|
  double kurtosis = 0.0;
  double gap_bound = 0.0;
};

// One scheme, one aggregate. `sums` are the exact full-table join sums.
inline BenchRecord bench_record(std::string scheme, Aggregate agg, const TrialOutcomes& o, const JoinSums& sums) {
  BenchRecord rec;
  rec.scheme = std::move(scheme);
  rec.agg = agg;
  rec.rates = o.rates;
  const auto draws = estimator_draws(o, agg);
  const auto s = summarize(draws.values);
  rec.trials = s.n;
  rec.empty_trials = draws.empty;
  rec.mc_variance = s.variance;
  rec.mean = s.mean;
  rec.kurtosis = s.kurtosis;
  rec.gap_bound = s.variance_gap_bound();
  const auto& r = o.rates;
  switch (agg) {
    case Aggregate::Count: rec.truth = sums.gamma.g11; break;
    case Aggregate::Sum: rec.truth = sums.m11; break;
    case Aggregate::Avg: rec.truth = sums.gamma.g11 > 0.0 ? sums.m11 / sums.gamma.g11 : 0.0; break;
  }
  try {
    rec.closed_form_variance = agg == Aggregate::Avg ? taylor_avg_variance(r.p1, r.q1, r.p2, r.q2, sums).variance
                                                     : general_variance(agg, r.p1, r.q1, r.p2, r.q2, sums);
  } catch (const DomainError&) {
    rec.closed_form_variance.reset();
  }
  rec.relative_error = rec.truth != 0.0 ? std::sqrt(rec.mc_variance) / std::abs(rec.truth) : 0.0;
  return rec;
}

// Per-trial fraction of the original join retained by the sample join.
inline std::vector<double> output_fractions(const TrialOutcomes& o, double true_join_size) {
  if (!(true_join_size > 0.0)) throw DomainError("true join size must be positive");
  std::vector<double> f;
  f.reserve(o.trials());
  for (double c : o.count) f.push_back(c / true_join_size);
  return f;
}

}  // namespace joinsample
