#pragma once

// Exact moments of the UBS join estimators by exhaustive enumeration over
// every universe outcome and every Bernoulli pattern of a tiny instance.
// Nothing here uses the variance formulas; tests compare the two.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "joinsample/error.hpp"
#include "joinsample/estimator.hpp"

namespace joinsample::oracle {

struct TinyInstance {
  std::vector<std::string> keys1;
  std::vector<double> w1;  // aggregate column of T1; empty means all ones
  std::vector<std::string> keys2;
  double p1 = 1.0;
  double q1 = 1.0;
  double p2 = 1.0;
  double q2 = 1.0;
};

// Enumeration is exponential in (distinct keys + |T1| + |T2|).
inline constexpr std::size_t kMaxEnumerationBits = 20;

struct Moments2 {
  double mean = 0.0;
  double variance = 0.0;
};

struct AvgMoments {
  double mean = 0.0;       // E[S/C | C > 0]
  double variance = 0.0;   // Var[S/C | C > 0]
  double p_empty = 0.0;    // P[C = 0]
};

namespace detail {

struct Outcome {
  long double prob;
  long double count;  // |S1 join S2|
  long double sum;    // sum of W over the joined pairs
};

inline void validate(const TinyInstance& inst) {
  for (double r : {inst.p1, inst.q1, inst.p2, inst.q2}) {
    if (!(r > 0.0 && r <= 1.0)) throw DomainError("oracle rates must be in (0, 1]");
  }
  if (!inst.w1.empty() && inst.w1.size() != inst.keys1.size()) throw DomainError("w1 must match keys1");
}

// Every outcome with nonzero probability. Each key's hash value h is
// uniform: h < min(p1,p2) keeps the key on both sides, min <= h < max keeps
// it on one side only, and h >= max drops it. Only tuples on a kept key
// carry a Bernoulli coin that can matter, so coins of the others are
// summed out (their probabilities add to one).
inline std::vector<Outcome> enumerate(const TinyInstance& inst) {
  validate(inst);
  std::map<std::string, int> key_id;
  for (const auto& k : inst.keys1) key_id.emplace(k, 0);
  for (const auto& k : inst.keys2) key_id.emplace(k, 0);
  int next = 0;
  for (auto& [k, id] : key_id) id = next++;
  const std::size_t nkeys = key_id.size();
  if (nkeys + inst.keys1.size() + inst.keys2.size() > kMaxEnumerationBits) {
    throw SizeError("tiny instance too large for exhaustive enumeration");
  }
  std::vector<int> k1, k2;
  for (const auto& k : inst.keys1) k1.push_back(key_id.at(k));
  for (const auto& k : inst.keys2) k2.push_back(key_id.at(k));
  std::vector<long double> w(inst.keys1.size(), 1.0L);
  for (std::size_t i = 0; i < inst.w1.size(); ++i) w[i] = inst.w1[i];

  const long double pmin = std::min(inst.p1, inst.p2);
  const long double pmax = std::max(inst.p1, inst.p2);
  // Per key: 0 = dropped, 1 = kept on the larger-p side only, 2 = kept on both.
  const long double state_prob[3] = {1.0L - pmax, pmax - pmin, pmin};
  const bool side1_larger = inst.p1 > inst.p2;

  std::vector<Outcome> out;
  std::vector<int> state(nkeys, 0);
  std::size_t combos = 1;
  for (std::size_t i = 0; i < nkeys; ++i) combos *= 3;
  for (std::size_t code = 0; code < combos; ++code) {
    long double pu = 1.0L;
    std::size_t c = code;
    for (std::size_t i = 0; i < nkeys; ++i) {
      state[i] = static_cast<int>(c % 3);
      c /= 3;
      pu *= state_prob[state[i]];
    }
    if (pu == 0.0L) continue;
    auto kept1 = [&](int key) { return state[key] == 2 || (state[key] == 1 && side1_larger); };
    auto kept2 = [&](int key) { return state[key] == 2 || (state[key] == 1 && !side1_larger); };
    std::vector<std::size_t> act1, act2;
    for (std::size_t i = 0; i < k1.size(); ++i) {
      if (kept1(k1[i])) act1.push_back(i);
    }
    for (std::size_t j = 0; j < k2.size(); ++j) {
      if (kept2(k2[j])) act2.push_back(j);
    }
    // Side patterns: probability, per-key count and W-sum.
    struct Side {
      long double prob;
      std::vector<long double> count;
      std::vector<long double> sum;
    };
    auto patterns = [&](const std::vector<std::size_t>& act, const std::vector<int>& keys, long double q,
                        bool with_w) {
      std::vector<Side> sides;
      const std::size_t m = act.size();
      for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
        Side s{1.0L, std::vector<long double>(nkeys, 0.0L), std::vector<long double>(nkeys, 0.0L)};
        for (std::size_t b = 0; b < m; ++b) {
          const bool in = (mask >> b) & 1U;
          s.prob *= in ? q : 1.0L - q;
          if (in) {
            const auto row = act[b];
            s.count[keys[row]] += 1.0L;
            if (with_w) s.sum[keys[row]] += w[row];
          }
        }
        if (s.prob != 0.0L) sides.push_back(std::move(s));
      }
      return sides;
    };
    const auto left = patterns(act1, k1, inst.q1, true);
    const auto right = patterns(act2, k2, inst.q2, false);
    for (const auto& l : left) {
      for (const auto& r : right) {
        Outcome o{pu * l.prob * r.prob, 0.0L, 0.0L};
        for (std::size_t v = 0; v < nkeys; ++v) {
          o.count += l.count[v] * r.count[v];
          o.sum += l.sum[v] * r.count[v];
        }
        out.push_back(o);
      }
    }
  }
  return out;
}

}  // namespace detail

// Exact E and Var of the scaled COUNT or SUM estimator.
inline Moments2 enumerate_moments(const TinyInstance& inst, Aggregate agg) {
  if (agg == Aggregate::Avg) throw DomainError("use enumerate_avg for AVG");
  const auto outcomes = detail::enumerate(inst);
  const long double scale = 1.0L / (static_cast<long double>(std::min(inst.p1, inst.p2)) * inst.q1 * inst.q2);
  auto value = [&](const detail::Outcome& o) { return scale * (agg == Aggregate::Count ? o.count : o.sum); };
  long double mean = 0.0L;
  for (const auto& o : outcomes) mean += o.prob * value(o);
  long double var = 0.0L;
  for (const auto& o : outcomes) {
    const long double d = value(o) - mean;
    var += o.prob * d * d;
  }
  return {static_cast<double>(mean), static_cast<double>(var)};
}

// Moments of S/C conditioned on a non-empty sample join.
inline AvgMoments enumerate_avg(const TinyInstance& inst) {
  const auto outcomes = detail::enumerate(inst);
  long double p_nonempty = 0.0L, mean = 0.0L;
  for (const auto& o : outcomes) {
    if (o.count > 0.0L) {
      p_nonempty += o.prob;
      mean += o.prob * (o.sum / o.count);
    }
  }
  AvgMoments r;
  r.p_empty = static_cast<double>(1.0L - p_nonempty);
  if (p_nonempty == 0.0L) throw UndefinedRatioError("the sample join is empty with probability one");
  mean /= p_nonempty;
  long double var = 0.0L;
  for (const auto& o : outcomes) {
    if (o.count > 0.0L) {
      const long double d = o.sum / o.count - mean;
      var += o.prob * d * d;
    }
  }
  r.mean = static_cast<double>(mean);
  r.variance = static_cast<double>(var / p_nonempty);
  return r;
}

// Exact aggregate over the full tables (nested loops).
inline double true_aggregate(const TinyInstance& inst, Aggregate agg) {
  long double count = 0.0L, sum = 0.0L;
  for (std::size_t i = 0; i < inst.keys1.size(); ++i) {
    for (const auto& k2 : inst.keys2) {
      if (inst.keys1[i] == k2) {
        count += 1.0L;
        sum += inst.w1.empty() ? 1.0L : inst.w1[i];
      }
    }
  }
  switch (agg) {
    case Aggregate::Count: return static_cast<double>(count);
    case Aggregate::Sum: return static_cast<double>(sum);
    case Aggregate::Avg:
      if (count == 0.0L) throw UndefinedRatioError("empty join");
      return static_cast<double>(sum / count);
  }
  return 0.0;
}

}  // namespace joinsample::oracle
