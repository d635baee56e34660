#pragma once

// AMS (tug-of-war) sketches for estimating inner products between vectors
// held by different parties, and the decentralized AVG planner built on them.

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "joinsample/error.hpp"
#include "joinsample/hash.hpp"
#include "joinsample/planner.hpp"
#include "joinsample/stats.hpp"

namespace joinsample {

inline constexpr std::uint32_t kDefaultSketchWidth = 512;
inline constexpr std::uint32_t kDefaultSketchDepth = 5;

class AmsSketch {
 public:
  AmsSketch() = default;
  AmsSketch(std::uint32_t width, std::uint32_t depth, std::uint64_t seed)
      : width_(width), depth_(depth), seed_(seed), counters_(static_cast<std::size_t>(width) * depth, 0.0) {
    if (width == 0 || depth == 0) throw DomainError("sketch width and depth must be positive");
  }

  // counters[d][bucket_d(k)] += sign_d(k) * x
  void update(std::string_view key, double x) {
    for (std::uint32_t d = 0; d < depth_; ++d) {
      const std::uint64_t h = hash_bytes(key, derive_seed(seed_, d));
      const std::size_t bucket = static_cast<std::size_t>((h >> 1) % width_);
      const double sign = (h & 1U) ? 1.0 : -1.0;
      counters_[static_cast<std::size_t>(d) * width_ + bucket] += sign * x;
    }
  }

  static AmsSketch of(const std::map<std::string, double>& vec, std::uint32_t width, std::uint32_t depth,
                      std::uint64_t seed) {
    AmsSketch s(width, depth, seed);
    for (const auto& [k, x] : vec) s.update(k, x);
    return s;
  }

  [[nodiscard]] std::uint32_t width() const noexcept { return width_; }
  [[nodiscard]] std::uint32_t depth() const noexcept { return depth_; }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] const std::vector<double>& counters() const noexcept { return counters_; }
  [[nodiscard]] double at(std::uint32_t d, std::uint32_t w) const { return counters_.at(static_cast<std::size_t>(d) * width_ + w); }

  [[nodiscard]] bool compatible(const AmsSketch& o) const noexcept {
    return width_ == o.width_ && depth_ == o.depth_ && seed_ == o.seed_;
  }

  static AmsSketch from_counters(std::uint32_t width, std::uint32_t depth, std::uint64_t seed, std::vector<double> c) {
    if (c.size() != static_cast<std::size_t>(width) * depth) throw DomainError("sketch counter count mismatch");
    AmsSketch s(width, depth, seed);
    s.counters_ = std::move(c);
    return s;
  }

  AmsSketch& operator+=(const AmsSketch& o) {
    require_compatible(o);
    for (std::size_t i = 0; i < counters_.size(); ++i) counters_[i] += o.counters_[i];
    return *this;
  }
  friend AmsSketch operator+(AmsSketch a, const AmsSketch& b) { return a += b; }

  void require_compatible(const AmsSketch& o) const {
    if (!compatible(o)) throw CoordinationError("AMS sketches differ in (width, depth, seed)");
  }

 private:
  std::uint32_t width_ = 0;
  std::uint32_t depth_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> counters_;
};

// Median over rows of the per-row counter dot product; each row is an
// unbiased estimate of <x, y>.
inline double ams_inner(const AmsSketch& x, const AmsSketch& y) {
  x.require_compatible(y);
  std::vector<double> rows(x.depth(), 0.0);
  for (std::uint32_t d = 0; d < x.depth(); ++d) {
    double s = 0.0;
    for (std::uint32_t w = 0; w < x.width(); ++w) s += x.at(d, w) * y.at(d, w);
    rows[d] = s;
  }
  std::sort(rows.begin(), rows.end());
  const std::size_t m = rows.size();
  return m % 2 ? rows[m / 2] : 0.5 * (rows[m / 2 - 1] + rows[m / 2]);
}

// Vectors T1's owner sketches for the AVG planner (keys absent from T1 are 0).
struct AvgSketchesT1 {
  AmsSketch a, a2, amu, a2mu, a2mu2, lin;  // lin = a (mu^2 + sigma^2)
};

// Vectors T2's owner sketches: b and b^2.
struct AvgSketchesT2 {
  AmsSketch b, b2;
};

inline AvgSketchesT1 sketch_t1(const KeyAggregates& recs, std::uint32_t width, std::uint32_t depth, std::uint64_t seed) {
  AvgSketchesT1 s{AmsSketch(width, depth, seed), AmsSketch(width, depth, seed), AmsSketch(width, depth, seed),
                  AmsSketch(width, depth, seed), AmsSketch(width, depth, seed), AmsSketch(width, depth, seed)};
  for (const auto& r : recs) {
    const double a = static_cast<double>(r.a);
    s.a.update(r.key, a);
    s.a2.update(r.key, a * a);
    s.amu.update(r.key, a * r.mu);
    s.a2mu.update(r.key, a * a * r.mu);
    s.a2mu2.update(r.key, a * a * r.mu * r.mu);
    s.lin.update(r.key, a * r.second_moment());
  }
  return s;
}

inline AvgSketchesT2 sketch_t2(const JoinKeyHistogram& hist, std::uint32_t width, std::uint32_t depth,
                               std::uint64_t seed) {
  AvgSketchesT2 s{AmsSketch(width, depth, seed), AmsSketch(width, depth, seed)};
  for (const auto& [k, f] : hist.entries()) {
    const double b = static_cast<double>(f);
    s.b.update(k, b);
    s.b2.update(k, b * b);
  }
  return s;
}

// Every inner product of the AVG variance, estimated from sketches.
inline JoinSums sketched_join_sums(const AvgSketchesT1& x, const AvgSketchesT2& y) {
  JoinSums s;
  s.gamma.g11 = ams_inner(x.a, y.b);
  s.gamma.g12 = ams_inner(x.a, y.b2);
  s.gamma.g21 = ams_inner(x.a2, y.b);
  s.gamma.g22 = ams_inner(x.a2, y.b2);
  s.m11 = ams_inner(x.amu, y.b);
  s.m12 = ams_inner(x.amu, y.b2);
  s.m21 = ams_inner(x.a2mu, y.b);
  s.m22 = ams_inner(x.a2mu, y.b2);
  s.beta.b1 = ams_inner(x.a2mu2, y.b);
  s.beta.b2 = ams_inner(x.lin, y.b2);
  s.beta.b3 = ams_inner(x.lin, y.b);
  s.beta.b4 = ams_inner(x.a2mu2, y.b2);
  return s;
}

inline Plan opt_avg_decentral(const AvgSketchesT1& x, const AvgSketchesT2& y, double eps1, double eps2) {
  const JoinSums s = sketched_join_sums(x, y);
  Plan plan = opt_avg_central(avg_coefficients(s, eps1, eps2), eps1, eps2);
  plan.mode = PlanMode::Decentralized;
  plan.predicted_variance = taylor_avg_variance(plan.p, plan.q1, plan.p, plan.q2, s).variance;
  plan.objective = "sketched_taylor_variance";
  return plan;
}

}  // namespace joinsample
