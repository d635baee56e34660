#pragma once

// Synthetic join tables: integer keys drawn uniform, truncated normal or
// power law over [1, domain]; an aggregate column W drawn from an integer
// power law on [1, 1000]. Every draw is made from a seeded mt19937_64 with
// hand-written transforms, so output is identical across standard libraries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "joinsample/error.hpp"
#include "joinsample/hash.hpp"
#include "joinsample/sampler.hpp"
#include "joinsample/stats.hpp"
#include "joinsample/table.hpp"

namespace joinsample {

enum class DistKind { Uniform, TruncatedNormal, PowerLaw };

inline DistKind parse_dist_kind(std::string_view s) {
  if (s == "uniform") return DistKind::Uniform;
  if (s == "normal" || s == "truncated_normal") return DistKind::TruncatedNormal;
  if (s == "power_law" || s == "power") return DistKind::PowerLaw;
  throw ConfigError("unknown distribution '" + std::string(s) + "'");
}

inline std::string_view to_string(DistKind k) noexcept {
  switch (k) {
    case DistKind::Uniform: return "uniform";
    case DistKind::TruncatedNormal: return "normal";
    case DistKind::PowerLaw: return "power_law";
  }
  return "?";
}

struct DistSpec {
  DistKind kind = DistKind::Uniform;
  std::int64_t n = 100000;
  std::int64_t domain = 10000;
  double alpha = 1.5;  // power law only

  void validate() const {
    if (n < 1) throw ConfigError("table size must be >= 1");
    if (domain < 1) throw ConfigError("key domain must be >= 1");
    if (kind == DistKind::PowerLaw && !(alpha > 1.0)) throw ConfigError("power-law alpha must exceed 1");
  }
};

// Aggregate column: integer power law on [lo, hi].
struct WeightSpec {
  std::int64_t lo = 1;
  std::int64_t hi = 1000;
  double alpha = 3.5;
};

namespace detail {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  double uniform() { return to_unit(g_()); }  // [0, 1)
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(uniform() * static_cast<double>(hi - lo + 1));
  }
  // Box-Muller, one value per call.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::mt19937_64 g_;
};

// Inverse-CDF table for P(k) proportional to k^-alpha on [lo, hi].
class DiscretePowerLaw {
 public:
  DiscretePowerLaw(std::int64_t lo, std::int64_t hi, double alpha) : lo_(lo) {
    if (hi < lo) throw ConfigError("empty power-law range");
    cdf_.reserve(static_cast<std::size_t>(hi - lo + 1));
    double acc = 0.0;
    for (std::int64_t k = lo; k <= hi; ++k) {
      acc += std::pow(static_cast<double>(k), -alpha);
      cdf_.push_back(acc);
    }
    for (auto& c : cdf_) c /= acc;
  }
  std::int64_t operator()(Rng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
    return lo_ + static_cast<std::int64_t>(idx);
  }

 private:
  std::int64_t lo_;
  std::vector<double> cdf_;
};

class KeyDrawer {
 public:
  explicit KeyDrawer(const DistSpec& s) : s_(s) {
    s.validate();
    if (s.kind == DistKind::PowerLaw) pl_.emplace_back(1, s.domain, s.alpha);
  }
  std::int64_t operator()(Rng& rng) const {
    switch (s_.kind) {
      case DistKind::Uniform: return rng.integer(1, s_.domain);
      case DistKind::PowerLaw: return pl_.front()(rng);
      case DistKind::TruncatedNormal: {
        const double mean = (1.0 + static_cast<double>(s_.domain)) / 2.0;
        const double sd = static_cast<double>(s_.domain) / 5.0;
        while (true) {
          const auto k = static_cast<std::int64_t>(std::llround(mean + sd * rng.normal()));
          if (k >= 1 && k <= s_.domain) return k;
        }
      }
    }
    return 1;
  }

 private:
  DistSpec s_;
  std::vector<DiscretePowerLaw> pl_;
};

}  // namespace detail

// T1 has columns (J, W); T2 has column J.
inline std::pair<Table, Table> gen_synthetic(const DistSpec& spec1, const DistSpec& spec2, const WeightSpec& w,
                                             std::uint64_t seed) {
  const detail::KeyDrawer k1(spec1), k2(spec2);
  const detail::DiscretePowerLaw wdraw(w.lo, w.hi, w.alpha);
  detail::Rng r1(derive_seed(seed, 1)), r2(derive_seed(seed, 2)), rw(derive_seed(seed, 3));
  Table t1{{"J", "W"}, {}}, t2{{"J"}, {}};
  t1.rows.reserve(static_cast<std::size_t>(spec1.n));
  t2.rows.reserve(static_cast<std::size_t>(spec2.n));
  for (std::int64_t i = 0; i < spec1.n; ++i) t1.rows.push_back({std::to_string(k1(r1)), std::to_string(wdraw(rw))});
  for (std::int64_t i = 0; i < spec2.n; ++i) t2.rows.push_back({std::to_string(k2(r2))});
  return {std::move(t1), std::move(t2)};
}

// T2 with round(frac * n2) tuples on T1's most frequent key (smallest key on
// ties) and the rest uniform over the integer keys [1, domain].
inline Table gen_worst_case_t2(const JoinKeyHistogram& hist1, std::int64_t n2, double frac, std::int64_t domain,
                               std::uint64_t seed) {
  if (hist1.empty()) throw DomainError("worst-case T2 needs a non-empty T1 histogram");
  if (n2 < 0) throw ConfigError("n2 must be >= 0");
  if (!(frac >= 0.0 && frac <= 1.0)) throw ConfigError("frac must be in [0, 1]");
  if (domain < 1) throw ConfigError("key domain must be >= 1");
  std::string top;
  std::int64_t best = 0;
  for (const auto& [k, f] : hist1.entries()) {
    if (f > best) {
      best = f;
      top = k;
    }
  }
  const auto heavy = static_cast<std::int64_t>(std::llround(frac * static_cast<double>(n2)));
  detail::Rng rng(derive_seed(seed, 4));
  Table t{{"J"}, {}};
  t.rows.reserve(static_cast<std::size_t>(n2));
  for (std::int64_t i = 0; i < heavy; ++i) t.rows.push_back({top});
  for (std::int64_t i = heavy; i < n2; ++i) t.rows.push_back({std::to_string(rng.integer(1, domain))});
  return t;
}

struct NamedParams {
  std::string name;
  double p = 1.0;
  double q = 1.0;
};

// B1..B6: (eps, 1), (1.5 eps, 1/1.5), (3 eps, 1/3) and their mirrors
// (1/3, 3 eps), (1/1.5, 1.5 eps), (1, eps). An entry whose rate would
// exceed 1 is clamped to the pure scheme on that side.
inline std::vector<NamedParams> baseline_grid(double eps) {
  if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("eps must be in (0, 1]");
  auto entry = [eps](std::string name, double p) {
    p = std::min(1.0, std::max(eps, p));
    return NamedParams{std::move(name), p, eps / p};
  };
  return {entry("B1", eps),        entry("B2", 1.5 * eps), entry("B3", 3.0 * eps),
          entry("B4", 1.0 / 3.0),  entry("B5", 1.0 / 1.5), entry("B6", 1.0)};
}

}  // namespace joinsample
