#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "joinsample/estimator.hpp"
#include "joinsample/planner.hpp"
#include "support.hpp"

namespace js = joinsample;
using testsupport::grid;
using testsupport::hist_of;
using testsupport::rel_close;

namespace {

js::JoinSums count_sums(const std::map<std::string, std::int64_t>& a, const std::map<std::string, std::int64_t>& b) {
  js::KeyAggregates recs;
  for (const auto& [k, f] : a) recs.push_back({k, f, 1.0, 0.0});
  return js::join_sums(recs, hist_of(b));
}

double grid_min(const std::function<double(double)>& f, double lo, double hi, int n = 10'000) {
  double best = std::numeric_limits<double>::infinity();
  for (double p : grid(lo, hi, n)) best = std::min(best, f(p));
  return best;
}

const std::vector<double> kEps{0.01, 0.1, 0.25};

}  // namespace

TEST(OptCentral, WorkedExamples) {
  const auto pl = js::opt_central(js::Aggregate::Count, count_sums({{"1", 2}, {"2", 1}}, {{"1", 1}, {"2", 2}}), 0.25, 0.25);
  EXPECT_DOUBLE_EQ(pl.p, 0.25);
  EXPECT_DOUBLE_EQ(pl.q1, 1.0);
  EXPECT_DOUBLE_EQ(pl.q2, 1.0);
  EXPECT_TRUE(pl.degenerate);

  const auto p3 = js::opt_central(js::Aggregate::Count, count_sums({{"1", 3}}, {{"1", 3}}), 0.25, 0.25);
  EXPECT_DOUBLE_EQ(p3.p, 0.5);
  EXPECT_DOUBLE_EQ(p3.q1, 0.5);
  EXPECT_DOUBLE_EQ(p3.q2, 0.5);
}

TEST(OptCentral, PkFkUsesPureUniverse) {
  std::map<std::string, std::int64_t> a, b;
  for (int k = 0; k < 100; ++k) {
    a[std::to_string(k)] = 1;
    b[std::to_string(k)] = 1 + k % 5;
  }
  for (double eps : kEps) {
    const auto pl = js::opt_central(js::Aggregate::Count, count_sums(a, b), eps, eps);
    EXPECT_DOUBLE_EQ(pl.p, eps);
    EXPECT_DOUBLE_EQ(pl.q1, 1.0);
  }
}

TEST(OptCentral, EmptyJoinFallsBack) {
  const auto pl = js::opt_central(js::Aggregate::Count, count_sums({{"1", 3}}, {{"2", 3}}), 0.1, 0.2);
  EXPECT_DOUBLE_EQ(pl.p, 0.2);
  EXPECT_TRUE(pl.degenerate);
}

TEST(OptCentral, BudgetValidation) {
  const auto s = count_sums({{"1", 3}}, {{"1", 3}});
  EXPECT_THROW(js::opt_central(js::Aggregate::Count, s, 1.5, 0.1), js::DomainError);
  EXPECT_THROW(js::opt_central(js::Aggregate::Count, s, 0.1, 0.0), js::DomainError);
}

TEST(OptCentral, GridOptimalCountSum) {
  std::mt19937_64 rng(31);
  for (int inst = 0; inst < 50; ++inst) {
    const auto s = testsupport::random_stats(rng);
    for (double e1 : kEps) {
      for (double e2 : kEps) {
        for (auto agg : {js::Aggregate::Count, js::Aggregate::Sum}) {
          const auto pl = js::opt_central(agg, s, e1, e2);
          const double got = js::closed_form_variance(agg, pl.p, e1, e2, s);
          const double best = grid_min([&](double p) { return js::closed_form_variance(agg, p, e1, e2, s); },
                                       std::max(e1, e2), 1.0);
          EXPECT_LE(got, best * (1 + 1e-6)) << "instance " << inst;
        }
      }
    }
  }
}

TEST(OptCentral, GridOptimalAvg) {
  std::mt19937_64 rng(37);
  for (int inst = 0; inst < 50; ++inst) {
    const auto s = testsupport::random_stats(rng);
    for (double e1 : kEps) {
      for (double e2 : kEps) {
        const auto pl = js::opt_central(js::Aggregate::Avg, s, e1, e2);
        auto taylor = [&](double p) { return js::taylor_avg_variance(p, e1 / p, p, e2 / p, s).variance; };
        const double best = grid_min(taylor, std::max(e1, e2), 1.0);
        EXPECT_LE(taylor(pl.p), best * (1 + 1e-6)) << "instance " << inst;
        EXPECT_NEAR(pl.predicted_variance, taylor(pl.p), 1e-9 * taylor(pl.p));
      }
    }
  }
}

TEST(AvgCoefficients, ConsistentWithTaylor) {
  std::mt19937_64 rng(41);
  for (int inst = 0; inst < 30; ++inst) {
    const auto s = testsupport::random_stats(rng);
    const double e1 = 0.05, e2 = 0.1;
    const auto k = js::avg_coefficients(s, e1, e2);
    auto diff = [&](double p) {
      return js::taylor_avg_variance(p, e1 / p, p, e2 / p, s).variance - k.ratio * k.ratio * k.objective(p);
    };
    const double c0 = diff(0.1);
    for (double p : {0.2, 0.5, 0.9, 1.0}) {
      EXPECT_NEAR(diff(p), c0, 1e-8 * std::max(1.0, std::abs(k.ratio * k.ratio * k.objective(p))));
    }
  }
}

TEST(AvgCoefficients, ConstantColumnCancels) {
  js::KeyAggregates recs{{"1", 3, 4.0, 0.0}, {"2", 2, 4.0, 0.0}};
  const auto s = js::join_sums(recs, hist_of({{"1", 2}, {"2", 5}}));
  const auto k = js::avg_coefficients(s, 0.1, 0.1);
  EXPECT_NEAR(k.inverse_term(), 0.0, 1e-12);
  EXPECT_NEAR(k.d, 0.0, 1e-9);
  EXPECT_THROW(js::avg_coefficients(count_sums({{"1", 1}}, {{"2", 1}}), 0.1, 0.1), js::DomainError);
}

TEST(OptAvg, CaseAnalysis) {
  EXPECT_DOUBLE_EQ(js::opt_avg_central({-1.0, 0.0, 0.0, 1.0, 1.0}, 0.1, 0.2).p, 0.2);
  EXPECT_DOUBLE_EQ(js::opt_avg_central({1.0, 0.0, 0.0, -1.0, 1.0}, 0.1, 0.2).p, 1.0);
  EXPECT_DOUBLE_EQ(js::opt_avg_central({0.25, 0.0, 0.0, 1.0, 1.0}, 0.1, 0.2).p, 0.5);
  const js::AvgCoefficients k{0.09, 0.0, 0.0, 1.0, 1.0};
  const auto pl = js::opt_avg_central(k, 0.1, 0.1);
  EXPECT_NEAR(pl.p, 0.3, 1e-15);
  EXPECT_LE(k.objective(pl.p), grid_min([&](double p) { return k.objective(p); }, 0.1, 1.0) * (1 + 1e-9));
}

TEST(SameRate, CountAndSumMinimizedAtEqualP) {
  std::mt19937_64 rng(43);
  const double e2 = 0.1;
  const auto g = grid(e2, 1.0, 2001);
  const double step = g[1] - g[0];
  for (int inst = 0; inst < 200; ++inst) {
    const auto tiny = testsupport::random_tiny(rng);
    const auto s = testsupport::sums_of(tiny);
    if (!(s.gamma.g11 > 0)) continue;
    for (double p1 : {0.2, 0.5, 0.8}) {
      for (double q1 : {0.25, 1.0}) {
        for (auto agg : {js::Aggregate::Count, js::Aggregate::Sum}) {
          if (agg == js::Aggregate::Sum && !(s.beta.b3 > 0)) continue;
          // Ties are possible (every b_v <= 1 flattens the p2 < p1 branch), so
          // compare the best value near p1 against the global grid minimum.
          double best = std::numeric_limits<double>::infinity();
          double near = std::numeric_limits<double>::infinity();
          for (double p2 : g) {
            const double v = js::general_variance(agg, p1, q1, p2, e2 / p2, s);
            best = std::min(best, v);
            if (std::abs(p2 - p1) <= step * (1 + 1e-9)) near = std::min(near, v);
          }
          EXPECT_LE(near, best * (1 + 1e-12)) << "instance " << inst << " p1=" << p1;
        }
      }
    }
  }
}

TEST(Decentral, CountExamples) {
  const auto pl = js::opt_count_decentral(3, 3, 0.25, 0.25);
  EXPECT_DOUBLE_EQ(pl.p, 0.5);
  EXPECT_EQ(pl.objective, "worst_case_per_key");
  const auto pk = js::opt_count_decentral(1, 1, 0.1, 0.3);
  EXPECT_DOUBLE_EQ(pk.p, 0.3);
  EXPECT_THROW(js::opt_count_decentral(0, 1, 0.1, 0.1), js::DomainError);
}

TEST(Decentral, FlatInstanceMatchesCentral) {
  for (int fa : {1, 2, 3, 7, 20}) {
    for (int fb : {1, 2, 5, 11}) {
      for (double e1 : kEps) {
        for (double e2 : kEps) {
          std::map<std::string, std::int64_t> a, b;
          for (int k = 0; k < 13; ++k) {
            a[std::to_string(k)] = fa;
            b[std::to_string(k)] = fb;
          }
          const auto c = js::opt_central(js::Aggregate::Count, count_sums(a, b), e1, e2);
          const auto d = js::opt_count_decentral(fa, fb, e1, e2);
          EXPECT_EQ(c.p, d.p);
        }
      }
    }
  }
}

TEST(WorstCaseB, Construction) {
  EXPECT_EQ(js::worst_case_b(hist_of({{"1", 5}, {"2", 3}}), 10), hist_of({{"1", 10}}));
  EXPECT_EQ(js::worst_case_b(hist_of({{"1", 1}}), 4), hist_of({{"1", 4}}));
  EXPECT_EQ(js::worst_case_b(hist_of({{"1", 2}, {"2", 2}}), 6), hist_of({{"1", 6}}));
  EXPECT_THROW(js::worst_case_b(js::JoinKeyHistogram{}, 3), js::DomainError);
}

TEST(WorstCaseB, MaximizesCountVariance) {
  std::mt19937_64 rng(47);
  js::JoinKeyHistogram a;
  for (int k = 0; k < 10; ++k) a.add(std::to_string(k), 1 + static_cast<std::int64_t>(rng() % 6));
  const std::int64_t nb = 12;
  const auto wc = js::worst_case_b(a, nb);
  auto var = [&](const js::JoinKeyHistogram& b) {
    js::KeyAggregates recs;
    for (const auto& [k, f] : a.entries()) recs.push_back({k, f, 1.0, 0.0});
    return js::closed_form_variance(js::Aggregate::Count, 0.3, 0.1, 0.1, js::join_sums(recs, b));
  };
  const double worst = var(wc);
  for (int rep = 0; rep < 200; ++rep) {
    js::JoinKeyHistogram b;
    for (int i = 0; i < nb; ++i) b.add(std::to_string(rng() % 10));
    EXPECT_LE(var(b), worst * (1 + 1e-12));
  }
}

TEST(Decentral, SumSingleKeyUsesClosedForm) {
  js::KeyAggregates recs{{"1", 4, 3.0, 2.0}};
  const auto r = js::opt_sum_decentral(recs, 9, 0.1, 0.1);
  EXPECT_EQ(r.v1, r.v2);
  const auto c = js::opt_central(js::point_mass_weights(recs[0], 9), 0.1, 0.1);
  EXPECT_DOUBLE_EQ(r.plan.p, c.p);
}

TEST(Decentral, SumZeroAggregateIsDegenerate) {
  js::KeyAggregates recs{{"1", 4, 0.0, 0.0}, {"2", 1, 0.0, 0.0}};
  const auto r = js::opt_sum_decentral(recs, 9, 0.1, 0.2);
  EXPECT_TRUE(r.plan.degenerate);
  EXPECT_DOUBLE_EQ(r.plan.p, 0.2);
}

TEST(Decentral, SandwichAndFactorTwo) {
  std::mt19937_64 rng(53);
  for (int inst = 0; inst < 20; ++inst) {
    js::KeyAggregates recs;
    js::JoinKeyHistogram hist;
    testsupport::random_stats(rng, &recs, &hist, 30, 15);
    const std::int64_t nb = 1 + static_cast<std::int64_t>(rng() % 50);
    for (double e : {0.01, 0.1}) {
      const auto r = js::opt_sum_decentral(recs, nb, e, e);
      const auto nbd = static_cast<double>(nb);
      auto hstar = [&](double p) { return js::h_star(recs, nbd, p, e, e); };
      auto hprime = [&](double p) {
        return std::max(js::h_key(recs[r.v1], nbd, p, e, e), js::h_key(recs[r.v2], nbd, p, e, e));
      };
      for (double p : grid(e, 1.0, 1000)) {
        const double hs = hstar(p), hp = hprime(p);
        EXPECT_LE(hs / 2, hp * (1 + 1e-12));
        EXPECT_LE(hp, hs * (1 + 1e-12));
      }
      EXPECT_LE(hstar(r.plan.p), 2 * grid_min(hstar, e, 1.0) * (1 + 1e-9));
    }
  }
}

TEST(Planner, VarianceMonotoneOutsideOptimum) {
  std::mt19937_64 rng(59);
  for (int inst = 0; inst < 20; ++inst) {
    const auto s = testsupport::random_stats(rng);
    const auto pl = js::opt_central(js::Aggregate::Count, s, 0.05, 0.05);
    double prev = js::closed_form_variance(js::Aggregate::Count, pl.p, 0.05, 0.05, s);
    for (double p = pl.p + 0.01; p <= 1.0; p += 0.01) {
      const double v = js::closed_form_variance(js::Aggregate::Count, p, 0.05, 0.05, s);
      EXPECT_GE(v, prev * (1 - 1e-12));
      prev = v;
    }
  }
}
