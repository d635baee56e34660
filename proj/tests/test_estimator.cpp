#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "joinsample/bench.hpp"
#include "joinsample/estimator.hpp"
#include "joinsample/sampler.hpp"
#include "support.hpp"

namespace js = joinsample;
using testsupport::hist_of;
using testsupport::table_of;

namespace {

js::JoinSums worked_sums() {
  return js::join_sums(js::key_aggregates(table_of({"1", "1", "2"}, {2, 4, 6}), "J", "W"),
                       hist_of({{"1", 1}, {"2", 2}}));
}

js::JoinSums single_key(double n) {
  js::KeyAggregates recs{{"1", static_cast<std::int64_t>(n), 1.0, 0.0}};
  return js::join_sums(recs, hist_of({{"1", static_cast<std::int64_t>(n)}}));
}

}  // namespace

TEST(Join, MultisetPairs) {
  EXPECT_EQ(js::join_tables(table_of({"1", "1"}), "J", table_of({"1"}), "J").size(), 2u);
  EXPECT_TRUE(js::join_tables(table_of({"1", "2"}), "J", table_of({"3"}), "J").empty());
  EXPECT_EQ(js::join_tables(table_of({"1", "1", "2"}), "J", table_of({"1", "2", "2"}), "J").size(), 4u);
}

TEST(Join, OrderIndependentOfBuildSide) {
  const auto a = js::join_tables(table_of({"1", "2", "2"}), "J", table_of({"2", "1", "1", "2", "3"}), "J");
  const auto t1 = table_of({"1", "2", "2"});
  const auto t2 = table_of({"2", "1", "1", "2", "3"});
  auto b = js::join_tables(t2, "J", t1, "J");
  for (auto& pr : b) std::swap(pr.row1, pr.row2);
  std::sort(b.begin(), b.end(), [](auto x, auto y) { return std::tie(x.row1, x.row2) < std::tie(y.row1, y.row2); });
  auto a2 = a;
  std::sort(a2.begin(), a2.end(), [](auto x, auto y) { return std::tie(x.row1, x.row2) < std::tie(y.row1, y.row2); });
  EXPECT_EQ(a2, b);
}

TEST(Estimate, CountScaling) {
  const js::UbsParams prm{0.5, 0.5, 3};
  const auto e = js::estimate(js::Aggregate::Count, table_of({"1", "1", "1"}), "J", prm, table_of({"1"}), "J", prm);
  EXPECT_DOUBLE_EQ(e.joined_rows, 3);
  EXPECT_DOUBLE_EQ(e.value, 24);
  EXPECT_DOUBLE_EQ(e.scale, 8);
}

TEST(Estimate, AvgIsRatio) {
  for (double r : {1.0, 0.5, 0.1}) {
    const js::UbsParams prm{r, r, 3};
    const auto e = js::estimate(js::Aggregate::Avg, table_of({"1", "2"}, {2, 4}), "J", prm, table_of({"1", "2"}),
                                "J", prm, "W");
    EXPECT_DOUBLE_EQ(e.value, 3);
    EXPECT_TRUE(e.approximate);
  }
}

TEST(Estimate, FullSampleIsExact) {
  const js::UbsParams full{1, 1, 0};
  const auto t1 = table_of({"1", "1", "2"}, {2, 4, 6});
  const auto t2 = table_of({"1", "2", "2"});
  const auto c = js::estimate(js::Aggregate::Count, t1, "J", full, t2, "J", full);
  EXPECT_DOUBLE_EQ(c.value, 4);
  EXPECT_DOUBLE_EQ(c.variance, 0);
  const auto s = js::estimate(js::Aggregate::Sum, t1, "J", full, t2, "J", full, "W", worked_sums());
  EXPECT_DOUBLE_EQ(s.value, 2 + 4 + 12);
  EXPECT_DOUBLE_EQ(s.variance, 0);
  EXPECT_EQ(s.variance_source, "closed_form");
  EXPECT_DOUBLE_EQ(s.ci_lo, s.value);
}

TEST(Estimate, Errors) {
  const auto t = table_of({"1"}, {1});
  EXPECT_THROW(js::estimate(js::Aggregate::Count, t, "J", {1, 1, 1}, t, "J", {1, 1, 2}), js::CoordinationError);
  EXPECT_THROW(js::estimate(js::Aggregate::Avg, t, "J", {1, 1, 1}, table_of({"2"}), "J", {1, 1, 1}, "W"),
               js::UndefinedRatioError);
  EXPECT_THROW(js::estimate(js::Aggregate::Sum, t, "J", {1, 1, 1}, t, "J", {1, 1, 1}), js::SchemaError);
}

TEST(Estimate, IntervalUsesStderr) {
  const js::UbsParams prm{0.5, 0.5, 3};
  const auto e = js::estimate(js::Aggregate::Count, table_of({"1", "1", "2"}), "J", prm, table_of({"1", "2", "2"}),
                              "J", prm, {}, worked_sums());
  EXPECT_DOUBLE_EQ(e.variance, 40);
  EXPECT_DOUBLE_EQ(e.stderr_, std::sqrt(40.0));
  EXPECT_DOUBLE_EQ(e.ci_hi - e.ci_lo, 2 * js::kCi95 * std::sqrt(40.0));
}

TEST(ClosedForm, WorkedVariances) {
  const auto s = worked_sums();
  EXPECT_NEAR(js::closed_form_variance(js::Aggregate::Count, 0.5, 0.25, 0.25, s), 40, 1e-12);
  EXPECT_NEAR(js::closed_form_variance(js::Aggregate::Sum, 0.5, 0.25, 0.25, s), 908, 1e-9);
  EXPECT_NEAR(js::general_variance(js::Aggregate::Count, 0.5, 0.5, 0.5, 0.5, s), 40, 1e-12);
  EXPECT_EQ(js::closed_form_variance(js::Aggregate::Count, 1, 1, 1, s), 0);
  EXPECT_EQ(js::closed_form_variance(js::Aggregate::Sum, 1, 1, 1, s), 0);
}

TEST(ClosedForm, RateOutOfRange) {
  const auto s = worked_sums();
  EXPECT_THROW(js::closed_form_variance(js::Aggregate::Count, 0.1, 0.25, 0.25, s), js::DomainError);
  EXPECT_THROW(js::closed_form_variance(js::Aggregate::Count, 1.1, 0.25, 0.25, s), js::DomainError);
  EXPECT_THROW(js::general_variance(js::Aggregate::Count, 0, 1, 1, 1, s), js::DomainError);
  EXPECT_THROW(js::closed_form_variance(js::Aggregate::Avg, 0.5, 0.25, 0.25, s), js::DomainError);
}

TEST(GeneralVariance, SpecializesToClosedForm) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 50; ++rep) {
    const auto s = testsupport::random_stats(rng);
    for (double eps : {0.01, 0.1, 0.25}) {
      for (double p : {eps, 0.3, 0.7, 1.0}) {
        if (p < eps) continue;
        for (auto agg : {js::Aggregate::Count, js::Aggregate::Sum}) {
          const double a = js::general_variance(agg, p, eps / p, p, eps / p, s);
          const double b = js::closed_form_variance(agg, p, eps, eps, s);
          EXPECT_TRUE(testsupport::rel_close(a, b, 1e-12, 1e-9)) << a << " vs " << b;
        }
      }
    }
  }
}

TEST(GeneralVariance, UniverseOnlyCartesian) {
  const double n = 100, p = 0.1;
  EXPECT_NEAR(js::general_variance(js::Aggregate::Count, p, 1, p, 1, single_key(n)), (1 / p - 1) * std::pow(n, 4),
              1e-3);
  EXPECT_NEAR((1 / p - 1) * std::pow(n, 4), 9e8, 1e-3);
}

TEST(GeneralVariance, UniformOnlyCartesian) {
  for (double n : {1.0, 5.0, 100.0}) {
    for (double q : {0.1, 0.5, 0.9}) {
      const double expect = 2 * (1 / q - 1) * n * n * n + std::pow((1 - q) / q, 2) * n * n;
      EXPECT_TRUE(testsupport::rel_close(js::general_variance(js::Aggregate::Count, 1, q, 1, q, single_key(n)),
                                         expect, 1e-12));
    }
  }
}

TEST(Taylor, ConstantColumnHasZeroVariance) {
  js::KeyAggregates recs{{"1", 3, 5.0, 0.0}, {"2", 1, 5.0, 0.0}, {"3", 7, 5.0, 0.0}};
  const auto s = js::join_sums(recs, hist_of({{"1", 2}, {"2", 4}, {"3", 1}}));
  const auto r = js::taylor_avg_variance(0.3, 0.5, 0.3, 0.2, s);
  EXPECT_NEAR(r.variance, 0.0, 1e-12);
  EXPECT_GT(r.var_s, 0.0);
}

TEST(Taylor, FullSampleHasZeroVariance) {
  EXPECT_NEAR(js::taylor_avg_variance(1, 1, 1, 1, worked_sums()).variance, 0.0, 1e-15);
}

TEST(Taylor, EmptyJoinIsUndefined) {
  js::KeyAggregates recs{{"1", 3, 5.0, 0.0}};
  EXPECT_THROW(js::taylor_avg_variance(0.5, 0.5, 0.5, 0.5, js::join_sums(recs, hist_of({{"2", 1}}))),
               js::UndefinedRatioError);
}

TEST(Taylor, MomentsMatchScaledClosedForm) {
  // Var[S] scaled by (p q1 q2)^-2 is the SUM variance; likewise for C.
  const auto s = worked_sums();
  const double p = 0.5, q1 = 0.4, q2 = 0.7;
  const auto r = js::taylor_avg_variance(p, q1, p, q2, s);
  const double k = p * q1 * q2;
  EXPECT_NEAR(r.var_s / (k * k), js::general_variance(js::Aggregate::Sum, p, q1, p, q2, s), 1e-9);
  EXPECT_NEAR(r.var_c / (k * k), js::general_variance(js::Aggregate::Count, p, q1, p, q2, s), 1e-9);
}

TEST(PlugIn, ExactAtFullRates) {
  const auto t1 = table_of({"1", "1", "2", "3"}, {2, 4, 6, 1});
  const auto t2 = table_of({"1", "2", "2"});
  const auto got = js::plug_in_sums(js::sample_key_aggregates(t1, "J", "W"), js::sample_key_aggregates(t2, "J"), 1, 1,
                                    1, 1);
  const auto want = js::join_sums(js::key_aggregates(t1, "J", "W"), js::build_histogram(t2, "J"));
  EXPECT_DOUBLE_EQ(got.gamma.g22, want.gamma.g22);
  EXPECT_DOUBLE_EQ(got.beta.b1, want.beta.b1);
  EXPECT_DOUBLE_EQ(got.beta.b2, want.beta.b2);
  EXPECT_DOUBLE_EQ(got.m21, want.m21);
}

TEST(PlugIn, UnbiasedOverSamples) {
  std::vector<std::string> k1, k2;
  std::vector<double> w;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 300; ++i) {
    k1.push_back(std::to_string(rng() % 20));
    w.push_back(static_cast<double>(rng() % 10));
  }
  for (int i = 0; i < 200; ++i) k2.push_back(std::to_string(rng() % 25));
  const auto t1 = table_of(k1, w);
  const auto t2 = table_of(k2);
  const auto want = js::join_sums(js::key_aggregates(t1, "J", "W"), js::build_histogram(t2, "J"));
  double g22 = 0.0, b2 = 0.0;
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) {
    const js::UbsParams prm{0.5, 0.6, static_cast<std::uint64_t>(t)};
    const auto s1 = js::ubs_sample(t1, "J", prm, 1000 + t, 1);
    const auto s2 = js::ubs_sample(t2, "J", prm, 1000 + t, 2);
    const auto got = js::plug_in_sums(js::sample_key_aggregates(s1.table, "J", "W"),
                                      js::sample_key_aggregates(s2.table, "J"), 0.5, 0.6, 0.5, 0.6);
    g22 += got.gamma.g22;
    b2 += got.beta.b2;
  }
  EXPECT_NEAR(g22 / trials, want.gamma.g22, 0.05 * want.gamma.g22);
  EXPECT_NEAR(b2 / trials, want.beta.b2, 0.05 * want.beta.b2);
}

TEST(OutputFraction, FullSampleIsOne) {
  const auto t1 = table_of({"1", "1", "2"});
  const auto t2 = table_of({"1", "2", "2"});
  const auto s1 = js::ubs_sample(t1, "J", {1, 1, 0}, 0, 1);
  const auto s2 = js::ubs_sample(t2, "J", {1, 1, 0}, 0, 2);
  EXPECT_DOUBLE_EQ(js::measure_output_fraction(s1, s2, 4), 1.0);
  EXPECT_THROW(js::measure_output_fraction(s1, s2, 0), js::DomainError);
}
