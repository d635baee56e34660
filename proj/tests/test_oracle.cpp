#include <gtest/gtest.h>

#include <random>

#include "joinsample/estimator.hpp"
#include "joinsample/oracle.hpp"
#include "support.hpp"

namespace js = joinsample;
namespace oracle = joinsample::oracle;
using testsupport::rel_close;

namespace {

oracle::TinyInstance worked(double p, double q) {
  return {{"1", "1", "2"}, {2, 4, 6}, {"1", "2", "2"}, p, q, p, q};
}

}  // namespace

TEST(Oracle, WorkedCount) {
  const auto m = oracle::enumerate_moments(worked(0.5, 0.5), js::Aggregate::Count);
  EXPECT_NEAR(m.mean, 4, 1e-12);
  EXPECT_NEAR(m.variance, 40, 1e-10);
}

TEST(Oracle, WorkedSum) {
  const auto m = oracle::enumerate_moments(worked(0.5, 0.5), js::Aggregate::Sum);
  EXPECT_NEAR(m.mean, 18, 1e-12);
  EXPECT_NEAR(m.variance, 908, 1e-9);
}

TEST(Oracle, FullRatesAreDeterministic) {
  for (auto agg : {js::Aggregate::Count, js::Aggregate::Sum}) {
    const auto inst = worked(1, 1);
    const auto m = oracle::enumerate_moments(inst, agg);
    EXPECT_EQ(m.mean, oracle::true_aggregate(inst, agg));
    EXPECT_EQ(m.variance, 0);
  }
  const auto a = oracle::enumerate_avg(worked(1, 1));
  EXPECT_DOUBLE_EQ(a.mean, 18.0 / 4.0);
  EXPECT_EQ(a.variance, 0);
  EXPECT_EQ(a.p_empty, 0);
}

TEST(Oracle, SizeLimitAndErrors) {
  oracle::TinyInstance big;
  for (int i = 0; i < 15; ++i) {
    big.keys1.push_back(std::to_string(i));
    big.keys2.push_back(std::to_string(i));
  }
  big.p1 = big.p2 = 0.5;
  EXPECT_THROW(oracle::enumerate_moments(big, js::Aggregate::Count), js::SizeError);
  auto bad = worked(0.5, 0.5);
  bad.q1 = 0;
  EXPECT_THROW(oracle::enumerate_moments(bad, js::Aggregate::Count), js::DomainError);
  EXPECT_THROW(oracle::enumerate_moments(worked(0.5, 0.5), js::Aggregate::Avg), js::DomainError);
  oracle::TinyInstance disjoint{{"1"}, {}, {"2"}, 0.5, 0.5, 0.5, 0.5};
  EXPECT_THROW(oracle::enumerate_avg(disjoint), js::UndefinedRatioError);
}

TEST(Oracle, UnbiasedOnRandomSuite) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 200; ++i) {
    const auto inst = testsupport::random_tiny(rng);
    for (auto agg : {js::Aggregate::Count, js::Aggregate::Sum}) {
      const auto m = oracle::enumerate_moments(inst, agg);
      const double truth = oracle::true_aggregate(inst, agg);
      EXPECT_TRUE(rel_close(m.mean, truth, 1e-12, 1e-12)) << "instance " << i << ": " << m.mean << " vs " << truth;
    }
  }
}

TEST(Oracle, VarianceMatchesGeneralFormula) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const auto inst = testsupport::random_tiny(rng);
    const auto sums = testsupport::sums_of(inst);
    for (auto agg : {js::Aggregate::Count, js::Aggregate::Sum}) {
      const double want = oracle::enumerate_moments(inst, agg).variance;
      const double got = js::general_variance(agg, inst.p1, inst.q1, inst.p2, inst.q2, sums);
      EXPECT_TRUE(rel_close(got, want, 1e-9, 1e-9)) << "instance " << i << ": " << got << " vs " << want;
    }
  }
}

TEST(OracleAvg, ConstantColumn) {
  oracle::TinyInstance inst{{"1", "1", "2", "3"}, {7, 7, 7, 7}, {"1", "2", "2", "3"}, 0.5, 0.5, 0.5, 0.5};
  const auto a = oracle::enumerate_avg(inst);
  EXPECT_NEAR(a.mean, 7, 1e-12);
  EXPECT_NEAR(a.variance, 0, 1e-12);
  EXPECT_GT(a.p_empty, 0);
}

TEST(OracleAvg, TaylorWithinLooseBracket) {
  const auto inst = worked(0.5, 0.5);
  const auto a = oracle::enumerate_avg(inst);
  const double taylor = js::taylor_avg_variance(0.5, 0.5, 0.5, 0.5, testsupport::sums_of(inst)).variance;
  EXPECT_GE(taylor, 0.3 * a.variance);
  EXPECT_LE(taylor, 3.0 * a.variance);
}
