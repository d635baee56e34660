#include <gtest/gtest.h>

#include <sstream>

#include "joinsample/io.hpp"
#include "joinsample/protocol.hpp"
#include "joinsample/sampler.hpp"
#include "support.hpp"

namespace js = joinsample;
using testsupport::hist_of;
using testsupport::table_of;

namespace {

js::PartyState party(int id, const js::JoinKeyHistogram& h, double eps, std::uint64_t share,
                     std::optional<js::KeyAggregates> aggs = std::nullopt) {
  return {id, h, std::move(aggs), eps, h.n(), share};
}

js::JoinKeyHistogram flat(int keys, int f) {
  js::JoinKeyHistogram h;
  for (int k = 0; k < keys; ++k) h.add(std::to_string(k), f);
  return h;
}

std::vector<js::MessageKind> kinds(const js::Transcript& t) {
  std::vector<js::MessageKind> k;
  for (const auto& m : t.messages) k.push_back(m.kind);
  return k;
}

js::KeyAggregates aggregates_of(const js::JoinKeyHistogram& h, double mu) {
  js::KeyAggregates r;
  for (const auto& [k, f] : h.entries()) r.push_back({k, f, mu, 1.0});
  return r;
}

}  // namespace

TEST(Protocol, CountDictatorship) {
  const auto out = js::run_dictatorship(party(1, flat(5, 3), 0.25, 11), party(2, flat(4, 3), 0.25, 22),
                                        js::Aggregate::Count);
  EXPECT_DOUBLE_EQ(out.plan.p, 0.5);
  using K = js::MessageKind;
  EXPECT_EQ(kinds(out.transcript), (std::vector<K>{K::Hello, K::Hello, K::MaxFreq, K::MaxFreq, K::Adopt}));
  EXPECT_LE(out.transcript.scalars_after_hello(), 4u);
  EXPECT_EQ(out.hash_seed, js::combine_seed_shares(11, 22));
}

TEST(Protocol, PkPkIsPureUniverse) {
  const auto out = js::run_dictatorship(party(1, flat(9, 1), 0.1, 1), party(2, flat(9, 1), 0.3, 2),
                                        js::Aggregate::Count);
  EXPECT_DOUBLE_EQ(out.plan.p, 0.3);
}

TEST(Protocol, SumSingleKey) {
  const auto h1 = hist_of({{"1", 4}});
  const auto recs = js::KeyAggregates{{"1", 4, 3.0, 2.0}};
  const auto h2 = hist_of({{"1", 3}, {"2", 6}});
  const auto out = js::run_dictatorship(party(1, h1, 0.1, 1, recs), party(2, h2, 0.1, 2), js::Aggregate::Sum);
  using K = js::MessageKind;
  EXPECT_EQ(kinds(out.transcript), (std::vector<K>{K::Hello, K::Hello, K::Adopt}));
  EXPECT_LE(out.transcript.scalars_after_hello(), 4u);
  const auto c = js::opt_central(js::point_mass_weights(recs[0], 9), 0.1, 0.1);
  EXPECT_DOUBLE_EQ(out.plan.p, c.p);
}

TEST(Protocol, SumDictatorNeedsAggregates) {
  EXPECT_THROW(js::run_dictatorship(party(1, flat(2, 2), 0.1, 1), party(2, flat(2, 2), 0.1, 2), js::Aggregate::Sum),
               js::ProtocolError);
}

TEST(Protocol, AvgUsesSketches) {
  const auto h1 = flat(8, 3);
  const auto out = js::run_dictatorship(party(1, h1, 0.1, 1, aggregates_of(h1, 5.0)), party(2, flat(8, 2), 0.1, 2),
                                        js::Aggregate::Avg);
  using K = js::MessageKind;
  EXPECT_EQ(kinds(out.transcript), (std::vector<K>{K::Hello, K::Hello, K::Sketch, K::Sketch, K::Adopt}));
  EXPECT_GE(out.plan.p, 0.1);
  EXPECT_LE(out.plan.p, 1.0);
}

TEST(Protocol, VoterSymmetric) {
  const auto h = flat(6, 4);
  const auto v = js::run_voter(party(1, h, 0.2, 5), party(2, h, 0.2, 6));
  using K = js::MessageKind;
  EXPECT_EQ(kinds(v.transcript), (std::vector<K>{K::Hello, K::Hello, K::Propose, K::Propose}));
  const auto& a = v.transcript.messages[2].payload;
  const auto& b = v.transcript.messages[3].payload;
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_DOUBLE_EQ(v.plan.p, a.at("p").get<double>());
  // With one key the point-mass adversary is the flat instance, so the
  // voter and the dictator agree.
  const auto one = flat(1, 7);
  const auto v1 = js::run_voter(party(1, one, 0.2, 5), party(2, one, 0.2, 6));
  const auto d1 = js::run_dictatorship(party(1, one, 0.2, 5), party(2, one, 0.2, 6), js::Aggregate::Count);
  EXPECT_NEAR(v1.plan.p, d1.plan.p, 1e-12);
}

TEST(Protocol, VoterSmallerWorstCaseWins) {
  js::JoinKeyHistogram skew;
  skew.add("0", 40);
  for (int k = 1; k < 20; ++k) skew.add(std::to_string(k), 1);
  const auto flat2 = flat(30, 2);
  const auto out = js::run_voter(party(1, skew, 0.05, 1), party(2, flat2, 0.05, 2));
  ASSERT_EQ(out.transcript.messages.size(), 4u);
  const auto& m2 = out.transcript.messages[2];
  const auto& m3 = out.transcript.messages[3];
  const auto& pa = m2.from == 1 ? m2.payload : m3.payload;  // party 1
  const auto& pb = m2.from == 1 ? m3.payload : m2.payload;  // party 2
  const double va = pa.at("worst_case_variance").get<double>(), vb = pb.at("worst_case_variance").get<double>();
  EXPECT_DOUBLE_EQ(out.plan.p, (va <= vb ? pa : pb).at("p").get<double>());
  // Independent recomputation of both worst cases.
  const auto m1 = js::cross_moments(skew, js::worst_case_b(skew, flat2.n()));
  const auto mm2 = js::cross_moments(js::worst_case_b(flat2, skew.n()), flat2);
  const double w1 = js::opt_central(js::weights_of(m1), 0.05, 0.05).predicted_variance;
  const double w2 = js::opt_central(js::weights_of(mm2), 0.05, 0.05).predicted_variance;
  EXPECT_DOUBLE_EQ(std::min(va, vb), std::min(w1, w2));
  EXPECT_DOUBLE_EQ(out.plan.p, js::opt_central(js::weights_of(w1 <= w2 ? m1 : mm2), 0.05, 0.05).p);
}

TEST(Protocol, VoterRejectsSum) {
  EXPECT_THROW(js::run_protocol(party(1, flat(2, 2), 0.1, 1), party(2, flat(2, 2), 0.1, 2),
                                {js::ProtocolMode::Voter, js::Aggregate::Sum}),
               js::UsageError);
}

TEST(Protocol, ReplayReproducesPlan) {
  for (auto agg : {js::Aggregate::Count, js::Aggregate::Sum, js::Aggregate::Avg}) {
    const auto h1 = flat(7, 3);
    const auto h2 = flat(5, 4);
    auto s1 = party(1, h1, 0.1, 3, aggregates_of(h1, 2.5));
    auto s2 = party(2, h2, 0.2, 4);
    const js::ProtocolConfig cfg{js::ProtocolMode::Dictatorship, agg};
    const auto out = js::run_protocol(s1, s2, cfg);
    std::istringstream in(out.transcript.jsonl());
    const auto rec = js::Transcript::read_jsonl(in);
    const auto again = js::replay(rec, s1, s2, cfg);
    EXPECT_EQ(js::io::to_json(again.plan).dump(), js::io::to_json(out.plan).dump());
    EXPECT_EQ(again.hash_seed, out.hash_seed);
    EXPECT_EQ(again.transcript.jsonl(), out.transcript.jsonl());
  }
}

TEST(Protocol, ReplayDetectsTamperingAndTruncation) {
  auto s1 = party(1, flat(5, 3), 0.25, 1);
  auto s2 = party(2, flat(4, 3), 0.25, 2);
  const js::ProtocolConfig cfg{};
  const auto out = js::run_protocol(s1, s2, cfg);
  auto tampered = out.transcript;
  tampered.messages.back().payload["p"] = 0.75;
  EXPECT_THROW(js::replay(tampered, s1, s2, cfg), js::ProtocolError);
  auto truncated = out.transcript;
  truncated.messages.pop_back();
  EXPECT_THROW(js::replay(truncated, s1, s2, cfg), js::ProtocolError);
  auto other = s2;
  other.hist = flat(4, 5);
  EXPECT_THROW(js::replay(out.transcript, s1, other, cfg), js::ProtocolError);
}

TEST(Protocol, MissingHelloAndBadAdopt) {
  js::ProtocolParty p2(party(2, flat(3, 2), 0.25, 2), {});
  (void)p2.start();
  EXPECT_THROW(p2.receive({0, 1, js::MessageKind::MaxFreq, {{"F", 2}}}), js::ProtocolError);
  (void)p2.receive({0, 1, js::MessageKind::Hello, {{"n", 6}, {"eps", 0.25}, {"seed_share", 1}}});
  EXPECT_THROW(p2.receive({1, 1, js::MessageKind::Adopt, {{"p", 0.1}}}), js::DomainError);
  EXPECT_THROW(p2.receive({1, 1, js::MessageKind::Adopt, {{"p", 1.5}}}), js::DomainError);
  EXPECT_THROW(p2.receive({1, 1, js::MessageKind::Adopt, {{"q", 0.5}}}), js::ProtocolError);
}

TEST(Protocol, TranscriptParseErrors) {
  std::istringstream bad("{not json}\n");
  EXPECT_THROW(js::Transcript::read_jsonl(bad), js::ProtocolError);
  std::istringstream kind("{\"seq\":0,\"from\":1,\"kind\":\"SHOUT\",\"payload\":{}}\n");
  EXPECT_THROW(js::Transcript::read_jsonl(kind), js::ProtocolError);
  EXPECT_THROW(js::parse_protocol_mode("explorer"), js::UsageError);
}

TEST(Protocol, AdoptedPlanCoordinatesSamples) {
  std::vector<std::string> k1, k2;
  for (int i = 0; i < 3000; ++i) {
    k1.push_back(std::to_string(i % 500));
    k2.push_back(std::to_string((i * 13) % 500));
  }
  const auto t1 = table_of(k1), t2 = table_of(k2);
  const auto h1 = js::build_histogram(t1, "J"), h2 = js::build_histogram(t2, "J");
  const auto out = js::run_dictatorship(party(1, h1, 0.05, 8), party(2, h2, 0.05, 9), js::Aggregate::Count);
  const auto s1 = js::ubs_sample(t1, "J", {out.plan.p, out.plan.q1, out.hash_seed}, 1, 1);
  const auto s2 = js::ubs_sample(t2, "J", {out.plan.p, out.plan.q2, out.hash_seed}, 1, 2);
  EXPECT_TRUE(js::universe_consistent(s1, out.plan.p));
  EXPECT_TRUE(js::universe_consistent(s2, out.plan.p));
  EXPECT_NO_THROW(js::estimate(js::Aggregate::Count, s1, s2));
}
