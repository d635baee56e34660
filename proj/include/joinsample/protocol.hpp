#pragma once

// Two-party agreement on the shared universe rate p. Each party sees only
// its own table's statistics; the other side's size, budget and seed share
// arrive in a HELLO message. Parties are deterministic state machines that
// exchange messages over a FIFO duplex channel, and every run produces a
// transcript that can be replayed.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "joinsample/ams.hpp"
#include "joinsample/error.hpp"
#include "joinsample/estimator.hpp"
#include "joinsample/hash.hpp"
#include "joinsample/planner.hpp"
#include "joinsample/stats.hpp"

namespace joinsample {

enum class ProtocolMode { Dictatorship, Voter };

inline ProtocolMode parse_protocol_mode(std::string_view s) {
  if (s == "dictator" || s == "dictatorship") return ProtocolMode::Dictatorship;
  if (s == "voter") return ProtocolMode::Voter;
  throw UsageError("unknown protocol mode '" + std::string(s) + "'");
}

inline std::string_view to_string(ProtocolMode m) noexcept {
  return m == ProtocolMode::Dictatorship ? "dictator" : "voter";
}

enum class MessageKind { Hello, MaxFreq, Sketch, Propose, Adopt };

inline std::string_view to_string(MessageKind k) noexcept {
  switch (k) {
    case MessageKind::Hello: return "HELLO";
    case MessageKind::MaxFreq: return "MAXFREQ";
    case MessageKind::Sketch: return "SKETCH";
    case MessageKind::Propose: return "PROPOSE";
    case MessageKind::Adopt: return "ADOPT";
  }
  return "?";
}

inline MessageKind parse_message_kind(std::string_view s) {
  for (auto k : {MessageKind::Hello, MessageKind::MaxFreq, MessageKind::Sketch, MessageKind::Propose,
                 MessageKind::Adopt}) {
    if (to_string(k) == s) return k;
  }
  throw ProtocolError("unknown message kind '" + std::string(s) + "'");
}

struct Message {
  std::uint64_t seq = 0;
  int from = 1;
  MessageKind kind = MessageKind::Hello;
  nlohmann::json payload;

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"seq", seq}, {"from", from}, {"kind", std::string(to_string(kind))}, {"payload", payload}};
  }
  static Message from_json(const nlohmann::json& j) {
    try {
      return {j.at("seq").get<std::uint64_t>(), j.at("from").get<int>(),
              parse_message_kind(j.at("kind").get<std::string>()), j.at("payload")};
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("malformed transcript message: ") + e.what());
    }
  }
  friend bool operator==(const Message& x, const Message& y) {
    return x.seq == y.seq && x.from == y.from && x.kind == y.kind && x.payload == y.payload;
  }
};

// Number of numeric leaves in a payload.
inline std::size_t payload_scalars(const nlohmann::json& j) {
  if (j.is_number()) return 1;
  std::size_t n = 0;
  if (j.is_structured()) {
    for (const auto& x : j) n += payload_scalars(x);
  }
  return n;
}

struct Transcript {
  std::vector<Message> messages;

  void write_jsonl(std::ostream& out) const {
    for (const auto& m : messages) out << m.to_json().dump() << '\n';
  }
  [[nodiscard]] std::string jsonl() const {
    std::ostringstream s;
    write_jsonl(s);
    return s.str();
  }
  static Transcript read_jsonl(std::istream& in) {
    Transcript t;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        t.messages.push_back(Message::from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(std::string("transcript line is not JSON: ") + e.what());
      }
    }
    return t;
  }
  // Scalars carried after the HELLO exchange.
  [[nodiscard]] std::size_t scalars_after_hello() const {
    std::size_t n = 0;
    for (const auto& m : messages) {
      if (m.kind != MessageKind::Hello) n += payload_scalars(m.payload);
    }
    return n;
  }
};

// What one party knows locally.
struct PartyState {
  int id = 1;
  JoinKeyHistogram hist;
  std::optional<KeyAggregates> aggregates;  // only the party holding the aggregate column (T1)
  double eps = 1.0;
  std::int64_t n = 0;
  std::uint64_t seed_share = 0;
};

struct ProtocolConfig {
  ProtocolMode mode = ProtocolMode::Dictatorship;
  Aggregate agg = Aggregate::Count;
  std::uint32_t sketch_width = kDefaultSketchWidth;
  std::uint32_t sketch_depth = kDefaultSketchDepth;
};

inline std::uint64_t combine_seed_shares(std::uint64_t share1, std::uint64_t share2) noexcept {
  return derive_seed(share1, share2, 0x5eedULL);
}

class ProtocolParty {
 public:
  ProtocolParty(PartyState state, ProtocolConfig cfg) : s_(std::move(state)), cfg_(cfg) {
    if (s_.id != 1 && s_.id != 2) throw ProtocolError("party id must be 1 or 2");
    if (cfg_.mode == ProtocolMode::Voter && cfg_.agg != Aggregate::Count) {
      throw UsageError("the voter protocol is defined for COUNT only");
    }
    if (dictator() == s_.id && cfg_.agg != Aggregate::Count && !s_.aggregates) {
      throw ProtocolError("the dictator for SUM/AVG must hold the aggregate column");
    }
    if (!(s_.eps > 0.0 && s_.eps <= 1.0)) throw DomainError("party budget must be in (0, 1]");
    if (s_.hist.empty()) throw DomainError("party table is empty");
  }

  // COUNT dictatorship uses T1 as dictator too; SUM/AVG must, since T1 holds W.
  [[nodiscard]] int dictator() const noexcept { return 1; }
  [[nodiscard]] int id() const noexcept { return s_.id; }

  std::vector<Message> start() {
    if (started_) throw ProtocolError("party started twice");
    started_ = true;
    return {make(MessageKind::Hello, {{"n", s_.n}, {"eps", s_.eps}, {"seed_share", s_.seed_share}})};
  }

  std::vector<Message> receive(const Message& m) {
    if (m.from == s_.id) throw ProtocolError("party received its own message");
    if (!peer_ && m.kind != MessageKind::Hello) {
      throw ProtocolError("missing HELLO: got " + std::string(to_string(m.kind)) + " first");
    }
    try {
      switch (m.kind) {
        case MessageKind::Hello: return on_hello(m.payload);
        case MessageKind::MaxFreq: return on_maxfreq(m.payload);
        case MessageKind::Sketch: return on_sketch(m.payload);
        case MessageKind::Propose: return on_propose(m.payload);
        case MessageKind::Adopt: return on_adopt(m.payload);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("malformed payload: ") + e.what());
    }
    return {};
  }

  [[nodiscard]] const std::optional<Plan>& plan() const noexcept { return plan_; }
  [[nodiscard]] std::uint64_t hash_seed() const {
    if (!peer_) throw ProtocolError("hash seed is not agreed before HELLO");
    return s_.id == 1 ? combine_seed_shares(s_.seed_share, peer_->seed_share)
                      : combine_seed_shares(peer_->seed_share, s_.seed_share);
  }

 private:
  struct Peer {
    std::int64_t n = 0;
    double eps = 1.0;
    std::uint64_t seed_share = 0;
  };

  Message make(MessageKind k, nlohmann::json payload) const { return {0, s_.id, k, std::move(payload)}; }
  [[nodiscard]] double eps1() const { return s_.id == 1 ? s_.eps : peer_->eps; }
  [[nodiscard]] double eps2() const { return s_.id == 2 ? s_.eps : peer_->eps; }
  [[nodiscard]] bool is_dictator() const noexcept { return s_.id == dictator(); }

  void adopt(Plan plan) {
    if (plan_) throw ProtocolError("plan adopted twice");
    plan_ = std::move(plan);
  }

  std::vector<Message> decide_and_announce(Plan plan) {
    const double p = plan.p;
    adopt(std::move(plan));
    return {make(MessageKind::Adopt, {{"p", p}})};
  }

  std::vector<Message> on_hello(const nlohmann::json& j) {
    if (peer_) throw ProtocolError("duplicate HELLO");
    peer_ = Peer{j.at("n").get<std::int64_t>(), j.at("eps").get<double>(), j.at("seed_share").get<std::uint64_t>()};
    if (peer_->n < 1) throw ProtocolError("peer announced an empty table");
    check_budgets(eps1(), eps2());
    if (cfg_.mode == ProtocolMode::Voter) {
      own_proposal_ = voter_proposal();
      return {make(MessageKind::Propose, {{"p", own_proposal_->p}, {"worst_case_variance", own_proposal_->predicted_variance}})};
    }
    switch (cfg_.agg) {
      case Aggregate::Count:
        return {make(MessageKind::MaxFreq, {{"F", max_frequency(s_.hist)}})};
      case Aggregate::Sum:
        if (!is_dictator()) return {};
        return decide_and_announce(opt_sum_decentral(*s_.aggregates, peer_->n, eps1(), eps2()).plan);
      case Aggregate::Avg: {
        if (is_dictator()) return {};
        const auto sk = sketch_t2(s_.hist, cfg_.sketch_width, cfg_.sketch_depth, sketch_seed());
        return {make(MessageKind::Sketch, sketch_payload("b", sk.b)), make(MessageKind::Sketch, sketch_payload("b2", sk.b2))};
      }
    }
    return {};
  }

  std::vector<Message> on_maxfreq(const nlohmann::json& j) {
    if (cfg_.mode != ProtocolMode::Dictatorship || cfg_.agg != Aggregate::Count) {
      throw ProtocolError("unexpected MAXFREQ");
    }
    const auto f_peer = j.at("F").get<std::int64_t>();
    if (!is_dictator()) return {};
    const auto f_own = max_frequency(s_.hist);
    return decide_and_announce(opt_count_decentral(f_own, f_peer, eps1(), eps2()));
  }

  std::vector<Message> on_sketch(const nlohmann::json& j) {
    if (cfg_.agg != Aggregate::Avg || !is_dictator()) throw ProtocolError("unexpected SKETCH");
    const auto name = j.at("vector").get<std::string>();
    auto sk = AmsSketch::from_counters(j.at("width").get<std::uint32_t>(), j.at("depth").get<std::uint32_t>(),
                                       j.at("seed").get<std::uint64_t>(), j.at("counters").get<std::vector<double>>());
    if (name == "b") {
      peer_b_ = std::move(sk);
    } else if (name == "b2") {
      peer_b2_ = std::move(sk);
    } else {
      throw ProtocolError("unknown sketch vector '" + name + "'");
    }
    if (!peer_b_ || !peer_b2_) return {};
    const auto own = sketch_t1(*s_.aggregates, cfg_.sketch_width, cfg_.sketch_depth, sketch_seed());
    return decide_and_announce(opt_avg_decentral(own, AvgSketchesT2{*peer_b_, *peer_b2_}, eps1(), eps2()));
  }

  std::vector<Message> on_propose(const nlohmann::json& j) {
    if (cfg_.mode != ProtocolMode::Voter || !own_proposal_) throw ProtocolError("unexpected PROPOSE");
    const double p_peer = j.at("p").get<double>();
    const double v_peer = j.at("worst_case_variance").get<double>();
    const double v_own = own_proposal_->predicted_variance;
    // Smaller announced worst case wins; ties go to party 1.
    const bool own_wins = v_own < v_peer || (v_own == v_peer && s_.id == 1);
    if (own_wins) {
      adopt(*own_proposal_);
    } else {
      check_adopted(p_peer);
      Plan plan = make_plan(p_peer, eps1(), eps2(), PlanMode::Decentralized);
      plan.predicted_variance = v_peer;
      plan.objective = "worst_case";
      adopt(plan);
    }
    return {};
  }

  std::vector<Message> on_adopt(const nlohmann::json& j) {
    if (cfg_.mode != ProtocolMode::Dictatorship || is_dictator()) throw ProtocolError("unexpected ADOPT");
    const double p = j.at("p").get<double>();
    check_adopted(p);
    Plan plan = make_plan(p, eps1(), eps2(), PlanMode::Decentralized);
    plan.objective = "adopted";
    adopt(plan);
    return {};
  }

  void check_adopted(double p) const {
    const double lo = std::max(eps1(), eps2());
    if (!(p >= lo && p <= 1.0)) {
      throw DomainError("adopted p = " + std::to_string(p) + " outside [" + std::to_string(lo) + ", 1]");
    }
  }

  // Best p against the worst-case other table: all of the peer's tuples on
  // this party's most frequent key.
  [[nodiscard]] Plan voter_proposal() const {
    const auto adversary = worst_case_b(s_.hist, peer_->n);
    const Moments m = s_.id == 1 ? cross_moments(s_.hist, adversary) : cross_moments(adversary, s_.hist);
    Plan plan = opt_central(weights_of(m), eps1(), eps2());
    plan.mode = PlanMode::Decentralized;
    plan.objective = "worst_case";
    return plan;
  }

  [[nodiscard]] std::uint64_t sketch_seed() const { return derive_seed(hash_seed(), 0xa5a5ULL); }

  static nlohmann::json sketch_payload(std::string_view name, const AmsSketch& s) {
    return {{"vector", std::string(name)}, {"width", s.width()}, {"depth", s.depth()}, {"seed", s.seed()},
            {"counters", s.counters()}};
  }

  PartyState s_;
  ProtocolConfig cfg_;
  bool started_ = false;
  std::optional<Peer> peer_;
  std::optional<Plan> own_proposal_;
  std::optional<AmsSketch> peer_b_, peer_b2_;
  std::optional<Plan> plan_;
};

struct ProtocolOutcome {
  Plan plan;
  std::uint64_t hash_seed = 0;
  Transcript transcript;
};

namespace detail {

inline ProtocolOutcome finish(const ProtocolParty& a, const ProtocolParty& b, Transcript t) {
  if (!a.plan() || !b.plan()) throw ProtocolError("protocol ended without an agreed plan");
  if (a.plan()->p != b.plan()->p || a.plan()->q1 != b.plan()->q1 || a.plan()->q2 != b.plan()->q2) {
    throw ProtocolError("parties disagree on the plan");
  }
  if (a.hash_seed() != b.hash_seed()) throw ProtocolError("parties disagree on the hash seed");
  // Report the plan as seen by party 1 (it carries the dictator's objective).
  return {*a.plan(), a.hash_seed(), std::move(t)};
}

}  // namespace detail

// In-process run: both parties start, then messages are delivered FIFO per
// direction, alternating 2->1 and 1->2 until both queues drain.
inline ProtocolOutcome run_protocol(PartyState s1, PartyState s2, const ProtocolConfig& cfg) {
  if (s1.id != 1 || s2.id != 2) throw ProtocolError("parties must have ids 1 and 2");
  ProtocolParty p1(std::move(s1), cfg), p2(std::move(s2), cfg);
  Transcript t;
  std::deque<Message> to1, to2;
  auto send = [&](std::vector<Message> out) {
    for (auto& m : out) {
      m.seq = t.messages.size();
      t.messages.push_back(m);
      (m.from == 1 ? to2 : to1).push_back(std::move(m));
    }
  };
  send(p1.start());
  send(p2.start());
  while (!to1.empty() || !to2.empty()) {
    if (!to1.empty()) {
      const Message m = to1.front();
      to1.pop_front();
      send(p1.receive(m));
    }
    if (!to2.empty()) {
      const Message m = to2.front();
      to2.pop_front();
      send(p2.receive(m));
    }
  }
  return detail::finish(p1, p2, std::move(t));
}

inline ProtocolOutcome run_dictatorship(PartyState s1, PartyState s2, Aggregate agg) {
  return run_protocol(std::move(s1), std::move(s2), {ProtocolMode::Dictatorship, agg});
}

inline ProtocolOutcome run_voter(PartyState s1, PartyState s2) {
  return run_protocol(std::move(s1), std::move(s2), {ProtocolMode::Voter, Aggregate::Count});
}

// Re-feeds a recorded transcript to fresh parties. Every recorded message
// must be exactly what its sender produces at that point.
inline ProtocolOutcome replay(const Transcript& recorded, PartyState s1, PartyState s2, const ProtocolConfig& cfg) {
  ProtocolParty p1(std::move(s1), cfg), p2(std::move(s2), cfg);
  std::deque<Message> pending1, pending2;  // produced but not yet matched
  auto produce = [&](std::vector<Message> out) {
    for (auto& m : out) (m.from == 1 ? pending1 : pending2).push_back(std::move(m));
  };
  produce(p1.start());
  produce(p2.start());
  for (const auto& rec : recorded.messages) {
    auto& pending = rec.from == 1 ? pending1 : pending2;
    if (pending.empty()) {
      throw ProtocolError("transcript message " + std::to_string(rec.seq) + " was never produced by party " +
                          std::to_string(rec.from));
    }
    Message expect = pending.front();
    pending.pop_front();
    expect.seq = rec.seq;
    if (!(expect == rec)) {
      throw ProtocolError("transcript message " + std::to_string(rec.seq) + " differs from the replayed one");
    }
    produce((rec.from == 1 ? p2 : p1).receive(rec));
  }
  if (!pending1.empty() || !pending2.empty()) throw ProtocolError("transcript is truncated");
  return detail::finish(p1, p2, recorded);
}

}  // namespace joinsample
