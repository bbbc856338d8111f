#include <gtest/gtest.h>

#include <random>

#include "oracles/oracles.hpp"
#include "support.hpp"
#include "wicas/consensus/simulator.hpp"

using namespace wicas;
using namespace wicas::consensus;
using nlohmann::json;

namespace {

Digest d(int i) {
  Digest x;
  x.bytes[0] = static_cast<std::uint8_t>(i);
  return x;
}

using Stakes = std::map<std::string, std::uint64_t, std::less<>>;

Stakes unit_stakes(std::size_t n) {
  Stakes s;
  for (std::size_t i = 0; i < n; ++i) s["v" + std::to_string(i)] = 1;
  return s;
}

std::vector<Vote> votes_for(const std::vector<int>& digests) {
  std::vector<Vote> v;
  for (std::size_t i = 0; i < digests.size(); ++i) v.push_back({"v" + std::to_string(i), d(digests[i]), {}});
  return v;
}

Scenario small_scenario(std::vector<ValidatorSpec> validators, ConsensusPolicy policy) {
  Scenario s;
  s.validators = std::move(validators);
  s.policy = policy;
  s.model_id = "toy";
  s.model = ModelSpec{8, 256, 3};
  s.scenario_seed = 42;
  s.txs = {runtime::Register{"alice", "hi"},
           runtime::InferFromName{"alice", 12, toylm::DecodeMode::Sampled, "toy"},
           runtime::InferFromName{"alice", 12, toylm::DecodeMode::Greedy, "toy"}};
  return s;
}

Errc parse_error(const json& j, std::string* message = nullptr) {
  try {
    scenario_from_json(j);
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  return Errc::IoError;
}

}  // namespace

TEST(SelectResult, SpecExamples) {
  const auto m = select_result(votes_for({1, 1, 2, 1}), ConsensusPolicy::majority(), unit_stakes(4));
  EXPECT_EQ(m.agreed_digest, d(1));
  EXPECT_TRUE(m.decided);
  EXPECT_TRUE(m.divergence_detected);
  EXPECT_EQ(m.vote_tally.at(d(1)), (Tally{3, 3}));

  const Stakes abc = {{"A", 10}, {"B", 1}, {"C", 1}};
  const std::vector<Vote> sw = {{"A", d(1), {}}, {"B", d(2), {}}, {"C", d(2), {}}};
  EXPECT_EQ(select_result(sw, ConsensusPolicy::stake_weighted(), abc).agreed_digest, d(1));
  EXPECT_EQ(select_result(sw, ConsensusPolicy::majority(), abc).agreed_digest, d(2));

  const auto tie = select_result(votes_for({9, 3}), ConsensusPolicy::majority(), unit_stakes(2));
  EXPECT_EQ(tie.agreed_digest, d(3));
  EXPECT_TRUE(tie.decided);
}

TEST(SelectResult, ExactQuorumThresholds) {
  // 5 of 7 >= ceil(14/3) = 5
  auto q = select_result(votes_for({1, 1, 1, 1, 1, 2, 3}), ConsensusPolicy::exact_quorum(), unit_stakes(7));
  EXPECT_TRUE(q.decided);
  EXPECT_EQ(q.agreed_digest, d(1));
  EXPECT_TRUE(q.divergence_detected);
  // 4 of 7 is not enough
  q = select_result(votes_for({1, 1, 1, 1, 2, 2, 3}), ConsensusPolicy::exact_quorum(), unit_stakes(7));
  EXPECT_FALSE(q.decided);
  EXPECT_FALSE(q.agreed_digest);
  // Offline stake counts toward the total: 3 voters out of 5 is below 2/3.
  q = select_result(votes_for({1, 1, 1}), ConsensusPolicy::exact_quorum(), unit_stakes(5));
  EXPECT_FALSE(q.decided);
  q = select_result(votes_for({1, 1, 1, 1}), ConsensusPolicy::exact_quorum(), unit_stakes(5));
  EXPECT_TRUE(q.decided);
}

TEST(SelectResult, QuorumStakeIsCeiling) {
  EXPECT_EQ(quorum_stake(7, 2, 3), 5u);
  EXPECT_EQ(quorum_stake(6, 2, 3), 4u);
  EXPECT_EQ(quorum_stake(UINT64_MAX, 2, 3), 12297829382473034410u);
  EXPECT_EQ(quorum_stake(UINT64_MAX, 1, 1), UINT64_MAX);
}

TEST(SelectResult, Errors) {
  auto code_of = [](auto f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::IoError;
  };
  EXPECT_EQ(code_of([] { select_result({}, ConsensusPolicy::majority(), unit_stakes(1)); }), Errc::EmptyVoteSet);
  EXPECT_EQ(code_of([] { select_result(votes_for({1}), ConsensusPolicy::majority(), Stakes{}); }),
            Errc::InvalidScenario);
  EXPECT_EQ(code_of([] { select_result(votes_for({1}), ConsensusPolicy::exact_quorum(1, 2), unit_stakes(1)); }),
            Errc::InvalidScenario);
  EXPECT_EQ(code_of([] { select_result(votes_for({1}), ConsensusPolicy::exact_quorum(4, 3), unit_stakes(1)); }),
            Errc::InvalidScenario);
  const Stakes huge = {{"v0", UINT64_MAX}, {"v1", 1}};
  EXPECT_EQ(code_of([&] { select_result(votes_for({1, 1}), ConsensusPolicy::majority(), huge); }),
            Errc::InvalidScenario);
}

TEST(SelectResult, RandomAgainstOracles) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 1 + rng() % 9;
    std::vector<int> digests(n);
    std::vector<std::uint64_t> stake(n);
    Stakes stakes;
    for (std::size_t i = 0; i < n; ++i) {
      digests[i] = static_cast<int>(rng() % 4);
      stake[i] = 1 + rng() % 100;
      stakes["v" + std::to_string(i)] = stake[i];
    }
    const auto votes = votes_for(digests);
    EXPECT_EQ(select_result(votes, ConsensusPolicy::majority(), stakes).agreed_digest,
              d(oracle::brute_mode(digests)));
    EXPECT_EQ(select_result(votes, ConsensusPolicy::stake_weighted(), stakes).agreed_digest,
              d(oracle::brute_stake(digests, stake)));
    unsigned __int128 total = 0;
    for (auto s : stake) total += s;
    const auto q = select_result(votes, ConsensusPolicy::exact_quorum(), stakes);
    const auto expect = oracle::brute_quorum(digests, stake, total, 2, 3);
    EXPECT_EQ(q.decided, expect.has_value());
    if (expect) EXPECT_EQ(q.agreed_digest, d(*expect));
  }
}

TEST(Simulation, AllHonestReplicates) {
  testing_support::TempDir dir;
  const auto s = small_scenario({ValidatorSpec::honest("a"), ValidatorSpec::honest("b"), ValidatorSpec::honest("c"),
                                 ValidatorSpec::honest("d")},
                                ConsensusPolicy::exact_quorum());
  const auto r = run_scenario(s, dir.path());
  EXPECT_EQ(r.replication.status, ReplicationReport::Status::Replicated);
  EXPECT_TRUE(r.replication.mismatching_validators.empty());
  ASSERT_EQ(r.outcomes.size(), 3u);
  for (const auto& tx : r.outcomes) {
    EXPECT_TRUE(tx.outcome.decided);
    EXPECT_FALSE(tx.outcome.divergence_detected);
    EXPECT_EQ(tx.votes.size(), 4u);
  }
}

TEST(Simulation, OneDivergentLosesMajority) {
  testing_support::TempDir dir;
  const auto s = small_scenario({ValidatorSpec::honest("h0"), ValidatorSpec::honest("h1"),
                                 ValidatorSpec::honest("h2"), ValidatorSpec::divergent("x", 0x20)},
                                ConsensusPolicy::majority());
  const auto r = run_scenario(s, dir.path());
  const auto& infer = r.outcomes[1];
  EXPECT_TRUE(infer.outcome.divergence_detected);
  EXPECT_EQ(infer.outcome.agreed_digest, infer.votes[0].digest);  // h0
  EXPECT_NE(infer.votes[3].digest, infer.votes[0].digest);        // x
  EXPECT_FALSE(r.outcomes[0].outcome.divergence_detected);        // register does not touch the model
  EXPECT_EQ(r.replication.status, ReplicationReport::Status::Replicated);
  EXPECT_EQ(r.replication.mismatching_validators, std::vector<std::string>{"x"});
}

TEST(Simulation, SevenWithTwoDivergentDecidesUnderQuorum) {
  testing_support::TempDir dir;
  std::vector<ValidatorSpec> vs;
  for (int i = 0; i < 5; ++i) vs.push_back(ValidatorSpec::honest("h" + std::to_string(i)));
  vs.push_back(ValidatorSpec::divergent("x1", 0x01));
  vs.push_back(ValidatorSpec::divergent("x2", 0x02));
  const auto r = run_scenario(small_scenario(vs, ConsensusPolicy::exact_quorum()), dir.path());
  const auto& infer = r.outcomes[1].outcome;
  EXPECT_TRUE(infer.decided);
  EXPECT_TRUE(infer.divergence_detected);
  EXPECT_EQ(infer.vote_tally.size(), 3u);
  EXPECT_EQ(infer.vote_tally.at(*infer.agreed_digest).count, 5u);
}

TEST(Simulation, SequentialAndParallelAgree) {
  testing_support::TempDir dir;
  const auto s = small_scenario({ValidatorSpec::honest("a"), ValidatorSpec::divergent("b", 7),
                                 ValidatorSpec::offline("c"), ValidatorSpec::honest("d", 3)},
                                ConsensusPolicy::stake_weighted());
  const auto par = run_scenario(s, dir.path(), {.parallel = true});
  const auto seq = run_scenario(s, dir.path(), {.parallel = false});
  EXPECT_EQ(report_json(s, par).dump(), report_json(s, seq).dump());
  EXPECT_TRUE(par.logs[2].blocks.empty());
}

TEST(Simulation, NoHonestValidator) {
  testing_support::TempDir dir;
  const auto s = small_scenario({ValidatorSpec::divergent("a", 1), ValidatorSpec::offline("b")},
                                ConsensusPolicy::majority());
  try {
    run_scenario(s, dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoHonestValidator);
  }
}

TEST(Replication, MissingHeightsAndDivergence) {
  auto block = [](std::uint64_t h, int hash) { return chain::BlockRecord{h, {}, d(hash), {}}; };
  std::vector<ValidatorLog> logs = {{"a", Behavior::Honest, {block(1, 1), block(2, 2)}},
                                    {"b", Behavior::Honest, {block(1, 1)}}};
  EXPECT_EQ(verify_replication(logs).status, ReplicationReport::Status::MissingHeights);

  logs[1].blocks.push_back(block(2, 9));
  const auto r = verify_replication(logs);
  EXPECT_EQ(r.status, ReplicationReport::Status::Diverged);
  EXPECT_EQ(r.reference, "a");
  EXPECT_EQ(r.height, 2u);
  EXPECT_EQ(r.mismatching_validators, std::vector<std::string>{"b"});

  logs[1].behavior = Behavior::Divergent;
  const auto r2 = verify_replication(logs);
  EXPECT_EQ(r2.status, ReplicationReport::Status::Replicated);
  EXPECT_EQ(r2.mismatching_validators, std::vector<std::string>{"b"});

  logs.push_back({"c", Behavior::Offline, {}});
  EXPECT_EQ(verify_replication(logs).status, ReplicationReport::Status::Replicated);
}

TEST(ScenarioJson, ExamplesParseAndRoundTrip) {
  for (const auto& entry : std::filesystem::directory_iterator(testing_support::source_dir() / "examples/scenarios")) {
    std::ifstream in(entry.path());
    const auto s = scenario_from_json(json::parse(in));
    EXPECT_NO_THROW(s.validate()) << entry.path();
    EXPECT_EQ(to_json(scenario_from_json(to_json(s))).dump(), to_json(s).dump()) << entry.path();
  }
}

TEST(ScenarioJson, ErrorsNameTheField) {
  const json base = to_json(small_scenario({ValidatorSpec::honest("a")}, ConsensusPolicy::majority()));
  std::string msg;

  json j = base;
  j.erase("validators");
  EXPECT_EQ(parse_error(j, &msg), Errc::InvalidScenario);
  EXPECT_NE(msg.find("validators"), std::string::npos) << msg;

  j = base;
  j["validators"][0]["stake"] = 0;
  EXPECT_EQ(parse_error(j, &msg), Errc::InvalidScenario);
  EXPECT_NE(msg.find("validators[0].stake"), std::string::npos) << msg;

  j = base;
  j["validators"][0]["stake"] = "ten";
  EXPECT_EQ(parse_error(j, &msg), Errc::InvalidScenario);
  EXPECT_NE(msg.find("validators[0].stake"), std::string::npos) << msg;

  j = base;
  j["txs"][1] = {{"burn", json::object()}};
  EXPECT_EQ(parse_error(j, &msg), Errc::InvalidScenario);
  EXPECT_NE(msg.find("txs[1]"), std::string::npos) << msg;

  j = base;
  j["surprise"] = 1;
  EXPECT_EQ(parse_error(j, &msg), Errc::InvalidScenario);

  j = base;
  j["policy"] = {{"kind", "ExactQuorum"}, {"threshold_num", 1}, {"threshold_den", 2}};
  EXPECT_EQ(parse_error(j, &msg), Errc::InvalidScenario);

  j = base;
  j["validators"].push_back(j["validators"][0]);
  EXPECT_EQ(parse_error(j, &msg), Errc::InvalidScenario);
  EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;

  j = base;
  j["validators"][0]["id"] = "../etc";
  EXPECT_EQ(parse_error(j, &msg), Errc::InvalidScenario);
}
