#include <gtest/gtest.h>

#include "name_service_corpus.hpp"
#include "oracles/oracles.hpp"
#include "support.hpp"
#include "wicas/runtime/runtime.hpp"

using namespace wicas;
using namespace wicas::runtime;

namespace {

struct NativeFixture : ::testing::Test {
  testing_support::TempDir dir;
  chain::ChainState state;
  nn::Facade facade{dir.path()};
  Runtime rt{state, facade};
  Address addr;
  std::uint64_t height = 0;

  void SetUp() override {
    testing_support::install(dir.path(), "hot", testing_support::one_hot_model());
    addr = rt.instantiate(name_service_code_id());
  }

  ExecResult exec(const ExecuteMsg& msg, std::optional<std::uint64_t> limit = std::nullopt) {
    ++height;
    return rt.execute(addr, msg, {"wicas-1", height, sha256(std::to_string(height))}, limit);
  }
};

InferFromName infer(std::string name, std::uint32_t tokens, std::string model = "hot",
                    toylm::DecodeMode mode = toylm::DecodeMode::Greedy) {
  return {std::move(name), tokens, mode, std::move(model)};
}

}  // namespace

TEST(Address, GoldenVectors) {
  for (const auto& v : testing_support::golden()["address"]) {
    chain::ChainState state;
    testing_support::TempDir dir;
    nn::Facade facade(dir.path());
    Runtime rt(state, facade);
    Bytes counter;
    put_u64_le(counter, v["counter"].get<std::uint64_t>());
    state.set(k_instance_counter_key, to_string(counter));
    const auto a = rt.instantiate(CodeId::from_hex(v["code_id"].get<std::string>()));
    EXPECT_EQ(a.hex(), v["address"].get<std::string>());
  }
}

TEST_F(NativeFixture, RegisterResolve) {
  const auto r1 = exec(Register{"alice", "hi"});
  ASSERT_TRUE(r1.ok()) << r1.error_message;
  EXPECT_EQ(r1.events, (std::vector<Event>{{"action", "register"}, {"name", "alice"}}));
  EXPECT_EQ(r1.gas, (chain::GasReceipt{0, 0, 0, 50, 50}));
  EXPECT_EQ(state.get(contract_prefix(addr) + "name/alice"), "hi");

  const auto r2 = exec(Resolve{"alice"});
  EXPECT_EQ(r2.events, (std::vector<Event>{{"action", "resolve"}, {"name", "alice"}, {"value", "hi"}}));
  EXPECT_EQ(r2.gas.total, 0u);
}

TEST_F(NativeFixture, ErrorsLeaveStateUntouched) {
  exec(Register{"alice", "hi"});
  const auto snapshot = state;
  EXPECT_EQ(exec(Resolve{"bob"}).error, Errc::NameNotFound);
  EXPECT_EQ(exec(Register{"Alice", "x"}).error, Errc::InvalidName);
  EXPECT_EQ(exec(Register{std::string(65, 'a'), "x"}).error, Errc::InvalidName);
  EXPECT_EQ(exec(Register{"alice", std::string(257, 'x')}).error, Errc::InvalidMessage);
  EXPECT_EQ(exec(infer("alice", 0)).error, Errc::InvalidMessage);
  EXPECT_EQ(exec(infer("alice", 257)).error, Errc::InvalidMessage);
  EXPECT_EQ(exec(infer("alice", 5, "absent")).error, Errc::ModelNotFound);
  EXPECT_EQ(exec(infer("nobody", 5)).error, Errc::NameNotFound);
  EXPECT_EQ(state, snapshot);
  EXPECT_EQ(rt.execute(Address{}, Resolve{"a"}, {}).error, Errc::UnknownContract);
  EXPECT_THROW(rt.instantiate(sha256(std::string_view("nope"))), Error);
}

TEST_F(NativeFixture, InferenceReceiptIsClosedForm) {
  exec(Register{"alice", "hi"});
  const auto r = exec(infer("alice", 5));
  ASSERT_TRUE(r.ok()) << r.error_message;
  ASSERT_TRUE(r.inference);
  EXPECT_EQ(to_string(r.inference->output), "AAAAA");
  EXPECT_EQ(r.inference->tokens_generated, 5u);
  EXPECT_EQ(r.gas.base, 1000u);
  EXPECT_EQ(r.gas.model_component, 190u);
  EXPECT_EQ(r.gas.token_component, 500u);
  EXPECT_EQ(r.gas.storage_component, 50u);
  EXPECT_EQ(r.gas.total, oracle::inference_gas(18584, 5) + 50);
  EXPECT_EQ(r.events[2], (Event{"output_bytes", "5"}));
  EXPECT_EQ(r.events[3], (Event{"digest", sha256(std::string_view("AAAAA")).hex()}));
  EXPECT_EQ(state.get(contract_prefix(addr) + "infer/alice"), sha256(std::string_view("AAAAA")).hex());
}

TEST_F(NativeFixture, OutOfGasKeepsChargedGasOnly) {
  exec(Register{"alice", "hi"});
  const auto snapshot = state;
  // Enough for nothing: the inference charge is refused whole.
  const auto r = exec(infer("alice", 5), 1500);
  EXPECT_EQ(r.error, Errc::OutOfGas);
  EXPECT_EQ(r.gas.total, 0u);
  EXPECT_FALSE(r.inference);
  // Inference fits, the final storage write does not.
  const auto r2 = exec(infer("alice", 5), 1690 + 49);
  EXPECT_EQ(r2.error, Errc::OutOfGas);
  EXPECT_EQ(r2.gas.total, 1690u);
  EXPECT_EQ(state, snapshot);
  EXPECT_EQ(exec(Register{"bob", "x"}, 10).error, Errc::OutOfGas);
}

TEST_F(NativeFixture, EarlyEosIsChargedForTokensActuallyGenerated) {
  testing_support::install(dir.path(), "zero", toylm::zero_model(4, 64));
  exec(Register{"alice", "hi"});
  const auto r = exec(infer("alice", 200, "zero"));
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.inference->tokens_generated, 1u);
  EXPECT_EQ(r.gas.token_component, 100u);
}

TEST_F(NativeFixture, SampledInferenceFollowsBeacon) {
  auto model = toylm::generate_model(8, 256, 3);
  testing_support::install(dir.path(), "rand", model);
  exec(Register{"alice", "hello"});
  ++height;
  const BlockContext block{"wicas-1", height, sha256(std::string_view("tx"))};
  const auto r = rt.execute(addr, infer("alice", 16, "rand", toylm::DecodeMode::Sampled), block);
  ASSERT_TRUE(r.ok()) << r.error_message;
  const auto seed = chain::derive_seed("wicas-1", height, block.tx_hash).seed;
  toylm::DecodeParams p;
  p.mode = toylm::DecodeMode::Sampled;
  p.max_tokens = 16;
  const auto expect = toylm::decode(model, as_bytes(inference_prompt("alice", "hello")), p, seed);
  EXPECT_EQ(r.inference->output, expect.output);
  EXPECT_EQ(r.inference->tokens_generated, expect.tokens_generated);
}

TEST(Messages, JsonRoundTripAndErrors) {
  const ExecuteMsg m = InferFromName{"a", 3, toylm::DecodeMode::Sampled, "toy"};
  EXPECT_EQ(msg_from_json(to_json(m)), m);
  auto code_of = [](std::string_view text) {
    try {
      msg_from_json_text(text);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::IoError;
  };
  EXPECT_EQ(code_of("{"), Errc::ParseError);
  EXPECT_EQ(code_of("{}"), Errc::InvalidMessage);
  EXPECT_EQ(code_of(R"({"register":{"name":"a"}})"), Errc::InvalidMessage);
  EXPECT_EQ(code_of(R"({"register":{"name":"a","value":"b","x":1}})"), Errc::InvalidMessage);
  EXPECT_EQ(code_of(R"({"infer_from_name":{"name":"a","max_tokens":-1,"mode":"greedy","model_id":"m"}})"),
            Errc::InvalidMessage);
  EXPECT_EQ(code_of(R"({"infer_from_name":{"name":"a","max_tokens":1,"mode":"beam","model_id":"m"}})"),
            Errc::InvalidMessage);
  EXPECT_EQ(code_of(R"({"transfer":{}})"), Errc::InvalidMessage);
}

TEST(Differential, NativeAndWasmAgree) {
  testing_support::TempDir dir;
  const Bytes code = read_file(testing_support::source_dir() / "contracts/name_service.wasm");
  ns_corpus::Pair pair(dir.path(), code);
  const auto msgs = ns_corpus::messages(60, 1);
  for (const auto& m : ns_corpus::run_differential(pair, msgs)) {
    ADD_FAILURE() << "message " << m.index << "\nnative: " << m.native_json << "\nwasm:   " << m.wasm_json;
  }
  // Storage under each contract's prefix must also match.
  auto strip = [](const chain::ChainState& s, const Address& a) {
    std::map<std::string, std::string> out;
    const std::string prefix = contract_prefix(a);
    for (const auto& [k, v] : s.kv) {
      if (k.starts_with(prefix)) out[k.substr(prefix.size())] = v;
    }
    return out;
  };
  EXPECT_EQ(strip(pair.native_state, pair.native_addr), strip(pair.wasm_state, pair.wasm_addr));
}
