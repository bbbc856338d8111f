#include <gtest/gtest.h>

#include <functional>

#include "facade_sequences.hpp"
#include "support.hpp"
#include "wicas/nn/facade.hpp"

using namespace wicas;
using namespace wicas::nn;
using testing_support::TempDir;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::IoError;
}

DecodeParams greedy(std::uint32_t n) {
  DecodeParams p;
  p.max_tokens = n;
  return p;
}

struct FacadeFixture : ::testing::Test {
  TempDir dir;
  Facade facade{dir.path()};
  void SetUp() override { testing_support::install(dir.path(), "hot", testing_support::one_hot_model()); }
};

}  // namespace

TEST_F(FacadeFixture, HappyPath) {
  const auto g = facade.build_from_cache("hot");
  EXPECT_EQ(g.model_id, "hot");
  EXPECT_EQ(g.model_size_bytes, 18584u);
  const auto ctx = facade.init_execution_context(g, 0, greedy(5));
  EXPECT_EQ(facade.state(ctx), ContextState::Created);
  facade.set_input(ctx, 0, Tensor::text("hi"));
  EXPECT_EQ(facade.state(ctx), ContextState::InputSet);
  facade.compute(ctx);
  Bytes out(16);
  EXPECT_EQ(facade.get_output(ctx, 0, out), 5u);
  EXPECT_EQ(to_string(ByteSpan(out).first(5)), "AAAAA");
  EXPECT_EQ(facade.result(ctx).tokens_generated, 5u);
}

TEST_F(FacadeFixture, OutputTruncatesSilently) {
  const auto ctx = facade.init_execution_context(facade.build_from_cache("hot"), 0, greedy(5));
  facade.set_input(ctx, 0, Tensor::text("hi"));
  facade.compute(ctx);
  Bytes small(2);
  EXPECT_EQ(facade.get_output(ctx, 0, small), 2u);
  EXPECT_EQ(to_string(small), "AA");
  EXPECT_EQ(facade.get_output(ctx, 0, {}), 0u);
}

TEST_F(FacadeFixture, SetInputIsRepeatableBeforeCompute) {
  const auto ctx = facade.init_execution_context(facade.build_from_cache("hot"), 0, greedy(3));
  facade.set_input(ctx, 0, Tensor::text("first"));
  facade.set_input(ctx, 0, Tensor::text("x"));
  facade.compute(ctx);
  EXPECT_EQ(to_string(facade.result(ctx).output), "AAA");
}

TEST_F(FacadeFixture, CallOrderExhaustive) {
  const auto s = facade_sequences::run_all(facade, "hot");
  EXPECT_EQ(s.sequences, 39u);
  EXPECT_GT(s.illegal_calls, 0u);
  for (const auto& f : s.failures) ADD_FAILURE() << f;
}

TEST_F(FacadeFixture, IndexAndTensorErrors) {
  const auto ctx = facade.init_execution_context(facade.build_from_cache("hot"), 0, greedy(3));
  EXPECT_EQ(code_of([&] { facade.set_input(ctx, 1, Tensor::text("x")); }), Errc::InvalidIndex);
  EXPECT_EQ(code_of([&] { facade.set_input(ctx, 0, Tensor{{1}, TensorType::F32, {0, 0, 0, 0}}); }),
            Errc::UnsupportedTensorType);
  EXPECT_EQ(code_of([&] { facade.set_input(ctx, 0, Tensor{{}, TensorType::U8, {1}}); }), Errc::InvalidTensor);
  EXPECT_EQ(code_of([&] { facade.set_input(ctx, 0, Tensor{{0}, TensorType::U8, {}}); }), Errc::InvalidTensor);
  EXPECT_EQ(code_of([&] { facade.set_input(ctx, 0, Tensor{{2, 2}, TensorType::U8, {1, 2, 3}}); }),
            Errc::InvalidTensor);
  EXPECT_EQ(facade.state(ctx), ContextState::Created);

  facade.set_input(ctx, 0, Tensor{{2, 2}, TensorType::U8, {'a', 'b', 'c', 'd'}});
  facade.compute(ctx);
  Bytes out(4);
  EXPECT_EQ(code_of([&] { facade.get_output(ctx, 1, out); }), Errc::InvalidIndex);
}

TEST_F(FacadeFixture, EngineErrorsSurfaceAsEngineFailure) {
  testing_support::install(dir.path(), "tiny", testing_support::one_hot_model(4, 2));
  const auto ctx = facade.init_execution_context(facade.build_from_cache("tiny"), 0, greedy(3));
  facade.set_input(ctx, 0, Tensor::text("too long"));
  EXPECT_EQ(code_of([&] { facade.compute(ctx); }), Errc::EngineFailure);
  EXPECT_EQ(facade.state(ctx), ContextState::InputSet);
}

TEST_F(FacadeFixture, UnknownHandles) {
  EXPECT_EQ(code_of([&] { facade.init_execution_context(99, 0, greedy(1)); }), Errc::UnknownGraph);
  EXPECT_EQ(code_of([&] { facade.compute(ContextId{77}); }), Errc::UnknownContext);
  const auto g = facade.build_from_cache("hot");
  const auto ctx = facade.init_execution_context(g, 0, greedy(1));
  facade.release_graph(g.id);
  EXPECT_EQ(code_of([&] { facade.init_execution_context(g, 0, greedy(1)); }), Errc::UnknownGraph);
  facade.set_input(ctx, 0, Tensor::text("x"));
  facade.compute(ctx);  // the context keeps its model
  facade.release_context(ctx);
  EXPECT_EQ(code_of([&] { facade.state(ctx); }), Errc::UnknownContext);
}

TEST_F(FacadeFixture, InvalidParamsAtInit) {
  const auto g = facade.build_from_cache("hot");
  EXPECT_EQ(code_of([&] { facade.init_execution_context(g, 0, greedy(0)); }), Errc::InvalidParams);
}

TEST_F(FacadeFixture, ModelLookupErrors) {
  EXPECT_EQ(code_of([&] { facade.build_from_cache("absent"); }), Errc::ModelNotFound);
  EXPECT_EQ(code_of([&] { facade.build_from_cache("../etc/passwd"); }), Errc::ModelNotFound);
  EXPECT_EQ(code_of([&] { facade.build_from_cache(""); }), Errc::ModelNotFound);
  write_file(dir / "broken.wicm", as_bytes("WICMxx"));
  EXPECT_EQ(code_of([&] { facade.build_from_cache("broken"); }), Errc::ModelCorrupt);
}

TEST_F(FacadeFixture, PreloadShadowsCache) {
  facade.preload("hot", std::make_shared<const toylm::Model>(testing_support::one_hot_model(4, 64, 66)));
  const auto ctx = facade.init_execution_context(facade.build_from_cache("hot"), 0, greedy(2));
  facade.set_input(ctx, 0, Tensor::text("x"));
  facade.compute(ctx);
  EXPECT_EQ(to_string(facade.result(ctx).output), "BB");
  EXPECT_EQ(code_of([&] { facade.preload("bad id", nullptr); }), Errc::InvalidModelId);
}

TEST_F(FacadeFixture, XorMaskCorruptsOutputAndDigest) {
  facade.set_output_xor_mask(0x01);
  const auto ctx = facade.init_execution_context(facade.build_from_cache("hot"), 0, greedy(3));
  facade.set_input(ctx, 0, Tensor::text("x"));
  facade.compute(ctx);
  EXPECT_EQ(to_string(facade.result(ctx).output), "@@@");
  EXPECT_EQ(facade.result(ctx).digest, sha256(std::string_view("@@@")));
}

TEST(FacadeIsolation, SeparateInstancesShareNothing) {
  TempDir dir;
  testing_support::install(dir.path(), "hot", testing_support::one_hot_model());
  Facade a(dir.path()), b(dir.path());
  const auto ga = a.build_from_cache("hot");
  EXPECT_EQ(b.loaded_models(), 0u);
  const auto ctx = a.init_execution_context(ga, 0, greedy(1));
  EXPECT_EQ(code_of([&] { b.state(ctx); }), Errc::UnknownContext);
}

TEST(TensorValidation, OpaqueStringAndShapes) {
  EXPECT_TRUE(Tensor::text("abc").is_opaque_string());
  EXPECT_NO_THROW(Tensor::text("abc").validate());
  EXPECT_NO_THROW((Tensor{{3}, TensorType::U8, {1, 2, 3}}.validate()));
  EXPECT_NO_THROW((Tensor{{2}, TensorType::F64, Bytes(16)}.validate()));
  EXPECT_THROW((Tensor{{2}, TensorType::F64, Bytes(15)}.validate()), Error);
}
