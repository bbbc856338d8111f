#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wicas/chain/beacon.hpp"
#include "wicas/chain/gas.hpp"
#include "wicas/chain/state.hpp"
#include "wicas/common/error.hpp"
#include "wicas/common/sha256.hpp"
#include "wicas/nn/facade.hpp"

namespace wicas::runtime {

/// Public block data visible to a contract.
struct BlockContext {
  std::string chain_id;
  std::uint64_t height = 0;
  Digest tx_hash;
};

/// Host ABI status codes shared by native and WASM contracts.
enum class HostStatus : std::int32_t {
  Ok = 0,
  InvalidState = 1,
  InvalidIndex = 2,
  ModelNotFound = 3,
  EngineFailure = 4,
};

constexpr HostStatus host_status_for(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidState:
    case Errc::UnknownGraph:
    case Errc::UnknownContext: return HostStatus::InvalidState;
    case Errc::InvalidIndex: return HostStatus::InvalidIndex;
    case Errc::ModelNotFound: return HostStatus::ModelNotFound;
    default: return HostStatus::EngineFailure;
  }
}

constexpr Errc errc_for(HostStatus s) noexcept {
  switch (s) {
    case HostStatus::InvalidState: return Errc::InvalidState;
    case HostStatus::InvalidIndex: return Errc::InvalidIndex;
    case HostStatus::ModelNotFound: return Errc::ModelNotFound;
    default: return Errc::EngineFailure;
  }
}

struct InferenceRecord {
  Bytes output;
  Digest digest;
  std::uint32_t tokens_generated = 0;
  bool operator==(const InferenceRecord&) const = default;
};

/// Everything a contract may touch during one transaction: its own prefixed
/// storage (buffered until commit), the gas meter, and the inference facade.
///
/// Storage reads are free; each write costs one storage op. Inference is
/// charged at compute time from the actual token count. Graphs and contexts
/// opened here are released when the environment is destroyed.
class HostEnv {
 public:
  HostEnv(const chain::ChainState& base, std::string key_prefix, const chain::GasSchedule& schedule,
          chain::GasMeter& meter, nn::Facade& facade, BlockContext block)
      : base_(&base),
        prefix_(std::move(key_prefix)),
        schedule_(schedule),
        meter_(&meter),
        facade_(&facade),
        block_(std::move(block)) {}

  HostEnv(const HostEnv&) = delete;
  HostEnv& operator=(const HostEnv&) = delete;

  ~HostEnv() {
    for (auto ctx : contexts_) facade_->release_context(ctx);
    for (const auto& g : graphs_) facade_->release_graph(g.id);
  }

  const BlockContext& block() const noexcept { return block_; }

  std::optional<std::string> storage_get(std::string_view key) const {
    if (auto it = writes_.find(key); it != writes_.end()) return it->second;
    return base_->get(prefix_ + std::string(key));
  }

  void storage_set(std::string_view key, std::string_view value) {
    meter_->charge(schedule_.g_per_storage_op, chain::GasCategory::Storage);
    writes_.insert_or_assign(std::string(key), std::string(value));
  }

  void gas_consume(std::uint64_t amount) { meter_->charge(amount, chain::GasCategory::Base); }

  /// Graph index >= 0, or -status.
  std::int32_t nn_build_from_cache(std::string_view model_id) {
    return guarded([&] {
      graphs_.push_back(facade_->build_from_cache(model_id));
      return static_cast<std::int32_t>(graphs_.size() - 1);
    });
  }

  /// Context index >= 0, or -status. mode: 0 greedy, 1 sampled (temperature 1).
  std::int32_t nn_init_ctx(std::int32_t graph, std::uint64_t seed, std::uint32_t mode, std::uint32_t max_tokens) {
    return guarded([&] {
      if (graph < 0 || static_cast<std::size_t>(graph) >= graphs_.size()) throw Error(Errc::UnknownGraph);
      if (mode > 1) throw Error(Errc::InvalidParams, "mode");
      nn::DecodeParams params;
      params.mode = mode == 0 ? nn::DecodeMode::Greedy : nn::DecodeMode::Sampled;
      params.max_tokens = max_tokens;
      contexts_.push_back(facade_->init_execution_context(graphs_[static_cast<std::size_t>(graph)].id, seed, params));
      return static_cast<std::int32_t>(contexts_.size() - 1);
    });
  }

  std::int32_t nn_set_input(std::int32_t ctx, std::uint32_t index, ByteSpan prompt) {
    return guarded([&] {
      facade_->set_input(context(ctx), index, nn::Tensor{{1}, nn::TensorType::U8, Bytes(prompt.begin(), prompt.end())});
      return 0;
    });
  }

  /// Runs the decode and charges inference gas. OutOfGas propagates as an
  /// exception: it aborts the transaction rather than returning a status.
  std::int32_t nn_compute(std::int32_t ctx) {
    nn::ContextId id;
    std::int32_t status = guarded([&] {
      id = context(ctx);
      facade_->compute(id);
      return 0;
    });
    if (status != 0) return status;
    const auto& r = facade_->result(id);
    meter_->charge_inference(
        chain::inference_gas(schedule_, facade_->graph_of(id).model_size_bytes, r.tokens_generated));
    inference_ = InferenceRecord{r.output, r.digest, r.tokens_generated};
    return 0;
  }

  /// Bytes written >= 0, or -status.
  std::int32_t nn_get_output(std::int32_t ctx, std::uint32_t index, std::span<std::uint8_t> out) {
    return guarded([&] { return static_cast<std::int32_t>(facade_->get_output(context(ctx), index, out)); });
  }

  const std::map<std::string, std::string, std::less<>>& writes() const noexcept { return writes_; }
  const std::optional<InferenceRecord>& inference() const noexcept { return inference_; }
  const std::string& key_prefix() const noexcept { return prefix_; }

 private:
  nn::ContextId context(std::int32_t ctx) const {
    if (ctx < 0 || static_cast<std::size_t>(ctx) >= contexts_.size()) throw Error(Errc::UnknownContext);
    return contexts_[static_cast<std::size_t>(ctx)];
  }

  template <typename F>
  std::int32_t guarded(F&& f) {
    try {
      return f();
    } catch (const Error& e) {
      if (e.code() == Errc::OutOfGas) throw;
      return -static_cast<std::int32_t>(host_status_for(e.code()));
    }
  }

  const chain::ChainState* base_;
  std::string prefix_;
  chain::GasSchedule schedule_;
  chain::GasMeter* meter_;
  nn::Facade* facade_;
  BlockContext block_;
  std::map<std::string, std::string, std::less<>> writes_;
  std::vector<nn::GraphHandle> graphs_;
  std::vector<nn::ContextId> contexts_;
  std::optional<InferenceRecord> inference_;
};

}  // namespace wicas::runtime
