#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wicas/common/bytes.hpp"
#include "wicas/common/error.hpp"
#include "wicas/toylm/engine.hpp"
#include "wicas/toylm/model.hpp"

namespace wicas::nn {

using toylm::DecodeMode;
using toylm::DecodeParams;

enum class TensorType : std::uint8_t { U8 = 0, F32 = 1, F64 = 2 };

constexpr std::size_t tensor_type_size(TensorType t) noexcept {
  switch (t) {
    case TensorType::U8: return 1;
    case TensorType::F32: return 4;
    case TensorType::F64: return 8;
  }
  return 0;
}

/// Typed byte buffer. A U8 tensor with dims == {1} is the opaque-string form
/// used for prompts: one element holding the whole byte sequence.
struct Tensor {
  std::vector<std::uint32_t> dims;
  TensorType type = TensorType::U8;
  Bytes data;

  static Tensor text(std::string_view s) { return {{1}, TensorType::U8, to_bytes(s)}; }

  bool is_opaque_string() const noexcept {
    return type == TensorType::U8 && dims.size() == 1 && dims[0] == 1 && !data.empty();
  }

  void validate() const {
    if (dims.empty()) throw Error(Errc::InvalidTensor, "dims must be non-empty");
    if (std::any_of(dims.begin(), dims.end(), [](std::uint32_t d) { return d == 0; })) {
      throw Error(Errc::InvalidTensor, "every dim must be >= 1");
    }
    if (is_opaque_string()) return;
    std::uint64_t elems = 1;
    for (std::uint32_t d : dims) {
      if (elems > UINT64_MAX / d) throw Error(Errc::InvalidTensor, "dims overflow");
      elems *= d;
    }
    if (elems > UINT64_MAX / tensor_type_size(type) || elems * tensor_type_size(type) != data.size()) {
      throw Error(Errc::InvalidTensor, "product(dims) * sizeof(type) != data length");
    }
  }
};

struct GraphHandle {
  std::uint64_t id = 0;
  std::string model_id;
  std::uint64_t model_size_bytes = 0;
};

enum class ContextState : std::uint8_t { Created, InputSet, Computed };

constexpr std::string_view context_state_name(ContextState s) noexcept {
  switch (s) {
    case ContextState::Created: return "Created";
    case ContextState::InputSet: return "InputSet";
    case ContextState::Computed: return "Computed";
  }
  return "?";
}

struct ContextId {
  std::uint64_t value = 0;
  auto operator<=>(const ContextId&) const = default;
};

/// Model ids are file stems in the cache directory: [A-Za-z0-9._-]{1,64}.
inline bool is_valid_model_id(std::string_view id) noexcept {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '.' ||
           c == '_' || c == '-';
  });
}

/// Inference host interface over a directory of `<model_id>.wicm` files.
///
/// Call order per context: init -> set_input (repeatable) -> compute -> get_output
/// (repeatable). Anything else raises InvalidState and leaves the context as it
/// was. One instance is owned by one thread; separate instances share nothing.
class Facade {
 public:
  explicit Facade(std::filesystem::path cache_root) : cache_root_(std::move(cache_root)) {}

  Facade(const Facade&) = delete;
  Facade& operator=(const Facade&) = delete;
  Facade(Facade&&) = default;
  Facade& operator=(Facade&&) = default;

  /// Simulates a faulty node: every computed output byte is XORed with the
  /// mask. Zero (the default) is an honest node.
  void set_output_xor_mask(std::uint8_t mask) noexcept { xor_mask_ = mask; }
  std::uint8_t output_xor_mask() const noexcept { return xor_mask_; }

  const std::filesystem::path& cache_root() const noexcept { return cache_root_; }

  /// Installs an in-memory model under `model_id`, shadowing the cache file.
  /// The model is immutable, so one instance may back several facades.
  void preload(std::string_view model_id, std::shared_ptr<const toylm::Model> model) {
    if (!is_valid_model_id(model_id)) throw Error(Errc::InvalidModelId, std::string(model_id));
    models_[std::string(model_id)] = std::move(model);
  }

  GraphHandle build_from_cache(std::string_view model_id) {
    if (!is_valid_model_id(model_id)) {
      // Anything outside the id alphabet cannot name a cache entry.
      throw Error(Errc::ModelNotFound, "invalid model id '" + std::string(model_id) + "'");
    }
    std::string key(model_id);
    auto cached = models_.find(key);
    if (cached == models_.end()) {
      const auto path = cache_root_ / (key + ".wicm");
      std::error_code ec;
      if (!std::filesystem::is_regular_file(path, ec)) {
        throw Error(Errc::ModelNotFound, "no cache entry " + path.string());
      }
      Bytes raw = read_file(path);
      std::shared_ptr<const toylm::Model> model;
      try {
        model = std::make_shared<const toylm::Model>(toylm::load_model(raw));
      } catch (const Error& e) {
        throw Error(Errc::ModelCorrupt, key + ": " + e.what());
      }
      cached = models_.emplace(key, std::move(model)).first;
    }
    GraphHandle handle{next_graph_id_++, key, cached->second->size_bytes};
    graphs_.emplace(handle.id, Graph{handle, cached->second});
    return handle;
  }

  /// Drops a graph; later use of its id raises UnknownGraph. Contexts already
  /// created from it keep the model alive.
  void release_graph(std::uint64_t graph_id) { graphs_.erase(graph_id); }

  ContextId init_execution_context(std::uint64_t graph_id, std::uint64_t seed, const DecodeParams& params) {
    auto g = graphs_.find(graph_id);
    if (g == graphs_.end()) throw Error(Errc::UnknownGraph, "graph " + std::to_string(graph_id));
    params.validate();
    ContextId id{next_context_id_++};
    contexts_.emplace(id, Context{g->second.handle, g->second.model, ContextState::Created, seed, params, {}, {}});
    return id;
  }
  ContextId init_execution_context(const GraphHandle& graph, std::uint64_t seed, const DecodeParams& params) {
    return init_execution_context(graph.id, seed, params);
  }

  void release_context(ContextId id) { contexts_.erase(id); }

  void set_input(ContextId id, std::uint32_t index, const Tensor& tensor) {
    Context& ctx = lookup(id);
    if (ctx.state == ContextState::Computed) throw Error(Errc::InvalidState, "set_input after compute");
    if (index != 0) throw Error(Errc::InvalidIndex, "input index " + std::to_string(index));
    if (tensor.type != TensorType::U8) throw Error(Errc::UnsupportedTensorType, "only U8 input is supported");
    tensor.validate();
    ctx.prompt = tensor.data;
    ctx.result.reset();
    ctx.state = ContextState::InputSet;
  }

  void compute(ContextId id) {
    Context& ctx = lookup(id);
    if (ctx.state != ContextState::InputSet) {
      throw Error(Errc::InvalidState, std::string("compute in state ") + std::string(context_state_name(ctx.state)));
    }
    toylm::DecodeResult r;
    try {
      r = toylm::decode(*ctx.model, ctx.prompt, ctx.params, ctx.seed);
    } catch (const Error& e) {
      throw Error(Errc::EngineFailure, e.what());
    }
    if (xor_mask_ != 0) {
      for (auto& b : r.output) b ^= xor_mask_;
      r.digest = sha256(r.output);
    }
    ctx.result = std::move(r);
    ctx.state = ContextState::Computed;
  }

  /// Copies min(out.size(), output length) bytes; truncation is silent.
  std::uint32_t get_output(ContextId id, std::uint32_t index, std::span<std::uint8_t> out) const {
    const Context& ctx = lookup(id);
    if (ctx.state != ContextState::Computed) {
      throw Error(Errc::InvalidState, std::string("get_output in state ") + std::string(context_state_name(ctx.state)));
    }
    if (index != 0) throw Error(Errc::InvalidIndex, "output index " + std::to_string(index));
    const std::size_t n = std::min(out.size(), ctx.result->output.size());
    std::copy_n(ctx.result->output.begin(), n, out.begin());
    return static_cast<std::uint32_t>(n);
  }

  ContextState state(ContextId id) const { return lookup(id).state; }

  /// Full decode result of a computed context (output, token count, digest).
  const toylm::DecodeResult& result(ContextId id) const {
    const Context& ctx = lookup(id);
    if (ctx.state != ContextState::Computed) throw Error(Errc::InvalidState, "no result before compute");
    return *ctx.result;
  }

  const GraphHandle& graph_of(ContextId id) const { return lookup(id).graph; }

  std::size_t live_contexts() const noexcept { return contexts_.size(); }
  std::size_t loaded_models() const noexcept { return models_.size(); }

  std::shared_ptr<const toylm::Model> model(std::string_view model_id) const {
    auto it = models_.find(std::string(model_id));
    return it == models_.end() ? nullptr : it->second;
  }

 private:
  struct Graph {
    GraphHandle handle;
    std::shared_ptr<const toylm::Model> model;
  };

  struct Context {
    GraphHandle graph;
    std::shared_ptr<const toylm::Model> model;
    ContextState state;
    std::uint64_t seed;
    DecodeParams params;
    Bytes prompt;
    std::optional<toylm::DecodeResult> result;
  };

  Context& lookup(ContextId id) {
    auto it = contexts_.find(id);
    if (it == contexts_.end()) throw Error(Errc::UnknownContext, "context " + std::to_string(id.value));
    return it->second;
  }
  const Context& lookup(ContextId id) const { return const_cast<Facade*>(this)->lookup(id); }

  std::filesystem::path cache_root_;
  std::map<std::string, std::shared_ptr<const toylm::Model>> models_;
  std::map<std::uint64_t, Graph> graphs_;
  std::map<ContextId, Context> contexts_;
  std::uint64_t next_graph_id_ = 1;
  std::uint64_t next_context_id_ = 1;
  std::uint8_t xor_mask_ = 0;
};

}  // namespace wicas::nn
