#pragma once

#include <array>
#include <string>
#include <vector>

#include "wicas/chain/beacon.hpp"
#include "wicas/common/sha256.hpp"
#include "wicas/runtime/contract.hpp"

namespace wicas::runtime {

inline constexpr std::size_t k_output_buffer_size = 1000;

/// Prompt handed to the model for a name lookup.
inline std::string inference_prompt(std::string_view name, std::string_view value) {
  std::string prompt = "name:";
  prompt += name;
  prompt += " value:";
  prompt += value;
  return prompt;
}

/// Reference name-service contract, native build. Its observable behavior is
/// mirrored exactly by contracts/name_service.c compiled to WASM: same host
/// calls in the same order, same events, same error codes.
///
/// Storage layout (relative to the contract prefix):
///   name/<name>  -> registered value
///   infer/<name> -> hex sha256 of the last inference output for <name>
class NameService final : public Contract {
 public:
  std::vector<Event> execute(HostEnv& env, const ExecuteMsg& msg) override {
    return std::visit([&](const auto& m) { return handle(env, m); }, msg);
  }

 private:
  static void check_name(const std::string& name) {
    if (!is_valid_name(name)) throw Error(Errc::InvalidName, "name must match [a-z0-9-]{1,64}");
  }

  // For calls returning a status code.
  static void check_status(std::int32_t status) {
    if (status != 0) throw Error(errc_for(static_cast<HostStatus>(status < 0 ? -status : status)), "host call failed");
  }

  // For calls returning a handle or byte count, negative on failure.
  static void check_result(std::int32_t value) {
    if (value < 0) check_status(value);
  }

  std::vector<Event> handle(HostEnv& env, const Register& m) {
    check_name(m.name);
    if (m.value.size() > k_max_value_length) throw Error(Errc::InvalidMessage, "value longer than 256 bytes");
    env.storage_set("name/" + m.name, m.value);
    return {{"action", "register"}, {"name", m.name}};
  }

  std::vector<Event> handle(HostEnv& env, const Resolve& m) {
    check_name(m.name);
    auto value = env.storage_get("name/" + m.name);
    if (!value) throw Error(Errc::NameNotFound, m.name);
    return {{"action", "resolve"}, {"name", m.name}, {"value", *value}};
  }

  std::vector<Event> handle(HostEnv& env, const InferFromName& m) {
    check_name(m.name);
    if (m.max_tokens < 1 || m.max_tokens > k_max_infer_tokens) {
      throw Error(Errc::InvalidMessage, "max_tokens must be in [1, 256]");
    }
    auto value = env.storage_get("name/" + m.name);
    if (!value) throw Error(Errc::NameNotFound, m.name);

    const std::string prompt = inference_prompt(m.name, *value);
    const auto& block = env.block();
    const std::uint64_t seed = chain::derive_seed(block.chain_id, block.height, block.tx_hash).seed;

    const std::int32_t graph = env.nn_build_from_cache(m.model_id);
    check_result(graph);
    const std::int32_t ctx = env.nn_init_ctx(graph, seed, m.mode == DecodeMode::Greedy ? 0 : 1, m.max_tokens);
    check_result(ctx);
    check_status(env.nn_set_input(ctx, 0, as_bytes(prompt)));
    check_status(env.nn_compute(ctx));
    std::array<std::uint8_t, k_output_buffer_size> buffer{};
    const std::int32_t written = env.nn_get_output(ctx, 0, buffer);
    check_result(written);

    const std::string digest = sha256(std::span(buffer.data(), static_cast<std::size_t>(written))).hex();
    env.storage_set("infer/" + m.name, digest);
    return {{"action", "infer_from_name"}, {"name", m.name}, {"output_bytes", std::to_string(written)}, {"digest", digest}};
  }
};

}  // namespace wicas::runtime
