#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wicas/chain/gas.hpp"
#include "wicas/common/error.hpp"
#include "wicas/runtime/host_env.hpp"
#include "wicas/runtime/messages.hpp"

namespace wicas::runtime {

using Event = std::pair<std::string, std::string>;

/// Outcome of one transaction. `state_writes` are keys relative to the
/// contract's storage prefix and are empty whenever `error` is set.
struct ExecResult {
  std::optional<Errc> error;
  std::string error_message;  // diagnostic only; not part of the canonical form
  std::vector<Event> events;
  chain::GasReceipt gas;
  std::optional<InferenceRecord> inference;
  std::vector<std::pair<std::string, std::string>> state_writes;

  bool ok() const noexcept { return !error.has_value(); }
};

inline nlohmann::json gas_to_json(const chain::GasReceipt& g) {
  return {{"base", g.base},
          {"model", g.model_component},
          {"token", g.token_component},
          {"storage", g.storage_component},
          {"total", g.total}};
}

/// Canonical, byte-comparable form of an ExecResult.
inline nlohmann::json to_json(const ExecResult& r) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& [k, v] : r.events) events.push_back({k, v});
  nlohmann::json writes = nlohmann::json::array();
  for (const auto& [k, v] : r.state_writes) writes.push_back({to_hex(as_bytes(k)), to_hex(as_bytes(v))});
  nlohmann::json inference = nullptr;
  if (r.inference) {
    inference = {{"digest", r.inference->digest.hex()},
                 {"output_hex", to_hex(r.inference->output)},
                 {"tokens_generated", r.inference->tokens_generated}};
  }
  return {{"error", r.error ? nlohmann::json(std::string(errc_name(*r.error))) : nlohmann::json(nullptr)},
          {"events", events},
          {"gas", gas_to_json(r.gas)},
          {"inference", inference},
          {"state_writes", writes}};
}

/// Contract-level error codes a guest may report by name.
inline std::optional<Errc> guest_errc_from_name(std::string_view name) noexcept {
  for (Errc c : {Errc::InvalidName, Errc::InvalidMessage, Errc::NameNotFound, Errc::ModelNotFound,
                 Errc::EngineFailure, Errc::InvalidState, Errc::InvalidIndex}) {
    if (errc_name(c) == name) return c;
  }
  return std::nullopt;
}

/// A contract runs one message against a host environment and returns its
/// events, or throws wicas::Error to abort the transaction.
class Contract {
 public:
  virtual ~Contract() = default;
  virtual std::vector<Event> execute(HostEnv& env, const ExecuteMsg& msg) = 0;
};

}  // namespace wicas::runtime
