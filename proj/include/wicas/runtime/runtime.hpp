#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "wicas/chain/gas.hpp"
#include "wicas/chain/state.hpp"
#include "wicas/common/bytes.hpp"
#include "wicas/common/error.hpp"
#include "wicas/common/sha256.hpp"
#include "wicas/nn/facade.hpp"
#include "wicas/runtime/contract.hpp"
#include "wicas/runtime/host_env.hpp"
#include "wicas/runtime/messages.hpp"
#include "wicas/runtime/name_service.hpp"
#include "wicas/runtime/wasm_contract.hpp"
#include "wicas/wasm/module.hpp"

namespace wicas::runtime {

using CodeId = Digest;

struct Address {
  std::array<std::uint8_t, 20> bytes{};

  auto operator<=>(const Address&) const = default;
  std::string hex() const { return to_hex(bytes); }
  static Address from_hex(std::string_view hex) { return {array_from_hex<20>(hex)}; }
};

/// Reserved id of the natively registered name-service contract. No sha256
/// output is expected to collide with it.
inline CodeId name_service_code_id() {
  CodeId id;
  id.bytes.back() = 0x01;
  return id;
}

inline std::string code_key(const CodeId& id) { return "code/" + id.hex(); }
inline std::string contract_key(const Address& a) { return "contract/" + a.hex(); }
inline std::string contract_prefix(const Address& a) { return "c/" + a.hex() + "/"; }
inline const std::string k_instance_counter_key = "meta/instance_counter";

/// Contract lifecycle (store -> instantiate -> execute) over one node's chain
/// state. Code, instances and the instance counter all live in the state, so
/// they are covered by the app hash and survive persistence.
class Runtime {
 public:
  Runtime(chain::ChainState& state, nn::Facade& facade, chain::GasSchedule schedule = {})
      : state_(&state), facade_(&facade), schedule_(schedule) {
    schedule_.validate();
  }

  const chain::GasSchedule& schedule() const noexcept { return schedule_; }
  chain::ChainState& state() noexcept { return *state_; }
  nn::Facade& facade() noexcept { return *facade_; }

  /// Content-addressed and idempotent: CodeId = sha256(code).
  CodeId store_code(ByteSpan code) {
    if (!wasm::has_wasm_magic(code)) throw Error(Errc::InvalidWasmMagic, "invalid wasm magic (code does not start with \\0asm)");
    auto module = std::make_shared<const wasm::Module>(wasm::decode_module(code));
    const CodeId id = sha256(code);
    state_->set(code_key(id), to_string(code));
    modules_.emplace(id, std::move(module));
    return id;
  }

  bool has_code(const CodeId& id) const {
    return id == name_service_code_id() || state_->kv.contains(code_key(id));
  }

  /// address = sha256(code_id || u64le(counter))[0..20], counter starting at 0.
  Address instantiate(const CodeId& id) {
    if (!has_code(id)) throw Error(Errc::UnknownCodeId, id.hex());
    const std::uint64_t counter = instance_counter();
    Bytes counter_le;
    put_u64_le(counter_le, counter);
    const Digest h = Sha256().update(id.bytes).update(counter_le).finish();
    Address addr;
    std::copy_n(h.bytes.begin(), addr.bytes.size(), addr.bytes.begin());
    state_->set(contract_key(addr), to_string(id.bytes));
    Bytes next;
    put_u64_le(next, counter + 1);
    state_->set(k_instance_counter_key, to_string(next));
    return addr;
  }

  std::optional<CodeId> code_of(const Address& addr) const {
    auto raw = state_->get(contract_key(addr));
    if (!raw || raw->size() != 32) return std::nullopt;
    CodeId id;
    std::copy(raw->begin(), raw->end(), id.bytes.begin());
    return id;
  }

  /// Runs one transaction. Contract-level failures come back in
  /// ExecResult::error with all state changes discarded; gas charged before
  /// the failure is still reported. `gas_limit` overrides the schedule's
  /// tx_gas_limit for this transaction only and may be any value.
  ExecResult execute(const Address& addr, const ExecuteMsg& msg, const BlockContext& block,
                     std::optional<std::uint64_t> gas_limit = std::nullopt) {
    ExecResult result;
    chain::GasMeter meter(gas_limit.value_or(schedule_.tx_gas_limit));
    try {
      auto code = code_of(addr);
      if (!code) throw Error(Errc::UnknownContract, addr.hex());
      std::unique_ptr<Contract> contract = load(*code);
      HostEnv env(*state_, contract_prefix(addr), schedule_, meter, *facade_, block);
      result.events = contract->execute(env, msg);
      for (const auto& [key, value] : env.writes()) {
        state_->set(env.key_prefix() + key, value);
        result.state_writes.emplace_back(key, value);
      }
      result.inference = env.inference();
    } catch (const Error& e) {
      result.error = e.code();
      result.error_message = e.what();
      result.events.clear();
      result.state_writes.clear();
      result.inference.reset();
    }
    result.gas = meter.receipt();
    return result;
  }

 private:
  std::uint64_t instance_counter() const {
    auto raw = state_->get(k_instance_counter_key);
    if (!raw || raw->size() != 8) return 0;
    return get_u64_le(reinterpret_cast<const std::uint8_t*>(raw->data()));
  }

  std::unique_ptr<Contract> load(const CodeId& id) {
    if (id == name_service_code_id()) return std::make_unique<NameService>();
    auto it = modules_.find(id);
    if (it == modules_.end()) {
      auto raw = state_->get(code_key(id));
      if (!raw) throw Error(Errc::UnknownCodeId, id.hex());
      auto module = std::make_shared<const wasm::Module>(wasm::decode_module(as_bytes(*raw)));
      it = modules_.emplace(id, std::move(module)).first;
    }
    return std::make_unique<WasmContract>(it->second);
  }

  chain::ChainState* state_;
  nn::Facade* facade_;
  chain::GasSchedule schedule_;
  std::map<CodeId, std::shared_ptr<const wasm::Module>> modules_;
};

}  // namespace wicas::runtime
