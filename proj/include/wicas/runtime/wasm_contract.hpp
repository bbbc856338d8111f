#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "wicas/runtime/contract.hpp"
#include "wicas/wasm/interpreter.hpp"
#include "wicas/wasm/module.hpp"

namespace wicas::runtime {

/// Host ABI exposed to WASM guests under module "env". Pointers and lengths
/// are i32 offsets into guest linear memory.
///
///   storage_get(kptr, klen, vptr, vcap) -> i32   bytes written, -1 if absent
///   storage_set(kptr, klen, vptr, vlen)
///   gas_consume(amount_lo, amount_hi)
///   nn_build_from_cache(idptr, idlen) -> i32     graph, or -status
///   nn_init_ctx(graph, seed_lo, seed_hi, mode, max_tokens) -> i32   ctx, or -status
///   nn_set_input(ctx, idx, ptr, len) -> i32      status
///   nn_compute(ctx) -> i32                       status
///   nn_get_output(ctx, idx, ptr, cap) -> i32     bytes written, or -status
///
/// Guests export `memory`, `allocate(size) -> ptr` and
/// `execute(ptr, len) -> ptr`. The input is the canonical JSON envelope
/// {"block":{"chain_id","height","tx_hash"},"msg":<ExecuteMsg>}; the returned
/// pointer addresses a u32le length followed by {"events":[[k,v],...]} or
/// {"error":"<code>"}.
class WasmContract final : public Contract {
 public:
  explicit WasmContract(std::shared_ptr<const wasm::Module> module, wasm::ExecLimits limits = {})
      : module_(std::move(module)), limits_(limits) {}

  static std::vector<std::string> abi_import_names() {
    return {"storage_get", "storage_set", "gas_consume", "nn_build_from_cache", "nn_init_ctx",
            "nn_set_input", "nn_compute", "nn_get_output"};
  }

  static nlohmann::json envelope(const BlockContext& block, const ExecuteMsg& msg) {
    return {{"block", {{"chain_id", block.chain_id}, {"height", block.height}, {"tx_hash", block.tx_hash.hex()}}},
            {"msg", to_json(msg)}};
  }

  std::vector<Event> execute(HostEnv& env, const ExecuteMsg& msg) override {
    if (!module_->find_export("memory", wasm::ExternKind::Memory)) throw Error(Errc::MissingExport, "memory");
    for (const char* fn : {"allocate", "execute"}) {
      if (!module_->find_export(fn, wasm::ExternKind::Func)) throw Error(Errc::MissingExport, fn);
    }

    wasm::Instance instance(module_, imports(env), limits_);
    const std::string input = envelope(env.block(), msg).dump();
    const auto len = static_cast<std::uint64_t>(input.size());
    const auto alloc = instance.call("allocate", std::array{len});
    if (alloc.size() != 1) throw wasm::Trap("allocate must return one value");
    const auto ptr = static_cast<std::uint32_t>(alloc[0]);
    instance.write(ptr, as_bytes(input));

    const auto ret = instance.call("execute", std::array<std::uint64_t, 2>{ptr, len});
    if (ret.size() != 1) throw wasm::Trap("execute must return one value");
    const auto out_ptr = static_cast<std::uint32_t>(ret[0]);
    const std::uint32_t out_len = get_u32_le(instance.read(out_ptr, 4).data());
    const std::string output = to_string(instance.read(out_ptr + 4, out_len));
    return decode_output(output);
  }

 private:
  static std::vector<Event> decode_output(const std::string& output) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(output);
    } catch (const nlohmann::json::parse_error& e) {
      throw wasm::Trap(std::string("guest returned malformed JSON: ") + e.what());
    }
    if (auto err = j.find("error"); err != j.end()) {
      if (!err->is_string()) throw wasm::Trap("guest error must be a string");
      auto code = guest_errc_from_name(err->get<std::string>());
      if (!code) throw wasm::Trap("guest reported unknown error '" + err->get<std::string>() + "'");
      throw Error(*code, "reported by guest");
    }
    auto events = j.find("events");
    if (events == j.end() || !events->is_array()) throw wasm::Trap("guest result has no events array");
    std::vector<Event> out;
    for (const auto& e : *events) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
        throw wasm::Trap("guest event must be a [key, value] string pair");
      }
      out.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
    return out;
  }

  static wasm::ImportTable imports(HostEnv& env) {
    using wasm::ValType;
    using Args = std::span<const std::uint64_t>;
    constexpr auto I32 = ValType::I32;
    auto u32 = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
    auto ret = [](std::int32_t v) { return static_cast<std::uint64_t>(static_cast<std::uint32_t>(v)); };

    wasm::ImportTable t;
    auto add = [&](const char* name, wasm::FuncType type, wasm::HostFunction fn) {
      t.emplace(std::pair<std::string, std::string>{"env", name}, wasm::HostImport{std::move(type), std::move(fn)});
    };

    add("storage_get", {{I32, I32, I32, I32}, {I32}}, [&env, u32, ret](wasm::Instance& inst, Args a) {
      const std::string key = to_string(inst.read(u32(a[0]), u32(a[1])));
      auto value = env.storage_get(key);
      if (!value) return ret(-1);
      const auto n = static_cast<std::uint32_t>(std::min<std::size_t>(value->size(), u32(a[3])));
      inst.write(u32(a[2]), as_bytes(std::string_view(*value).substr(0, n)));
      return ret(static_cast<std::int32_t>(n));
    });
    add("storage_set", {{I32, I32, I32, I32}, {}}, [&env, u32](wasm::Instance& inst, Args a) {
      const std::string key = to_string(inst.read(u32(a[0]), u32(a[1])));
      const std::string value = to_string(inst.read(u32(a[2]), u32(a[3])));
      env.storage_set(key, value);
      return std::uint64_t{0};
    });
    add("gas_consume", {{I32, I32}, {}}, [&env, u32](wasm::Instance&, Args a) {
      env.gas_consume(std::uint64_t{u32(a[1])} << 32 | u32(a[0]));
      return std::uint64_t{0};
    });
    add("nn_build_from_cache", {{I32, I32}, {I32}}, [&env, u32, ret](wasm::Instance& inst, Args a) {
      return ret(env.nn_build_from_cache(to_string(inst.read(u32(a[0]), u32(a[1])))));
    });
    add("nn_init_ctx", {{I32, I32, I32, I32, I32}, {I32}}, [&env, u32, ret](wasm::Instance&, Args a) {
      const std::uint64_t seed = std::uint64_t{u32(a[2])} << 32 | u32(a[1]);
      return ret(env.nn_init_ctx(static_cast<std::int32_t>(u32(a[0])), seed, u32(a[3]), u32(a[4])));
    });
    add("nn_set_input", {{I32, I32, I32, I32}, {I32}}, [&env, u32, ret](wasm::Instance& inst, Args a) {
      return ret(env.nn_set_input(static_cast<std::int32_t>(u32(a[0])), u32(a[1]), inst.read(u32(a[2]), u32(a[3]))));
    });
    add("nn_compute", {{I32}, {I32}}, [&env, u32, ret](wasm::Instance&, Args a) {
      return ret(env.nn_compute(static_cast<std::int32_t>(u32(a[0]))));
    });
    add("nn_get_output", {{I32, I32, I32, I32}, {I32}}, [&env, u32, ret](wasm::Instance& inst, Args a) {
      auto window = inst.write_window(u32(a[2]), u32(a[3]));
      return ret(env.nn_get_output(static_cast<std::int32_t>(u32(a[0])), u32(a[1]), window));
    });
    return t;
  }

  std::shared_ptr<const wasm::Module> module_;
  wasm::ExecLimits limits_;
};

}  // namespace wicas::runtime
