#pragma once

#include <bit>
#include <type_traits>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wicas/common/bytes.hpp"
#include "wicas/common/error.hpp"
#include "wicas/wasm/module.hpp"

namespace wicas::wasm {

/// Guest-caused failure: unreachable, bad memory access, division by zero,
/// exhausted fuel or stack, failed indirect call.
class Trap : public Error {
 public:
  explicit Trap(const std::string& what) : Error(Errc::GuestTrap, what) {}
};

class Instance;

/// Host function: receives the raw argument slots (i32 zero-extended) and
/// returns the result slot, if its type has one.
using HostFunction = std::function<std::uint64_t(Instance&, std::span<const std::uint64_t>)>;

struct HostImport {
  FuncType type;
  HostFunction fn;
};

/// Keyed by (module, name).
using ImportTable = std::map<std::pair<std::string, std::string>, HostImport>;

struct ExecLimits {
  std::uint64_t fuel = 200'000'000;         // instructions per top-level call
  std::uint32_t max_call_depth = 512;
  std::size_t max_stack_slots = 1u << 20;
  std::uint32_t max_memory_pages = 256;     // 16 MiB
};

/// A running module instance. Memory, globals and table belong to the
/// instance; the decoded module is shared read-only.
class Instance {
 public:
  static constexpr std::size_t k_page_size = 65536;

  Instance(std::shared_ptr<const Module> module, const ImportTable& imports, ExecLimits limits = {})
      : module_(std::move(module)), limits_(limits) {
    const Module& m = *module_;
    for (const auto& im : m.imports) {
      auto it = imports.find({im.module, im.name});
      if (it == imports.end()) throw Error(Errc::MissingImport, im.module + "." + im.name);
      if (!(it->second.type == m.types[im.type_index])) {
        throw Error(Errc::MissingImport, im.module + "." + im.name + " has a mismatched signature");
      }
      host_.push_back(it->second.fn);
    }
    for (const auto& g : m.globals) globals_.push_back(g.init);
    if (m.memory) {
      if (m.memory->min > limits_.max_memory_pages) throw Trap("initial memory exceeds the host limit");
      memory_.assign(std::size_t{m.memory->min} * k_page_size, 0);
    }
    if (m.table) table_.assign(m.table->min, k_null);
    for (const auto& seg : m.elements) {
      if (std::uint64_t{seg.offset} + seg.functions.size() > table_.size()) {
        throw Trap("element segment out of table bounds");
      }
      for (std::size_t i = 0; i < seg.functions.size(); ++i) table_[seg.offset + i] = seg.functions[i];
    }
    for (const auto& seg : m.data) {
      if (std::uint64_t{seg.offset} + seg.bytes.size() > memory_.size()) {
        throw Trap("data segment out of memory bounds");
      }
      std::memcpy(memory_.data() + seg.offset, seg.bytes.data(), seg.bytes.size());
    }
    if (m.start) {
      fuel_ = limits_.fuel;
      invoke(*m.start, {});
    }
  }

  const Module& module() const noexcept { return *module_; }

  /// Calls an exported function. Throws MissingExport if absent.
  std::vector<std::uint64_t> call(std::string_view export_name, std::span<const std::uint64_t> args) {
    const Export* e = module_->find_export(export_name, ExternKind::Func);
    if (!e) throw Error(Errc::MissingExport, std::string(export_name));
    const FuncType& t = module_->function_type(e->index);
    if (args.size() != t.params.size()) throw Trap("argument count mismatch calling " + std::string(export_name));
    fuel_ = limits_.fuel;
    stack_.clear();
    return invoke(e->index, args);
  }

  std::span<std::uint8_t> memory() noexcept { return memory_; }

  ByteSpan read(std::uint32_t ptr, std::uint32_t len) const {
    if (std::uint64_t{ptr} + len > memory_.size()) throw Trap("host read out of bounds");
    return {memory_.data() + ptr, len};
  }

  std::span<std::uint8_t> write_window(std::uint32_t ptr, std::uint32_t len) {
    if (std::uint64_t{ptr} + len > memory_.size()) throw Trap("host write out of bounds");
    return {memory_.data() + ptr, len};
  }

  void write(std::uint32_t ptr, ByteSpan bytes) {
    auto dst = write_window(ptr, static_cast<std::uint32_t>(bytes.size()));
    std::memcpy(dst.data(), bytes.data(), bytes.size());
  }

 private:
  static constexpr std::uint32_t k_null = std::numeric_limits<std::uint32_t>::max();

  struct Label {
    std::size_t height;
    std::uint32_t arity;
    std::uint32_t cont;
    bool loop;
  };

  std::vector<std::uint64_t> invoke(std::uint32_t func_index, std::span<const std::uint64_t> args) {
    std::vector<std::uint64_t> out;
    const FuncType& t = module_->function_type(func_index);
    const std::size_t base = stack_.size();
    for (auto a : args) push(a);
    execute(func_index, depth_);
    out.assign(stack_.begin() + static_cast<std::ptrdiff_t>(base), stack_.end());
    stack_.resize(base);
    if (out.size() != t.results.size()) throw Trap("result count mismatch");
    return out;
  }

  void push(std::uint64_t v) {
    if (stack_.size() >= limits_.max_stack_slots) throw Trap("operand stack exhausted");
    stack_.push_back(v);
  }

  std::uint64_t pop(std::size_t floor) {
    if (stack_.size() <= floor) throw Trap("operand stack underflow");
    const std::uint64_t v = stack_.back();
    stack_.pop_back();
    return v;
  }

  std::uint64_t effective(std::uint64_t addr, std::uint64_t offset, std::uint64_t size) const {
    const std::uint64_t ea = (addr & 0xFFFFFFFFu) + offset;
    if (ea + size > memory_.size()) throw Trap("memory access out of bounds");
    return ea;
  }

  // Little-endian regardless of host byte order.
  template <typename T>
  T load(std::uint64_t ea) const {
    using U = std::make_unsigned_t<T>;
    U v = 0;
    for (std::size_t i = sizeof(T); i-- > 0;) v = static_cast<U>(v << 8 | memory_[ea + i]);
    return static_cast<T>(v);
  }

  template <typename T>
  void store(std::uint64_t ea, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) memory_[ea + i] = static_cast<std::uint8_t>(v >> (8 * i));
  }

  // Calls func_index with its arguments already on the operand stack; leaves
  // its results in their place.
  void execute(std::uint32_t func_index, std::uint32_t& depth) {
    const Module& m = *module_;
    const FuncType& type = m.function_type(func_index);
    const std::size_t nparams = type.params.size();
    if (stack_.size() < nparams) throw Trap("operand stack underflow at call");

    if (func_index < m.imports.size()) {
      std::vector<std::uint64_t> args(stack_.end() - static_cast<std::ptrdiff_t>(nparams), stack_.end());
      stack_.resize(stack_.size() - nparams);
      const std::uint64_t r = host_[func_index](*this, args);
      if (!type.results.empty()) push(r);
      return;
    }

    if (++depth > limits_.max_call_depth) throw Trap("call stack exhausted");
    struct DepthGuard {
      std::uint32_t& d;
      ~DepthGuard() { --d; }
    } guard{depth};

    const Function& f = m.functions[func_index - m.imports.size()];
    std::vector<std::uint64_t> locals(nparams + f.locals.size(), 0);
    for (std::size_t i = nparams; i-- > 0;) locals[i] = stack_[stack_.size() - nparams + i];
    stack_.resize(stack_.size() - nparams);
    const std::size_t floor = stack_.size();

    std::vector<Label> labels;
    labels.push_back({floor, static_cast<std::uint32_t>(type.results.size()), static_cast<std::uint32_t>(f.code.size()), false});

    auto branch = [&](std::uint32_t depth_to, std::uint32_t& pc) {
      const std::size_t target = labels.size() - 1 - depth_to;
      const Label l = labels[target];
      if (stack_.size() < l.height + l.arity) throw Trap("operand stack underflow at branch");
      std::copy(stack_.end() - l.arity, stack_.end(), stack_.begin() + static_cast<std::ptrdiff_t>(l.height));
      stack_.resize(l.height + l.arity);
      labels.resize(l.loop ? target + 1 : target);
      pc = l.cont;
    };

    const std::uint32_t code_size = static_cast<std::uint32_t>(f.code.size());
    std::uint32_t pc = 0;
    while (pc < code_size) {
      if (fuel_ == 0) throw Trap("out of fuel");
      --fuel_;
      const Instr& in = f.code[pc++];
      switch (in.opcode) {
        case op::unreachable: throw Trap("unreachable executed");
        case op::nop: break;
        case op::block: {
          const auto params = static_cast<std::uint32_t>(in.imm >> 32);
          if (stack_.size() < floor + params) throw Trap("operand stack underflow at block");
          labels.push_back({stack_.size() - params, static_cast<std::uint32_t>(in.imm & 0xFFFFFFFFu), in.a + 1, false});
          break;
        }
        case op::loop: {
          const auto params = static_cast<std::uint32_t>(in.imm >> 32);
          if (stack_.size() < floor + params) throw Trap("operand stack underflow at loop");
          labels.push_back({stack_.size() - params, params, pc, true});
          break;
        }
        case op::if_: {
          const std::uint32_t cond = static_cast<std::uint32_t>(pop(floor));
          const auto params = static_cast<std::uint32_t>(in.imm >> 32);
          if (stack_.size() < floor + params) throw Trap("operand stack underflow at if");
          labels.push_back({stack_.size() - params, static_cast<std::uint32_t>(in.imm & 0xFFFFFFFFu), in.a + 1, false});
          if (cond == 0) pc = in.b != 0 ? in.b + 1 : in.a;
          break;
        }
        case op::else_:
          // End of the taken then-arm: resume at the matching end.
          pc = labels.back().cont - 1;
          break;
        case op::end:
          labels.pop_back();
          break;
        case op::br: branch(in.a, pc); break;
        case op::br_if:
          if (static_cast<std::uint32_t>(pop(floor)) != 0) branch(in.a, pc);
          break;
        case op::br_table: {
          const std::uint32_t i = static_cast<std::uint32_t>(pop(floor));
          const std::uint32_t idx = i < in.b - 1 ? i : in.b - 1;
          branch(f.br_targets[in.a + idx], pc);
          break;
        }
        case op::return_: branch(static_cast<std::uint32_t>(labels.size() - 1), pc); break;
        case op::call: execute(in.a, depth); break;
        case op::call_indirect: {
          const std::uint32_t slot = static_cast<std::uint32_t>(pop(floor));
          if (slot >= table_.size() || table_[slot] == k_null) throw Trap("indirect call to empty table slot");
          const std::uint32_t callee = table_[slot];
          if (!(m.function_type(callee) == m.types[in.a])) throw Trap("indirect call signature mismatch");
          execute(callee, depth);
          break;
        }
        case op::drop: pop(floor); break;
        case op::select: {
          const auto c = static_cast<std::uint32_t>(pop(floor));
          const auto b = pop(floor);
          const auto a = pop(floor);
          push(c != 0 ? a : b);
          break;
        }
        case op::local_get: push(locals[in.a]); break;
        case op::local_set: locals[in.a] = pop(floor); break;
        case op::local_tee:
          if (stack_.size() <= floor) throw Trap("operand stack underflow");
          locals[in.a] = stack_.back();
          break;
        case op::global_get: push(globals_[in.a]); break;
        case op::global_set: globals_[in.a] = pop(floor); break;

        // Loads: 0x28..0x35
        case 0x28: push(load<std::uint32_t>(effective(pop(floor), in.imm, 4))); break;
        case 0x29: push(load<std::uint64_t>(effective(pop(floor), in.imm, 8))); break;
        case 0x2A: push(load<std::uint32_t>(effective(pop(floor), in.imm, 4))); break;
        case 0x2B: push(load<std::uint64_t>(effective(pop(floor), in.imm, 8))); break;
        case 0x2C: push(u32(static_cast<std::int32_t>(load<std::int8_t>(effective(pop(floor), in.imm, 1))))); break;
        case 0x2D: push(load<std::uint8_t>(effective(pop(floor), in.imm, 1))); break;
        case 0x2E: push(u32(static_cast<std::int32_t>(load<std::int16_t>(effective(pop(floor), in.imm, 2))))); break;
        case 0x2F: push(load<std::uint16_t>(effective(pop(floor), in.imm, 2))); break;
        case 0x30: push(static_cast<std::uint64_t>(static_cast<std::int64_t>(load<std::int8_t>(effective(pop(floor), in.imm, 1))))); break;
        case 0x31: push(load<std::uint8_t>(effective(pop(floor), in.imm, 1))); break;
        case 0x32: push(static_cast<std::uint64_t>(static_cast<std::int64_t>(load<std::int16_t>(effective(pop(floor), in.imm, 2))))); break;
        case 0x33: push(load<std::uint16_t>(effective(pop(floor), in.imm, 2))); break;
        case 0x34: push(static_cast<std::uint64_t>(static_cast<std::int64_t>(load<std::int32_t>(effective(pop(floor), in.imm, 4))))); break;
        case 0x35: push(load<std::uint32_t>(effective(pop(floor), in.imm, 4))); break;

        // Stores: 0x36..0x3E
        case 0x36: case 0x38: { const auto v = pop(floor); store<std::uint32_t>(effective(pop(floor), in.imm, 4), static_cast<std::uint32_t>(v)); break; }
        case 0x37: case 0x39: { const auto v = pop(floor); store<std::uint64_t>(effective(pop(floor), in.imm, 8), v); break; }
        case 0x3A: case 0x3C: { const auto v = pop(floor); store<std::uint8_t>(effective(pop(floor), in.imm, 1), static_cast<std::uint8_t>(v)); break; }
        case 0x3B: case 0x3D: { const auto v = pop(floor); store<std::uint16_t>(effective(pop(floor), in.imm, 2), static_cast<std::uint16_t>(v)); break; }
        case 0x3E: { const auto v = pop(floor); store<std::uint32_t>(effective(pop(floor), in.imm, 4), static_cast<std::uint32_t>(v)); break; }

        case op::memory_size: push(memory_.size() / k_page_size); break;
        case op::memory_grow: {
          const std::uint32_t delta = static_cast<std::uint32_t>(pop(floor));
          const std::uint64_t old_pages = memory_.size() / k_page_size;
          const std::uint64_t cap = m.memory->max ? std::min<std::uint64_t>(*m.memory->max, limits_.max_memory_pages)
                                                  : limits_.max_memory_pages;
          if (old_pages + delta > cap) {
            push(0xFFFFFFFFu);
          } else {
            memory_.resize(static_cast<std::size_t>((old_pages + delta) * k_page_size), 0);
            push(old_pages);
          }
          break;
        }
        case op::memory_copy: {
          const std::uint64_t n = static_cast<std::uint32_t>(pop(floor));
          const std::uint64_t src = effective(pop(floor), 0, n);
          const std::uint64_t dst = effective(pop(floor), 0, n);
          if (n) std::memmove(memory_.data() + dst, memory_.data() + src, n);
          break;
        }
        case op::memory_fill: {
          const std::uint64_t n = static_cast<std::uint32_t>(pop(floor));
          const auto val = static_cast<std::uint8_t>(pop(floor));
          const std::uint64_t dst = effective(pop(floor), 0, n);
          if (n) std::memset(memory_.data() + dst, val, n);
          break;
        }

        case op::i32_const:
        case op::i64_const:
        case op::f32_const:
        case op::f64_const: push(in.imm); break;

        default: numeric(in.opcode, floor); break;
      }
    }
    if (stack_.size() != floor + type.results.size()) throw Trap("stack height mismatch at function exit");
  }

  static constexpr std::uint64_t u32(std::int32_t v) noexcept { return static_cast<std::uint32_t>(v); }
  static constexpr std::uint64_t u32(std::uint32_t v) noexcept { return v; }

  void numeric(std::uint16_t opc, std::size_t floor) {
    if (opc == 0x45) { push(static_cast<std::uint32_t>(pop(floor)) == 0); return; }  // i32.eqz
    if (opc == 0x50) { push(pop(floor) == 0); return; }                               // i64.eqz
    if (opc == 0x67 || opc == 0x68 || opc == 0x69) {
      const auto a = static_cast<std::uint32_t>(pop(floor));
      push(opc == 0x67 ? std::countl_zero(a) : opc == 0x68 ? std::countr_zero(a) : std::popcount(a));
      return;
    }
    if (opc == 0x79 || opc == 0x7A || opc == 0x7B) {
      const auto a = pop(floor);
      push(static_cast<std::uint64_t>(opc == 0x79 ? std::countl_zero(a) : opc == 0x7A ? std::countr_zero(a) : std::popcount(a)));
      return;
    }
    switch (opc) {
      case 0xA7: push(static_cast<std::uint32_t>(pop(floor))); return;  // i32.wrap_i64
      case 0xAC: push(static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int32_t>(pop(floor))))); return;
      case 0xAD: push(static_cast<std::uint32_t>(pop(floor))); return;
      case 0xBC: case 0xBE: push(static_cast<std::uint32_t>(pop(floor))); return;  // i32<->f32 reinterpret
      case 0xBD: case 0xBF: return;  // i64<->f64 reinterpret: bits unchanged
      case 0xC0: push(u32(static_cast<std::int32_t>(static_cast<std::int8_t>(pop(floor))))); return;
      case 0xC1: push(u32(static_cast<std::int32_t>(static_cast<std::int16_t>(pop(floor))))); return;
      case 0xC2: push(static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int8_t>(pop(floor))))); return;
      case 0xC3: push(static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int16_t>(pop(floor))))); return;
      case 0xC4: push(static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int32_t>(pop(floor))))); return;
      default: break;
    }
    const std::uint64_t rhs = pop(floor);
    const std::uint64_t lhs = pop(floor);
    if (opc >= 0x46 && opc <= 0x4F) {
      const auto a = static_cast<std::uint32_t>(lhs), b = static_cast<std::uint32_t>(rhs);
      const auto sa = static_cast<std::int32_t>(a), sb = static_cast<std::int32_t>(b);
      bool r = false;
      switch (opc) {
        case 0x46: r = a == b; break;
        case 0x47: r = a != b; break;
        case 0x48: r = sa < sb; break;
        case 0x49: r = a < b; break;
        case 0x4A: r = sa > sb; break;
        case 0x4B: r = a > b; break;
        case 0x4C: r = sa <= sb; break;
        case 0x4D: r = a <= b; break;
        case 0x4E: r = sa >= sb; break;
        case 0x4F: r = a >= b; break;
      }
      push(r);
      return;
    }
    if (opc >= 0x51 && opc <= 0x5A) {
      const auto a = lhs, b = rhs;
      const auto sa = static_cast<std::int64_t>(a), sb = static_cast<std::int64_t>(b);
      bool r = false;
      switch (opc) {
        case 0x51: r = a == b; break;
        case 0x52: r = a != b; break;
        case 0x53: r = sa < sb; break;
        case 0x54: r = a < b; break;
        case 0x55: r = sa > sb; break;
        case 0x56: r = a > b; break;
        case 0x57: r = sa <= sb; break;
        case 0x58: r = a <= b; break;
        case 0x59: r = sa >= sb; break;
        case 0x5A: r = a >= b; break;
      }
      push(r);
      return;
    }
    if (opc >= 0x6A && opc <= 0x78) {
      push(binop32(opc, static_cast<std::uint32_t>(lhs), static_cast<std::uint32_t>(rhs)));
      return;
    }
    if (opc >= 0x7C && opc <= 0x8A) {
      push(binop64(opc, lhs, rhs));
      return;
    }
    throw Trap("unsupported opcode " + std::to_string(opc));
  }

  static std::uint32_t binop32(std::uint16_t opc, std::uint32_t a, std::uint32_t b) {
    const auto sa = static_cast<std::int32_t>(a), sb = static_cast<std::int32_t>(b);
    switch (opc) {
      case 0x6A: return a + b;
      case 0x6B: return a - b;
      case 0x6C: return a * b;
      case 0x6D:
        if (b == 0) throw Trap("integer divide by zero");
        if (sa == std::numeric_limits<std::int32_t>::min() && sb == -1) throw Trap("integer overflow");
        return static_cast<std::uint32_t>(sa / sb);
      case 0x6E:
        if (b == 0) throw Trap("integer divide by zero");
        return a / b;
      case 0x6F:
        if (b == 0) throw Trap("integer divide by zero");
        if (sb == -1) return 0;
        return static_cast<std::uint32_t>(sa % sb);
      case 0x70:
        if (b == 0) throw Trap("integer divide by zero");
        return a % b;
      case 0x71: return a & b;
      case 0x72: return a | b;
      case 0x73: return a ^ b;
      case 0x74: return a << (b & 31);
      case 0x75: return static_cast<std::uint32_t>(sa >> (b & 31));
      case 0x76: return a >> (b & 31);
      case 0x77: return std::rotl(a, static_cast<int>(b & 31));
      case 0x78: return std::rotr(a, static_cast<int>(b & 31));
    }
    throw Trap("unsupported opcode");
  }

  static std::uint64_t binop64(std::uint16_t opc, std::uint64_t a, std::uint64_t b) {
    const auto sa = static_cast<std::int64_t>(a), sb = static_cast<std::int64_t>(b);
    switch (opc) {
      case 0x7C: return a + b;
      case 0x7D: return a - b;
      case 0x7E: return a * b;
      case 0x7F:
        if (b == 0) throw Trap("integer divide by zero");
        if (sa == std::numeric_limits<std::int64_t>::min() && sb == -1) throw Trap("integer overflow");
        return static_cast<std::uint64_t>(sa / sb);
      case 0x80:
        if (b == 0) throw Trap("integer divide by zero");
        return a / b;
      case 0x81:
        if (b == 0) throw Trap("integer divide by zero");
        if (sb == -1) return 0;
        return static_cast<std::uint64_t>(sa % sb);
      case 0x82:
        if (b == 0) throw Trap("integer divide by zero");
        return a % b;
      case 0x83: return a & b;
      case 0x84: return a | b;
      case 0x85: return a ^ b;
      case 0x86: return a << (b & 63);
      case 0x87: return static_cast<std::uint64_t>(sa >> (b & 63));
      case 0x88: return a >> (b & 63);
      case 0x89: return std::rotl(a, static_cast<int>(b & 63));
      case 0x8A: return std::rotr(a, static_cast<int>(b & 63));
    }
    throw Trap("unsupported opcode");
  }

  std::shared_ptr<const Module> module_;
  ExecLimits limits_;
  std::vector<HostFunction> host_;
  std::vector<std::uint64_t> globals_;
  std::vector<std::uint8_t> memory_;
  std::vector<std::uint32_t> table_;
  std::vector<std::uint64_t> stack_;
  std::uint64_t fuel_ = 0;
  std::uint32_t depth_ = 0;
};

}  // namespace wicas::wasm
