#pragma once

// Decoder for the WebAssembly MVP binary format, restricted to what
// integer-only contracts need: function imports, one table, one memory,
// constant-initialized globals, active data and element segments. Float
// arithmetic is rejected at decode time; float loads, stores, constants and
// reinterpretations are kept since they only move bits.

#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wicas/common/bytes.hpp"
#include "wicas/common/error.hpp"

namespace wicas::wasm {

enum class ValType : std::uint8_t { I32 = 0x7F, I64 = 0x7E, F32 = 0x7D, F64 = 0x7C };

struct FuncType {
  std::vector<ValType> params;
  std::vector<ValType> results;
  bool operator==(const FuncType&) const = default;
};

enum class ExternKind : std::uint8_t { Func = 0, Table = 1, Memory = 2, Global = 3 };

struct Import {
  std::string module;
  std::string name;
  std::uint32_t type_index = 0;
};

struct Export {
  std::string name;
  ExternKind kind = ExternKind::Func;
  std::uint32_t index = 0;
};

struct Limits {
  std::uint32_t min = 0;
  std::optional<std::uint32_t> max;
};

struct Global {
  ValType type = ValType::I32;
  bool mutable_ = false;
  std::uint64_t init = 0;
};

struct DataSegment {
  std::uint32_t offset = 0;
  Bytes bytes;
};

struct ElementSegment {
  std::uint32_t offset = 0;
  std::vector<std::uint32_t> functions;
};

// Pre-decoded opcodes: MVP single-byte opcodes keep their value; 0xFC-prefixed
// ones map to k_prefix_fc + sub-opcode.
inline constexpr std::uint16_t k_prefix_fc = 0x100;

namespace op {
inline constexpr std::uint16_t unreachable = 0x00, nop = 0x01, block = 0x02, loop = 0x03, if_ = 0x04,
                               else_ = 0x05, end = 0x0B, br = 0x0C, br_if = 0x0D, br_table = 0x0E,
                               return_ = 0x0F, call = 0x10, call_indirect = 0x11, drop = 0x1A, select = 0x1B,
                               select_t = 0x1C, local_get = 0x20, local_set = 0x21, local_tee = 0x22,
                               global_get = 0x23, global_set = 0x24, memory_size = 0x3F, memory_grow = 0x40,
                               i32_const = 0x41, i64_const = 0x42, f32_const = 0x43, f64_const = 0x44,
                               memory_copy = k_prefix_fc + 10, memory_fill = k_prefix_fc + 11;
}  // namespace op

/// One pre-decoded instruction.
///  block/loop/if: a = index of matching end, b = index of else (if only, 0 if none),
///                 imm = params << 32 | results
///  br/br_if: a = depth;  br_table: a = offset into Function::br_targets, b = count (incl. default)
///  call: a = function index;  call_indirect: a = type index
///  local/global ops: a = index;  loads/stores: imm = static offset;  consts: imm = raw bits
struct Instr {
  std::uint16_t opcode = 0;
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::uint64_t imm = 0;
};

struct Function {
  std::uint32_t type_index = 0;
  std::vector<ValType> locals;  // excluding params
  std::vector<Instr> code;
  std::vector<std::uint32_t> br_targets;
};

struct Module {
  std::vector<FuncType> types;
  std::vector<Import> imports;
  std::vector<Function> functions;  // defined functions; index space starts after imports
  std::optional<Limits> table;
  std::optional<Limits> memory;
  std::vector<Global> globals;
  std::vector<Export> exports;
  std::optional<std::uint32_t> start;
  std::vector<ElementSegment> elements;
  std::vector<DataSegment> data;

  std::uint32_t function_count() const noexcept {
    return static_cast<std::uint32_t>(imports.size() + functions.size());
  }

  const FuncType& function_type(std::uint32_t func_index) const {
    const std::uint32_t t = func_index < imports.size() ? imports[func_index].type_index
                                                        : functions[func_index - imports.size()].type_index;
    return types.at(t);
  }

  const Export* find_export(std::string_view name, ExternKind kind) const noexcept {
    for (const auto& e : exports) {
      if (e.name == name && e.kind == kind) return &e;
    }
    return nullptr;
  }
};

inline constexpr std::uint8_t k_wasm_magic[4] = {0x00, 0x61, 0x73, 0x6D};

inline bool has_wasm_magic(ByteSpan bytes) noexcept {
  return bytes.size() >= 4 && std::memcmp(bytes.data(), k_wasm_magic, 4) == 0;
}

namespace detail {

inline constexpr std::uint32_t k_max_locals = 50'000;
inline constexpr std::uint32_t k_max_pages = 65'536;

[[noreturn]] inline void malformed(const std::string& what) { throw Error(Errc::InvalidWasmModule, what); }

class Reader {
 public:
  explicit Reader(ByteSpan bytes) : bytes_(bytes) {}

  bool done() const noexcept { return pos_ >= bytes_.size(); }
  std::size_t pos() const noexcept { return pos_; }

  std::uint8_t byte() {
    if (pos_ >= bytes_.size()) malformed("unexpected end of section");
    return bytes_[pos_++];
  }

  ByteSpan take(std::size_t n) {
    if (n > bytes_.size() - pos_) malformed("length exceeds section");
    ByteSpan s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint64_t uleb(unsigned bits) {
    std::uint64_t result = 0;
    unsigned shift = 0;
    while (true) {
      const std::uint8_t b = byte();
      if (shift >= bits) malformed("LEB128 too long");
      result |= static_cast<std::uint64_t>(b & 0x7F) << shift;
      shift += 7;
      if ((b & 0x80) == 0) break;
    }
    if (bits < 64 && (result >> bits) != 0) malformed("LEB128 value out of range");
    return result;
  }

  std::int64_t sleb(unsigned bits) {
    std::int64_t result = 0;
    unsigned shift = 0;
    std::uint8_t b = 0;
    do {
      if (shift >= ((bits + 6) / 7) * 7) malformed("LEB128 too long");
      b = byte();
      if (shift < 64) result |= static_cast<std::int64_t>(static_cast<std::uint64_t>(b & 0x7F) << shift);
      shift += 7;
    } while (b & 0x80);
    if (shift < 64 && (b & 0x40)) result |= static_cast<std::int64_t>(~std::uint64_t{0} << shift);
    return result;
  }

  std::uint32_t u32() { return static_cast<std::uint32_t>(uleb(32)); }

  std::string name() {
    const auto n = u32();
    ByteSpan s = take(n);
    return to_string(s);
  }

 private:
  ByteSpan bytes_;
  std::size_t pos_ = 0;
};

inline ValType val_type(std::uint8_t b) {
  switch (b) {
    case 0x7F: return ValType::I32;
    case 0x7E: return ValType::I64;
    case 0x7D: return ValType::F32;
    case 0x7C: return ValType::F64;
    default: malformed("unsupported value type");
  }
}

inline Limits limits(Reader& r) {
  const std::uint8_t flag = r.byte();
  Limits l;
  l.min = r.u32();
  if (flag == 1) {
    l.max = r.u32();
    if (*l.max < l.min) malformed("limits max < min");
  } else if (flag != 0) {
    malformed("unsupported limits flag");
  }
  return l;
}

/// Constant expression: a single *.const followed by end.
inline std::uint64_t const_expr(Reader& r) {
  std::uint64_t v = 0;
  switch (r.byte()) {
    case 0x41: v = static_cast<std::uint32_t>(static_cast<std::int32_t>(r.sleb(32))); break;
    case 0x42: v = static_cast<std::uint64_t>(r.sleb(64)); break;
    case 0x43: v = get_u32_le(r.take(4).data()); break;
    case 0x44: v = get_u64_le(r.take(8).data()); break;
    default: malformed("unsupported constant expression");
  }
  if (r.byte() != 0x0B) malformed("constant expression not terminated");
  return v;
}

inline bool is_supported_plain_opcode(std::uint8_t opc) noexcept {
  if (opc >= 0x28 && opc <= 0x3E) return true;   // loads and stores
  if (opc >= 0x45 && opc <= 0x5A) return true;   // integer tests and comparisons
  if (opc >= 0x67 && opc <= 0x8A) return true;   // integer arithmetic
  if (opc == 0xA7 || opc == 0xAC || opc == 0xAD) return true;  // wrap / extend
  if (opc >= 0xBC && opc <= 0xBF) return true;   // reinterpret
  if (opc >= 0xC0 && opc <= 0xC4) return true;   // sign extension
  return false;
}

inline std::uint64_t block_type(Reader& r, const Module& m) {
  // Peek: 0x40 empty, a value type, or a signed type index.
  const std::uint8_t b = r.byte();
  if (b == 0x40) return 0;
  if (b == 0x7F || b == 0x7E || b == 0x7D || b == 0x7C) return 1;
  // Re-read as s33 starting from this byte.
  std::int64_t idx = b & 0x7F;
  unsigned shift = 7;
  std::uint8_t cur = b;
  while (cur & 0x80) {
    cur = r.byte();
    idx |= static_cast<std::int64_t>(cur & 0x7F) << shift;
    shift += 7;
    if (shift > 35) malformed("block type too long");
  }
  if ((cur & 0x40) && shift < 64) idx |= static_cast<std::int64_t>(~std::uint64_t{0} << shift);
  if (idx < 0 || static_cast<std::uint64_t>(idx) >= m.types.size()) malformed("block type index out of range");
  const auto& t = m.types[static_cast<std::size_t>(idx)];
  return static_cast<std::uint64_t>(t.params.size()) << 32 | t.results.size();
}

inline Function code_body(Reader& r, const Module& m, std::uint32_t type_index, std::uint32_t func_count) {
  Function f;
  f.type_index = type_index;
  const std::uint32_t groups = r.u32();
  std::uint64_t total = 0;
  for (std::uint32_t g = 0; g < groups; ++g) {
    const std::uint32_t n = r.u32();
    total += n;
    if (total > k_max_locals) malformed("too many locals");
    const ValType t = val_type(r.byte());
    f.locals.insert(f.locals.end(), n, t);
  }

  std::vector<std::size_t> open;  // indices of block/loop/if awaiting end
  while (true) {
    Instr in;
    const std::uint8_t opc = r.byte();
    in.opcode = opc;
    switch (opc) {
      case op::unreachable:
      case op::nop:
      case op::return_:
      case op::drop:
      case op::select:
        break;
      case op::block:
      case op::loop:
      case op::if_:
        in.imm = block_type(r, m);
        open.push_back(f.code.size());
        break;
      case op::else_:
        if (open.empty() || f.code[open.back()].opcode != op::if_ || f.code[open.back()].b != 0) {
          malformed("else without if");
        }
        f.code[open.back()].b = static_cast<std::uint32_t>(f.code.size());
        break;
      case op::end:
        if (open.empty()) {
          f.code.push_back(in);
          if (!r.done()) malformed("trailing bytes after function end");
          return f;
        }
        f.code[open.back()].a = static_cast<std::uint32_t>(f.code.size());
        open.pop_back();
        break;
      case op::br:
      case op::br_if:
        in.a = r.u32();
        if (in.a > open.size()) malformed("branch depth out of range");
        break;
      case op::br_table: {
        const std::uint32_t n = r.u32();
        if (n > 1'000'000) malformed("br_table too large");
        in.a = static_cast<std::uint32_t>(f.br_targets.size());
        in.b = n + 1;
        for (std::uint32_t i = 0; i <= n; ++i) {
          const std::uint32_t depth = r.u32();
          if (depth > open.size()) malformed("branch depth out of range");
          f.br_targets.push_back(depth);
        }
        break;
      }
      case op::call:
        in.a = r.u32();
        if (in.a >= func_count) malformed("call to unknown function");
        break;
      case op::call_indirect:
        in.a = r.u32();
        if (in.a >= m.types.size()) malformed("call_indirect type out of range");
        if (r.byte() != 0x00) malformed("call_indirect table index must be 0");
        break;
      case op::select_t: {
        const std::uint32_t n = r.u32();
        if (n != 1) malformed("typed select must name one type");
        val_type(r.byte());
        in.opcode = op::select;
        break;
      }
      case op::local_get:
      case op::local_set:
      case op::local_tee:
        in.a = r.u32();
        if (in.a >= m.types[type_index].params.size() + f.locals.size()) malformed("local index out of range");
        break;
      case op::global_get:
      case op::global_set:
        in.a = r.u32();
        if (in.a >= m.globals.size()) malformed("global index out of range");
        if (opc == op::global_set && !m.globals[in.a].mutable_) malformed("global.set on immutable global");
        break;
      case op::memory_size:
      case op::memory_grow:
        if (r.byte() != 0x00) malformed("memory index must be 0");
        if (!m.memory) malformed("memory instruction without memory");
        break;
      case op::i32_const:
        in.imm = static_cast<std::uint32_t>(static_cast<std::int32_t>(r.sleb(32)));
        break;
      case op::i64_const:
        in.imm = static_cast<std::uint64_t>(r.sleb(64));
        break;
      case op::f32_const:
        in.imm = get_u32_le(r.take(4).data());
        break;
      case op::f64_const:
        in.imm = get_u64_le(r.take(8).data());
        break;
      case 0xFC: {
        const std::uint32_t sub = r.u32();
        if (sub == 10) {
          if (r.byte() != 0 || r.byte() != 0) malformed("memory.copy memory index must be 0");
        } else if (sub == 11) {
          if (r.byte() != 0) malformed("memory.fill memory index must be 0");
        } else {
          malformed("unsupported 0xFC instruction " + std::to_string(sub));
        }
        if (!m.memory) malformed("memory instruction without memory");
        in.opcode = static_cast<std::uint16_t>(k_prefix_fc + sub);
        break;
      }
      default:
        if (!is_supported_plain_opcode(opc)) malformed("unsupported opcode " + std::to_string(opc));
        if (opc >= 0x28 && opc <= 0x3E) {
          if (!m.memory) malformed("memory instruction without memory");
          r.u32();  // alignment hint
          in.imm = r.u32();
        }
        break;
    }
    f.code.push_back(in);
  }
}

}  // namespace detail

/// Decodes and structurally checks a module. Throws InvalidWasmMagic or
/// InvalidWasmModule.
inline Module decode_module(ByteSpan bytes) {
  using namespace detail;
  if (!has_wasm_magic(bytes)) throw Error(Errc::InvalidWasmMagic, "missing \\0asm header");
  if (bytes.size() < 8 || get_u32_le(bytes.data() + 4) != 1) malformed("unsupported binary version");

  Module m;
  std::vector<std::uint32_t> func_types;
  bool saw_code = false;
  Reader top(bytes.subspan(8));
  while (!top.done()) {
    const std::uint8_t id = top.byte();
    const std::uint32_t size = top.u32();
    Reader r(top.take(size));
    switch (id) {
      case 0:  // custom
        continue;
      case 1: {
        const std::uint32_t n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
          if (r.byte() != 0x60) malformed("expected func type");
          FuncType t;
          const std::uint32_t np = r.u32();
          for (std::uint32_t k = 0; k < np; ++k) t.params.push_back(val_type(r.byte()));
          const std::uint32_t nr = r.u32();
          for (std::uint32_t k = 0; k < nr; ++k) t.results.push_back(val_type(r.byte()));
          m.types.push_back(std::move(t));
        }
        break;
      }
      case 2: {
        const std::uint32_t n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
          Import im;
          im.module = r.name();
          im.name = r.name();
          if (r.byte() != 0x00) malformed("only function imports are supported (" + im.module + "." + im.name + ")");
          im.type_index = r.u32();
          if (im.type_index >= m.types.size()) malformed("import type out of range");
          m.imports.push_back(std::move(im));
        }
        break;
      }
      case 3: {
        const std::uint32_t n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
          const std::uint32_t t = r.u32();
          if (t >= m.types.size()) malformed("function type out of range");
          func_types.push_back(t);
        }
        break;
      }
      case 4: {
        const std::uint32_t n = r.u32();
        if (n > 1) malformed("at most one table");
        if (n == 1) {
          if (r.byte() != 0x70) malformed("table must hold funcref");
          m.table = limits(r);
        }
        break;
      }
      case 5: {
        const std::uint32_t n = r.u32();
        if (n > 1) malformed("at most one memory");
        if (n == 1) {
          m.memory = limits(r);
          if (m.memory->min > k_max_pages || (m.memory->max && *m.memory->max > k_max_pages)) {
            malformed("memory limits exceed 4 GiB");
          }
        }
        break;
      }
      case 6: {
        const std::uint32_t n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
          Global g;
          g.type = val_type(r.byte());
          const std::uint8_t mut = r.byte();
          if (mut > 1) malformed("bad global mutability");
          g.mutable_ = mut == 1;
          g.init = const_expr(r);
          m.globals.push_back(g);
        }
        break;
      }
      case 7: {
        const std::uint32_t n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
          Export e;
          e.name = r.name();
          const std::uint8_t kind = r.byte();
          if (kind > 3) malformed("bad export kind");
          e.kind = static_cast<ExternKind>(kind);
          e.index = r.u32();
          m.exports.push_back(std::move(e));
        }
        break;
      }
      case 8:
        m.start = r.u32();
        break;
      case 9: {
        const std::uint32_t n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
          if (r.u32() != 0) malformed("only active table-0 element segments are supported");
          ElementSegment seg;
          seg.offset = static_cast<std::uint32_t>(const_expr(r));
          const std::uint32_t count = r.u32();
          for (std::uint32_t k = 0; k < count; ++k) seg.functions.push_back(r.u32());
          m.elements.push_back(std::move(seg));
        }
        break;
      }
      case 10: {
        const std::uint32_t n = r.u32();
        if (n != func_types.size()) malformed("function and code section counts differ");
        for (std::uint32_t i = 0; i < n; ++i) {
          const std::uint32_t body_size = r.u32();
          Reader body(r.take(body_size));
          m.functions.push_back(code_body(body, m, func_types[i], static_cast<std::uint32_t>(m.imports.size() + n)));
        }
        saw_code = true;
        break;
      }
      case 11: {
        const std::uint32_t n = r.u32();
        for (std::uint32_t i = 0; i < n; ++i) {
          const std::uint32_t flag = r.u32();
          if (flag == 2) {
            if (r.u32() != 0) malformed("data segment memory index must be 0");
          } else if (flag != 0) {
            malformed("only active data segments are supported");
          }
          DataSegment seg;
          seg.offset = static_cast<std::uint32_t>(const_expr(r));
          const std::uint32_t len = r.u32();
          ByteSpan payload = r.take(len);
          seg.bytes.assign(payload.begin(), payload.end());
          m.data.push_back(std::move(seg));
        }
        break;
      }
      case 12:
        r.u32();  // data count
        break;
      default:
        malformed("unknown section id " + std::to_string(id));
    }
    if (!r.done()) malformed("section " + std::to_string(id) + " has trailing bytes");
  }
  if (!saw_code && !func_types.empty()) malformed("function section without code section");

  const std::uint32_t fc = m.function_count();
  for (const auto& e : m.exports) {
    const bool ok = (e.kind == ExternKind::Func && e.index < fc) ||
                    (e.kind == ExternKind::Memory && m.memory && e.index == 0) ||
                    (e.kind == ExternKind::Table && m.table && e.index == 0) ||
                    (e.kind == ExternKind::Global && e.index < m.globals.size());
    if (!ok) malformed("export '" + e.name + "' refers to a missing item");
  }
  for (const auto& seg : m.elements) {
    if (!m.table) malformed("element segment without table");
    for (auto f : seg.functions) {
      if (f >= fc) malformed("element refers to unknown function");
    }
  }
  if (!m.data.empty() && !m.memory) malformed("data segment without memory");
  if (m.start && *m.start >= fc) malformed("start function out of range");
  return m;
}

}  // namespace wicas::wasm
