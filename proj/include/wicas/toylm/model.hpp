#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "wicas/common/bytes.hpp"
#include "wicas/common/error.hpp"
#include "wicas/toylm/splitmix64.hpp"

namespace wicas::toylm {

inline constexpr std::uint32_t k_vocab_size = 256;
inline constexpr std::uint32_t k_wicm_version = 1;
inline constexpr std::size_t k_wicm_header_size = 24;
inline constexpr char k_wicm_magic[4] = {'W', 'I', 'C', 'M'};

using Token = std::uint32_t;
inline constexpr Token k_eos_token = 0;

/// Byte-level causal LM: embedding, tanh recurrence, output projection.
/// All weights are row-major binary64.
struct Model {
  std::uint32_t vocab_size = k_vocab_size;
  std::uint32_t hidden_dim = 0;
  std::uint32_t max_context = 0;
  std::vector<double> embedding;   // vocab x hidden
  std::vector<double> recurrence;  // hidden x hidden
  std::vector<double> output;      // vocab x hidden
  std::vector<double> bias;        // vocab
  std::uint64_t size_bytes = 0;
};

/// Exact file length the WICM header promises, or 0 on u64 overflow.
constexpr std::uint64_t wicm_file_size(std::uint64_t vocab, std::uint64_t hidden) noexcept {
  constexpr std::uint64_t k_max = std::numeric_limits<std::uint64_t>::max();
  if (hidden != 0 && vocab > k_max / hidden) return 0;
  const std::uint64_t vd = vocab * hidden;
  if (hidden != 0 && hidden > k_max / hidden) return 0;
  const std::uint64_t dd = hidden * hidden;
  std::uint64_t floats = vd;
  for (std::uint64_t term : {dd, vd, vocab}) {
    if (floats > k_max - term) return 0;
    floats += term;
  }
  if (floats > (k_max - k_wicm_header_size) / 8) return 0;
  return k_wicm_header_size + 8 * floats;
}

namespace detail {

inline double get_f64_le(const std::uint8_t* p) noexcept {
  return std::bit_cast<double>(get_u64_le(p));
}

inline void put_f64_le(Bytes& out, double v) { put_u64_le(out, std::bit_cast<std::uint64_t>(v)); }

}  // namespace detail

/// Parses and validates a WICM container. Throws wicas::Error with
/// BadMagic, BadVersion, BadHeader, TruncatedFile, TrailingData or
/// NonFiniteWeight.
inline Model load_model(ByteSpan bytes) {
  if (bytes.size() < 4) throw Error(Errc::TruncatedFile, "file shorter than magic");
  if (std::memcmp(bytes.data(), k_wicm_magic, 4) != 0) throw Error(Errc::BadMagic, "expected \"WICM\"");
  if (bytes.size() < k_wicm_header_size) throw Error(Errc::TruncatedFile, "file shorter than header");

  const std::uint8_t* p = bytes.data();
  const std::uint32_t version = get_u32_le(p + 4);
  if (version != k_wicm_version) throw Error(Errc::BadVersion, "version " + std::to_string(version));

  Model m;
  m.vocab_size = get_u32_le(p + 8);
  m.hidden_dim = get_u32_le(p + 12);
  m.max_context = get_u32_le(p + 16);
  const std::uint32_t reserved = get_u32_le(p + 20);
  if (m.vocab_size != k_vocab_size) throw Error(Errc::BadHeader, "vocab size must be 256");
  if (m.hidden_dim == 0) throw Error(Errc::BadHeader, "hidden dim must be >= 1");
  if (m.max_context == 0) throw Error(Errc::BadHeader, "max context must be >= 1");
  if (reserved != 0) throw Error(Errc::BadHeader, "reserved field must be zero");

  const std::uint64_t expected = wicm_file_size(m.vocab_size, m.hidden_dim);
  if (expected == 0) throw Error(Errc::BadHeader, "dimensions overflow");
  if (bytes.size() < expected) throw Error(Errc::TruncatedFile, "payload shorter than dimensions imply");
  if (bytes.size() > expected) throw Error(Errc::TrailingData, "payload longer than dimensions imply");

  const std::size_t vd = std::size_t{m.vocab_size} * m.hidden_dim;
  const std::size_t dd = std::size_t{m.hidden_dim} * m.hidden_dim;
  std::size_t offset = k_wicm_header_size;
  auto read_array = [&](std::vector<double>& dst, std::size_t n) {
    dst.resize(n);
    for (std::size_t i = 0; i < n; ++i, offset += 8) {
      dst[i] = detail::get_f64_le(p + offset);
      if (!std::isfinite(dst[i])) {
        throw Error(Errc::NonFiniteWeight, "non-finite weight at byte offset " + std::to_string(offset));
      }
    }
  };
  read_array(m.embedding, vd);
  read_array(m.recurrence, dd);
  read_array(m.output, vd);
  read_array(m.bias, m.vocab_size);
  m.size_bytes = bytes.size();
  return m;
}

/// Inverse of load_model. Array lengths must already match the dimensions.
inline Bytes serialize_model(const Model& m) {
  const std::size_t vd = std::size_t{m.vocab_size} * m.hidden_dim;
  const std::size_t dd = std::size_t{m.hidden_dim} * m.hidden_dim;
  if (m.vocab_size != k_vocab_size || m.hidden_dim == 0 || m.max_context == 0 ||
      m.embedding.size() != vd || m.recurrence.size() != dd || m.output.size() != vd ||
      m.bias.size() != m.vocab_size) {
    throw Error(Errc::BadHeader, "weight arrays do not match dimensions");
  }
  Bytes out;
  out.reserve(wicm_file_size(m.vocab_size, m.hidden_dim));
  out.insert(out.end(), std::begin(k_wicm_magic), std::end(k_wicm_magic));
  put_u32_le(out, k_wicm_version);
  put_u32_le(out, m.vocab_size);
  put_u32_le(out, m.hidden_dim);
  put_u32_le(out, m.max_context);
  put_u32_le(out, 0);
  for (const auto* arr : {&m.embedding, &m.recurrence, &m.output, &m.bias}) {
    for (double v : *arr) detail::put_f64_le(out, v);
  }
  return out;
}

/// All-zero model of the given shape, size_bytes filled in.
inline Model zero_model(std::uint32_t hidden_dim, std::uint32_t max_context) {
  Model m;
  m.hidden_dim = hidden_dim;
  m.max_context = max_context;
  const std::size_t vd = std::size_t{k_vocab_size} * hidden_dim;
  m.embedding.assign(vd, 0.0);
  m.recurrence.assign(std::size_t{hidden_dim} * hidden_dim, 0.0);
  m.output.assign(vd, 0.0);
  m.bias.assign(k_vocab_size, 0.0);
  m.size_bytes = wicm_file_size(k_vocab_size, hidden_dim);
  return m;
}

/// Deterministic random model: one splitmix64 draw per weight, taken in file
/// order (embedding, recurrence, output, bias), mapped to [-1, 1) via the top
/// 53 bits: w = 2 * (draw >> 11) * 2^-53 - 1.
inline Model generate_model(std::uint32_t hidden_dim, std::uint32_t max_context, std::uint64_t seed) {
  Model m = zero_model(hidden_dim, max_context);
  SplitMix64 rng(seed);
  for (auto* arr : {&m.embedding, &m.recurrence, &m.output, &m.bias}) {
    for (double& v : *arr) v = unit_interval_symmetric(rng.next());
  }
  return m;
}

}  // namespace wicas::toylm
