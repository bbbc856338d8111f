#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "wicas/common/bytes.hpp"
#include "wicas/common/sha256.hpp"

namespace wicas::chain {

/// Replicated key-value state. Keys and values are raw byte strings held in
/// std::string; std::string ordering is unsigned-bytewise, which is the
/// canonical order.
struct ChainState {
  std::map<std::string, std::string, std::less<>> kv;
  std::uint64_t height = 0;

  std::optional<std::string> get(std::string_view key) const {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  }

  void set(std::string key, std::string value) { kv.insert_or_assign(std::move(key), std::move(value)); }

  bool operator==(const ChainState&) const = default;
};

/// sha256 over entries sorted by key, each encoded as
/// u32le(len key) || key || u32le(len value) || value.
inline Digest app_hash(const ChainState& state) {
  Sha256 h;
  Bytes len;
  for (const auto& [key, value] : state.kv) {
    len.clear();
    put_u32_le(len, static_cast<std::uint32_t>(key.size()));
    h.update(len).update(key);
    len.clear();
    put_u32_le(len, static_cast<std::uint32_t>(value.size()));
    h.update(len).update(value);
  }
  return h.finish();
}

/// Hex-encoded snapshot used for persisting a single-node chain on disk.
inline nlohmann::json state_to_json(const ChainState& state) {
  nlohmann::json kv = nlohmann::json::array();
  for (const auto& [key, value] : state.kv) kv.push_back({to_hex(as_bytes(key)), to_hex(as_bytes(value))});
  return {{"height", state.height}, {"kv", kv}};
}

inline ChainState state_from_json(const nlohmann::json& j) {
  ChainState s;
  s.height = j.at("height").get<std::uint64_t>();
  for (const auto& entry : j.at("kv")) {
    s.set(to_string(from_hex(entry.at(0).get<std::string>())), to_string(from_hex(entry.at(1).get<std::string>())));
  }
  return s;
}

}  // namespace wicas::chain
