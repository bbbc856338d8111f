#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "wicas/common/error.hpp"
#include "wicas/common/json_util.hpp"
#include "wicas/toylm/engine.hpp"

namespace wicas::runtime {

using toylm::DecodeMode;

struct Register {
  std::string name;
  std::string value;
  bool operator==(const Register&) const = default;
};

struct Resolve {
  std::string name;
  bool operator==(const Resolve&) const = default;
};

struct InferFromName {
  std::string name;
  std::uint32_t max_tokens = 1;
  DecodeMode mode = DecodeMode::Greedy;
  std::string model_id;
  bool operator==(const InferFromName&) const = default;
};

using ExecuteMsg = std::variant<Register, Resolve, InferFromName>;

inline constexpr std::size_t k_max_name_length = 64;
inline constexpr std::size_t k_max_value_length = 256;
inline constexpr std::uint32_t k_max_infer_tokens = 256;

/// [a-z0-9-]{1,64}
inline bool is_valid_name(std::string_view name) noexcept {
  if (name.empty() || name.size() > k_max_name_length) return false;
  return std::all_of(name.begin(), name.end(),
                     [](char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-'; });
}

inline std::string_view mode_name(DecodeMode m) noexcept { return m == DecodeMode::Greedy ? "greedy" : "sampled"; }

inline nlohmann::json to_json(const ExecuteMsg& msg) {
  return std::visit(
      [](const auto& m) -> nlohmann::json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Register>) {
          return {{"register", {{"name", m.name}, {"value", m.value}}}};
        } else if constexpr (std::is_same_v<T, Resolve>) {
          return {{"resolve", {{"name", m.name}}}};
        } else {
          return {{"infer_from_name",
                   {{"name", m.name}, {"max_tokens", m.max_tokens}, {"mode", mode_name(m.mode)}, {"model_id", m.model_id}}}};
        }
      },
      msg);
}

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(Errc::InvalidMessage, "missing field " + path + "." + key);
  return *it;
}

inline std::string require_string(const nlohmann::json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) throw Error(Errc::InvalidMessage, path + "." + key + " must be a string");
  return v.get<std::string>();
}

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<std::string_view> known,
                           const std::string& path) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(Errc::InvalidMessage, "unknown field " + path + "." + key);
    }
  }
}

}  // namespace detail

/// Structural parse: exactly one variant key, required fields with the right
/// JSON types, no unknown fields. Semantic checks (name syntax, token limits)
/// belong to the contract.
inline ExecuteMsg msg_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.size() != 1) {
    throw Error(Errc::InvalidMessage, "message must be an object with exactly one variant key");
  }
  const auto& [tag, body] = *j.items().begin();
  const std::string path = "msg." + tag;
  if (!body.is_object()) throw Error(Errc::InvalidMessage, path + " must be an object");
  if (tag == "register") {
    detail::reject_unknown(body, {"name", "value"}, path);
    return Register{detail::require_string(body, "name", path), detail::require_string(body, "value", path)};
  }
  if (tag == "resolve") {
    detail::reject_unknown(body, {"name"}, path);
    return Resolve{detail::require_string(body, "name", path)};
  }
  if (tag == "infer_from_name") {
    detail::reject_unknown(body, {"name", "max_tokens", "mode", "model_id"}, path);
    InferFromName m;
    m.name = detail::require_string(body, "name", path);
    const auto& tokens = detail::require(body, "max_tokens", path);
    if (!is_non_negative_integer(tokens) || tokens.get<std::uint64_t>() > UINT32_MAX) {
      throw Error(Errc::InvalidMessage, path + ".max_tokens must be an unsigned 32-bit integer");
    }
    m.max_tokens = tokens.get<std::uint32_t>();
    const std::string mode = detail::require_string(body, "mode", path);
    if (mode == "greedy") {
      m.mode = DecodeMode::Greedy;
    } else if (mode == "sampled") {
      m.mode = DecodeMode::Sampled;
    } else {
      throw Error(Errc::InvalidMessage, path + ".mode must be \"greedy\" or \"sampled\"");
    }
    m.model_id = detail::require_string(body, "model_id", path);
    return m;
  }
  throw Error(Errc::InvalidMessage, "unknown message variant '" + tag + "'");
}

inline ExecuteMsg msg_from_json_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ParseError, e.what());
  }
  return msg_from_json(j);
}

}  // namespace wicas::runtime
