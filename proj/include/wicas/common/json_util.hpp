#pragma once

#include <cstdint>

#include <json.hpp>

namespace wicas {

/// Parsed text stores non-negative integers as unsigned, but values built in
/// code from int literals are signed; accept both.
inline bool is_non_negative_integer(const nlohmann::json& v) noexcept {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

}  // namespace wicas
