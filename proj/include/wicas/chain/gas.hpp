#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include "wicas/common/error.hpp"

namespace wicas::chain {

struct GasSchedule {
  std::uint64_t g_base = 1000;
  std::uint64_t g_per_kib_model = 10;
  std::uint64_t g_per_token = 100;
  std::uint64_t g_per_storage_op = 50;
  std::uint64_t tx_gas_limit = 1'000'000;

  void validate() const {
    if (g_base < 1 || g_per_kib_model < 1 || g_per_token < 1 || g_per_storage_op < 1) {
      throw Error(Errc::InvalidParams, "gas constants must be >= 1");
    }
    if (tx_gas_limit <= g_base) throw Error(Errc::InvalidParams, "tx_gas_limit must exceed g_base");
  }
};

struct GasReceipt {
  std::uint64_t base = 0;
  std::uint64_t model_component = 0;
  std::uint64_t token_component = 0;
  std::uint64_t storage_component = 0;
  std::uint64_t total = 0;

  bool operator==(const GasReceipt&) const = default;
};

namespace detail {

inline constexpr std::uint64_t k_gas_max = std::numeric_limits<std::uint64_t>::max();

constexpr std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) noexcept {
  return a > k_gas_max - b ? k_gas_max : a + b;
}

constexpr std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) noexcept {
  return (a != 0 && b > k_gas_max / a) ? k_gas_max : a * b;
}

}  // namespace detail

struct InferenceGas {
  std::uint64_t base = 0;
  std::uint64_t model_component = 0;
  std::uint64_t token_component = 0;
  std::uint64_t total = 0;
};

/// base + per_kib * ceil(size / 1024) + per_token * tokens, itemized.
/// Saturates at u64 max, which no limit can satisfy.
constexpr InferenceGas inference_gas(const GasSchedule& s, std::uint64_t model_size_bytes,
                                     std::uint64_t tokens_generated) noexcept {
  const std::uint64_t kib = model_size_bytes / 1024 + (model_size_bytes % 1024 != 0 ? 1 : 0);
  InferenceGas g;
  g.base = s.g_base;
  g.model_component = detail::sat_mul(s.g_per_kib_model, kib);
  g.token_component = detail::sat_mul(s.g_per_token, tokens_generated);
  g.total = detail::sat_add(detail::sat_add(g.base, g.model_component), g.token_component);
  return g;
}

constexpr std::uint64_t gas_for_inference(const GasSchedule& s, std::uint64_t model_size_bytes,
                                          std::uint64_t tokens_generated) noexcept {
  return inference_gas(s, model_size_bytes, tokens_generated).total;
}

enum class GasCategory : std::uint8_t { Base, Model, Token, Storage };

/// Per-transaction meter. A charge that does not fit in the remaining budget
/// throws OutOfGas and is not recorded; everything charged before it stays.
class GasMeter {
 public:
  explicit GasMeter(std::uint64_t limit) noexcept : limit_(limit) {}

  std::uint64_t limit() const noexcept { return limit_; }
  std::uint64_t remaining() const noexcept { return limit_ - receipt_.total; }
  const GasReceipt& receipt() const noexcept { return receipt_; }

  void charge(std::uint64_t amount, GasCategory category = GasCategory::Base) {
    if (amount == 0) return;
    if (amount > remaining()) {
      throw Error(Errc::OutOfGas, "need " + std::to_string(amount) + ", have " + std::to_string(remaining()));
    }
    bucket(category) += amount;
    receipt_.total += amount;
  }

  /// All three inference components land together or not at all.
  void charge_inference(const InferenceGas& g) {
    if (g.total > remaining()) {
      throw Error(Errc::OutOfGas, "inference needs " + std::to_string(g.total) + ", have " +
                                      std::to_string(remaining()));
    }
    receipt_.base += g.base;
    receipt_.model_component += g.model_component;
    receipt_.token_component += g.token_component;
    receipt_.total += g.total;
  }

 private:
  std::uint64_t& bucket(GasCategory c) noexcept {
    switch (c) {
      case GasCategory::Model: return receipt_.model_component;
      case GasCategory::Token: return receipt_.token_component;
      case GasCategory::Storage: return receipt_.storage_component;
      case GasCategory::Base: break;
    }
    return receipt_.base;
  }

  std::uint64_t limit_;
  GasReceipt receipt_;
};

}  // namespace wicas::chain
