#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include <openssl/evp.h>

#include "wicas/common/bytes.hpp"

namespace wicas {

/// 32-byte SHA-256 output. Ordered bytewise so it can key maps and break ties.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  auto operator<=>(const Digest&) const = default;

  std::string hex() const { return to_hex(bytes); }
  static Digest from_hex(std::string_view hex) { return {array_from_hex<32>(hex)}; }
};

/// Incremental SHA-256 over the OpenSSL EVP interface.
class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("sha256: EVP init failed");
    }
  }

  Sha256& update(ByteSpan data) {
    if (!data.empty() && EVP_DigestUpdate(ctx_.get(), data.data(), data.size()) != 1) {
      throw std::runtime_error("sha256: EVP update failed");
    }
    return *this;
  }
  Sha256& update(std::string_view s) { return update(as_bytes(s)); }

  Digest finish() {
    Digest d;
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), d.bytes.data(), &len) != 1 || len != d.bytes.size()) {
      throw std::runtime_error("sha256: EVP final failed");
    }
    return d;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

inline Digest sha256(ByteSpan data) { return Sha256().update(data).finish(); }
inline Digest sha256(std::string_view data) { return Sha256().update(data).finish(); }

}  // namespace wicas
