#pragma once

#include <cstdint>
#include <string_view>

#include "wicas/common/bytes.hpp"
#include "wicas/common/sha256.hpp"

namespace wicas::chain {

struct BeaconSeed {
  std::uint64_t seed = 0;
  bool operator==(const BeaconSeed&) const = default;
};

/// Public-data beacon: first 8 bytes, little-endian, of
/// sha256(chain_id || u64le(height) || tx_hash). Reproducible on every node,
/// not unpredictable.
inline BeaconSeed derive_seed(std::string_view chain_id, std::uint64_t height, const Digest& tx_hash) {
  Bytes height_le;
  put_u64_le(height_le, height);
  const Digest d = Sha256().update(chain_id).update(height_le).update(tx_hash.bytes).finish();
  return {get_u64_le(d.bytes.data())};
}

}  // namespace wicas::chain
