#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wicas/common/error.hpp"
#include "wicas/common/sha256.hpp"

namespace wicas::chain {

/// One line of a chain log. `txs` holds each transaction's canonical JSON;
/// `agreed_digests` has one entry per tx, null when no result was decided.
struct BlockRecord {
  std::uint64_t height = 0;
  std::vector<nlohmann::json> txs;
  Digest app_hash;
  std::vector<std::optional<Digest>> agreed_digests;

  bool operator==(const BlockRecord&) const = default;
};

inline nlohmann::json to_json(const BlockRecord& b) {
  nlohmann::json agreed = nlohmann::json::array();
  for (const auto& d : b.agreed_digests) agreed.push_back(d ? nlohmann::json(d->hex()) : nlohmann::json(nullptr));
  return {{"height", b.height}, {"txs", b.txs}, {"app_hash", b.app_hash.hex()}, {"agreed_digests", agreed}};
}

inline BlockRecord block_from_json(const nlohmann::json& j) {
  BlockRecord b;
  b.height = j.at("height").get<std::uint64_t>();
  for (const auto& tx : j.at("txs")) b.txs.push_back(tx);
  b.app_hash = Digest::from_hex(j.at("app_hash").get<std::string>());
  for (const auto& d : j.at("agreed_digests")) {
    b.agreed_digests.push_back(d.is_null() ? std::nullopt : std::optional(Digest::from_hex(d.get<std::string>())));
  }
  return b;
}

/// JSON-lines rendering: one compact, key-sorted object per block.
inline std::string to_jsonl(const std::vector<BlockRecord>& log) {
  std::string out;
  for (const auto& b : log) {
    out += to_json(b).dump();
    out += '\n';
  }
  return out;
}

inline void append_block(const std::filesystem::path& path, const BlockRecord& block) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(Errc::IoError, "cannot append to " + path.string());
  out << to_json(block).dump() << '\n';
}

inline std::vector<BlockRecord> read_chain_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<BlockRecord> log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      log.push_back(block_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, path.string() + ": " + e.what());
    }
  }
  return log;
}

}  // namespace wicas::chain
