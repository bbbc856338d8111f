#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "wicas/chain/gas.hpp"
#include "wicas/common/error.hpp"
#include "wicas/common/json_util.hpp"

namespace wicas::cli {

struct CliConfig {
  std::filesystem::path cache_root = "wicas-cache";
  std::filesystem::path data_dir = "wicas-data";
  std::string chain_id = "wicas-1";
  chain::GasSchedule gas;
  std::string default_model_id;
  // Per-transaction limit handed to the gas meter. Unlike the schedule's own
  // tx_gas_limit it may be below g_base, which makes every call run out of gas.
  std::optional<std::uint64_t> tx_gas_limit;
};

using EnvLookup = std::function<const char*(const char*)>;

inline const char* process_env(const char* name) { return std::getenv(name); }

/// Defaults, then the config file (if any), then environment overrides:
///   WICAS_CACHE_ROOT, WICAS_DATA_DIR, WICAS_CHAIN_ID, WICAS_TX_GAS_LIMIT.
/// Malformed input raises ParseError.
inline CliConfig load_config(const std::filesystem::path& file, const EnvLookup& env = process_env) {
  CliConfig c;
  auto u64 = [](const nlohmann::json& v, const std::string& path) {
    if (!is_non_negative_integer(v)) throw Error(Errc::ParseError, path + ": expected an unsigned integer");
    return v.get<std::uint64_t>();
  };
  auto str = [](const nlohmann::json& v, const std::string& path) {
    if (!v.is_string()) throw Error(Errc::ParseError, path + ": expected a string");
    return v.get<std::string>();
  };

  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw Error(Errc::IoError, "cannot read config " + file.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::ParseError, file.string() + ": " + e.what());
    }
    if (!j.is_object()) throw Error(Errc::ParseError, "config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
      if (key == "cache_root") {
        c.cache_root = str(v, key);
      } else if (key == "data_dir") {
        c.data_dir = str(v, key);
      } else if (key == "chain_id") {
        c.chain_id = str(v, key);
      } else if (key == "default_model_id") {
        c.default_model_id = str(v, key);
      } else if (key == "gas_schedule") {
        if (!v.is_object()) throw Error(Errc::ParseError, "gas_schedule: expected an object");
        for (const auto& [gk, gv] : v.items()) {
          const std::string path = "gas_schedule." + gk;
          if (gk == "g_base") c.gas.g_base = u64(gv, path);
          else if (gk == "g_per_kib_model") c.gas.g_per_kib_model = u64(gv, path);
          else if (gk == "g_per_token") c.gas.g_per_token = u64(gv, path);
          else if (gk == "g_per_storage_op") c.gas.g_per_storage_op = u64(gv, path);
          else if (gk == "tx_gas_limit") c.tx_gas_limit = u64(gv, path);
          else throw Error(Errc::ParseError, "unknown config field '" + path + "'");
        }
      } else {
        throw Error(Errc::ParseError, "unknown config field '" + key + "'");
      }
    }
  }

  if (const char* v = env("WICAS_CACHE_ROOT"); v && *v) c.cache_root = v;
  if (const char* v = env("WICAS_DATA_DIR"); v && *v) c.data_dir = v;
  if (const char* v = env("WICAS_CHAIN_ID"); v && *v) c.chain_id = v;
  if (const char* v = env("WICAS_TX_GAS_LIMIT"); v && *v) {
    const std::string s = v;
    if (s.find_first_not_of("0123456789") != std::string::npos || s.size() > 20) {
      throw Error(Errc::ParseError, "WICAS_TX_GAS_LIMIT must be an unsigned integer");
    }
    try {
      c.tx_gas_limit = std::stoull(s);
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, "WICAS_TX_GAS_LIMIT out of range");
    }
  }

  if (c.chain_id.empty()) throw Error(Errc::ParseError, "chain_id must not be empty");
  try {
    c.gas.validate();
  } catch (const Error& e) {
    throw Error(Errc::ParseError, e.what());
  }
  return c;
}

}  // namespace wicas::cli
