#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "wicas/common/error.hpp"
#include "wicas/common/json_util.hpp"
#include "wicas/toylm/model.hpp"

namespace wicas::toylm {

/// Builds a model from a pack spec. Two forms:
///
///   {"hidden_dim": D, "max_context": C, "seed": S}
///       weights drawn by generate_model
///   {"hidden_dim": D, "max_context": C, "weights": {"embedding": ..., "recurrence": ...,
///                                                   "output": ..., "bias": ...}}
///       each array is either dense (exact length) or sparse {"<index>": value};
///       arrays left out are zero
///
/// "vocab_size" may be given but must be 256.
inline Model model_from_spec(const nlohmann::json& spec) {
  auto fail = [](const std::string& what) -> Model { throw Error(Errc::InvalidParams, what); };
  if (!spec.is_object()) return fail("model spec must be a JSON object");
  for (const auto& [key, _] : spec.items()) {
    if (key != "vocab_size" && key != "hidden_dim" && key != "max_context" && key != "seed" && key != "weights") {
      return fail("unknown field '" + key + "'");
    }
  }
  auto u64 = [&](const char* key) -> std::uint64_t {
    auto it = spec.find(key);
    if (it == spec.end()) throw Error(Errc::InvalidParams, std::string("missing field '") + key + "'");
    if (!is_non_negative_integer(*it)) throw Error(Errc::InvalidParams, std::string(key) + ": expected an unsigned integer");
    return it->get<std::uint64_t>();
  };
  if (spec.contains("vocab_size") && u64("vocab_size") != k_vocab_size) return fail("vocab_size must be 256");
  const std::uint64_t d = u64("hidden_dim");
  const std::uint64_t ctx = u64("max_context");
  if (d == 0 || d > 4096) return fail("hidden_dim must be in 1..4096");
  if (ctx == 0 || ctx > UINT32_MAX) return fail("max_context must be in 1..2^32-1");
  const bool has_seed = spec.contains("seed");
  const bool has_weights = spec.contains("weights");
  if (has_seed == has_weights) return fail("give exactly one of 'seed' or 'weights'");

  const auto hidden = static_cast<std::uint32_t>(d);
  const auto context = static_cast<std::uint32_t>(ctx);
  if (has_seed) return generate_model(hidden, context, u64("seed"));

  Model m = zero_model(hidden, context);
  const auto& w = spec.at("weights");
  if (!w.is_object()) return fail("weights must be an object");
  auto fill = [&](const char* name, std::vector<double>& arr) {
    auto it = w.find(name);
    if (it == w.end()) return;
    const std::string path = std::string("weights.") + name;
    auto value = [&](const nlohmann::json& v, const std::string& where) {
      if (!v.is_number()) throw Error(Errc::InvalidParams, where + ": expected a number");
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw Error(Errc::NonFiniteWeight, where);
      return x;
    };
    if (it->is_array()) {
      if (it->size() != arr.size()) {
        throw Error(Errc::InvalidParams, path + ": dimension mismatch, expected " + std::to_string(arr.size()) +
                                             " values, got " + std::to_string(it->size()));
      }
      for (std::size_t i = 0; i < arr.size(); ++i) arr[i] = value((*it)[i], path + "[" + std::to_string(i) + "]");
    } else if (it->is_object()) {
      for (const auto& [key, v] : it->items()) {
        std::size_t idx = 0;
        std::size_t used = 0;
        try {
          idx = std::stoul(key, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used == 0 || used != key.size()) throw Error(Errc::InvalidParams, path + ": bad index '" + key + "'");
        if (idx >= arr.size()) {
          throw Error(Errc::InvalidParams, path + ": index " + key + " out of range (size " +
                                               std::to_string(arr.size()) + ")");
        }
        arr[idx] = value(v, path + "." + key);
      }
    } else {
      throw Error(Errc::InvalidParams, path + ": expected an array or an index map");
    }
  };
  for (const auto& [key, _] : w.items()) {
    if (key != "embedding" && key != "recurrence" && key != "output" && key != "bias") {
      return fail("unknown field 'weights." + key + "'");
    }
  }
  fill("embedding", m.embedding);
  fill("recurrence", m.recurrence);
  fill("output", m.output);
  fill("bias", m.bias);
  return m;
}

}  // namespace wicas::toylm
