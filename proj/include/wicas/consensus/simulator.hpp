#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "wicas/chain/chain_log.hpp"
#include "wicas/chain/gas.hpp"
#include "wicas/chain/state.hpp"
#include "wicas/common/bytes.hpp"
#include "wicas/common/error.hpp"
#include "wicas/common/json_util.hpp"
#include "wicas/common/sha256.hpp"
#include "wicas/consensus/policy.hpp"
#include "wicas/nn/facade.hpp"
#include "wicas/runtime/runtime.hpp"
#include "wicas/toylm/model.hpp"

namespace wicas::consensus {

enum class Behavior { Honest, Divergent, Offline };

inline std::string_view behavior_name(Behavior b) noexcept {
  switch (b) {
    case Behavior::Honest: return "Honest";
    case Behavior::Divergent: return "Divergent";
    case Behavior::Offline: return "Offline";
  }
  return "?";
}

struct ValidatorSpec {
  std::string id;
  std::uint64_t stake = 1;
  Behavior behavior = Behavior::Honest;
  std::uint8_t xor_mask = 0;  // Divergent only

  static ValidatorSpec honest(std::string id, std::uint64_t stake = 1) { return {std::move(id), stake}; }
  static ValidatorSpec divergent(std::string id, std::uint8_t mask, std::uint64_t stake = 1) {
    return {std::move(id), stake, Behavior::Divergent, mask};
  }
  static ValidatorSpec offline(std::string id, std::uint64_t stake = 1) {
    return {std::move(id), stake, Behavior::Offline};
  }
};

/// Parameters for a model generated in memory instead of read from the cache.
struct ModelSpec {
  std::uint32_t hidden_dim = 16;
  std::uint32_t max_context = 512;
  std::uint64_t seed = 0;
};

/// Ids double as log file names, hence the restricted alphabet.
inline bool valid_validator_id(std::string_view id) noexcept {
  if (id.empty() || id.size() > 64 || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '.' ||
           c == '-';
  });
}

struct Scenario {
  std::string chain_id = "wicas-1";
  std::vector<ValidatorSpec> validators;
  ConsensusPolicy policy;
  chain::GasSchedule gas_schedule;
  std::string model_id;
  std::optional<ModelSpec> model;
  std::vector<runtime::ExecuteMsg> txs;
  std::uint64_t scenario_seed = 0;

  void validate() const {
    if (validators.empty()) throw Error(Errc::InvalidScenario, "validators: must not be empty");
    std::set<std::string, std::less<>> ids;
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < validators.size(); ++i) {
      const auto& v = validators[i];
      const std::string path = "validators[" + std::to_string(i) + "]";
      if (!valid_validator_id(v.id)) {
        throw Error(Errc::InvalidScenario, path + ".id: expected 1-64 chars of [A-Za-z0-9_.-], not '.' or '..'");
      }
      if (!ids.insert(v.id).second) throw Error(Errc::InvalidScenario, path + ".id: duplicate '" + v.id + "'");
      if (v.stake == 0) throw Error(Errc::InvalidScenario, path + ".stake: must be >= 1");
      if (v.stake > UINT64_MAX - total) throw Error(Errc::InvalidScenario, path + ".stake: total stake overflows u64");
      total += v.stake;
      if (v.behavior == Behavior::Divergent && v.xor_mask == 0) {
        throw Error(Errc::InvalidScenario, path + ".mask: Divergent validators need a non-zero mask");
      }
    }
    policy.validate();
    gas_schedule.validate();
    if (model && (model->hidden_dim == 0 || model->max_context == 0)) {
      throw Error(Errc::InvalidScenario, "model: hidden_dim and max_context must be >= 1");
    }
    if (std::none_of(validators.begin(), validators.end(),
                     [](const ValidatorSpec& v) { return v.behavior == Behavior::Honest; })) {
      throw Error(Errc::NoHonestValidator, "scenario has no Honest validator");
    }
  }
};

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(Errc::InvalidScenario, "missing field '" + path + key + "'");
  return *it;
}

inline std::uint64_t u64_field(const nlohmann::json& obj, const char* key, const std::string& path) {
  const auto& v = field(obj, key, path);
  if (!is_non_negative_integer(v)) throw Error(Errc::InvalidScenario, path + key + ": expected an unsigned integer");
  return v.get<std::uint64_t>();
}

inline std::string string_field(const nlohmann::json& obj, const char* key, const std::string& path) {
  const auto& v = field(obj, key, path);
  if (!v.is_string()) throw Error(Errc::InvalidScenario, path + key + ": expected a string");
  return v.get<std::string>();
}

inline void known_fields(const nlohmann::json& obj, std::initializer_list<std::string_view> known,
                         const std::string& path) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(Errc::InvalidScenario, "unknown field '" + path + key + "'");
    }
  }
}

inline ConsensusPolicy policy_from_json(const nlohmann::json& j) {
  std::string kind;
  if (j.is_string()) {
    kind = j.get<std::string>();
  } else if (j.is_object()) {
    known_fields(j, {"kind", "threshold_num", "threshold_den"}, "policy.");
    kind = string_field(j, "kind", "policy.");
  } else {
    throw Error(Errc::InvalidScenario, "policy: expected a string or an object");
  }
  ConsensusPolicy p;
  if (kind == "ExactQuorum") {
    p = ConsensusPolicy::exact_quorum();
    if (j.is_object() && j.contains("threshold_num")) p.threshold_num = u64_field(j, "threshold_num", "policy.");
    if (j.is_object() && j.contains("threshold_den")) p.threshold_den = u64_field(j, "threshold_den", "policy.");
  } else if (kind == "Majority") {
    p = ConsensusPolicy::majority();
  } else if (kind == "StakeWeighted") {
    p = ConsensusPolicy::stake_weighted();
  } else {
    throw Error(Errc::InvalidScenario, "policy: unknown kind '" + kind + "'");
  }
  if (p.kind != PolicyKind::ExactQuorum && j.is_object() && (j.contains("threshold_num") || j.contains("threshold_den"))) {
    throw Error(Errc::InvalidScenario, "policy: thresholds only apply to ExactQuorum");
  }
  return p;
}

inline chain::GasSchedule gas_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidScenario, "gas_schedule: expected an object");
  known_fields(j, {"g_base", "g_per_kib_model", "g_per_token", "g_per_storage_op", "tx_gas_limit"}, "gas_schedule.");
  chain::GasSchedule g;
  auto opt = [&](const char* key, std::uint64_t& out) {
    if (j.contains(key)) out = u64_field(j, key, "gas_schedule.");
  };
  opt("g_base", g.g_base);
  opt("g_per_kib_model", g.g_per_kib_model);
  opt("g_per_token", g.g_per_token);
  opt("g_per_storage_op", g.g_per_storage_op);
  opt("tx_gas_limit", g.tx_gas_limit);
  return g;
}

}  // namespace detail

/// Parses and validates a scenario file. Schema problems raise InvalidScenario
/// with the offending field path in the message.
inline Scenario scenario_from_json(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) throw Error(Errc::InvalidScenario, "scenario: expected an object");
  known_fields(j, {"chain_id", "validators", "policy", "gas_schedule", "model_id", "model", "txs", "scenario_seed"}, "");
  Scenario s;
  s.chain_id = string_field(j, "chain_id", "");
  const auto& vals = field(j, "validators", "");
  if (!vals.is_array()) throw Error(Errc::InvalidScenario, "validators: expected an array");
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const auto& v = vals[i];
    const std::string path = "validators[" + std::to_string(i) + "].";
    if (!v.is_object()) throw Error(Errc::InvalidScenario, "validators[" + std::to_string(i) + "]: expected an object");
    known_fields(v, {"id", "stake", "behavior", "mask"}, path);
    ValidatorSpec spec;
    spec.id = string_field(v, "id", path);
    spec.stake = u64_field(v, "stake", path);
    const std::string behavior = string_field(v, "behavior", path);
    if (behavior == "Honest") {
      spec.behavior = Behavior::Honest;
    } else if (behavior == "Divergent") {
      spec.behavior = Behavior::Divergent;
      const std::uint64_t mask = u64_field(v, "mask", path);
      if (mask == 0 || mask > 255) throw Error(Errc::InvalidScenario, path + "mask: must be in 1..255");
      spec.xor_mask = static_cast<std::uint8_t>(mask);
    } else if (behavior == "Offline") {
      spec.behavior = Behavior::Offline;
    } else {
      throw Error(Errc::InvalidScenario, path + "behavior: expected Honest, Divergent or Offline");
    }
    if (spec.behavior != Behavior::Divergent && v.contains("mask")) {
      throw Error(Errc::InvalidScenario, path + "mask: only Divergent validators take a mask");
    }
    s.validators.push_back(std::move(spec));
  }
  s.policy = policy_from_json(field(j, "policy", ""));
  if (j.contains("gas_schedule")) s.gas_schedule = gas_from_json(j.at("gas_schedule"));
  s.model_id = string_field(j, "model_id", "");
  if (!nn::is_valid_model_id(s.model_id)) throw Error(Errc::InvalidScenario, "model_id: invalid model id");
  if (j.contains("model")) {
    const auto& m = j.at("model");
    if (!m.is_object()) throw Error(Errc::InvalidScenario, "model: expected an object");
    known_fields(m, {"hidden_dim", "max_context", "seed"}, "model.");
    ModelSpec spec;
    const std::uint64_t d = u64_field(m, "hidden_dim", "model.");
    const std::uint64_t ctx = u64_field(m, "max_context", "model.");
    if (d > 4096 || ctx > UINT32_MAX) throw Error(Errc::InvalidScenario, "model: dimensions too large");
    spec.hidden_dim = static_cast<std::uint32_t>(d);
    spec.max_context = static_cast<std::uint32_t>(ctx);
    spec.seed = u64_field(m, "seed", "model.");
    s.model = spec;
  }
  const auto& txs = field(j, "txs", "");
  if (!txs.is_array()) throw Error(Errc::InvalidScenario, "txs: expected an array");
  for (std::size_t i = 0; i < txs.size(); ++i) {
    try {
      s.txs.push_back(runtime::msg_from_json(txs[i]));
    } catch (const Error& e) {
      throw Error(Errc::InvalidScenario, "txs[" + std::to_string(i) + "]: " + e.what());
    }
  }
  s.scenario_seed = u64_field(j, "scenario_seed", "");
  s.validate();
  return s;
}

inline nlohmann::json to_json(const Scenario& s) {
  nlohmann::json vals = nlohmann::json::array();
  for (const auto& v : s.validators) {
    nlohmann::json jv = {{"id", v.id}, {"stake", v.stake}, {"behavior", behavior_name(v.behavior)}};
    if (v.behavior == Behavior::Divergent) jv["mask"] = v.xor_mask;
    vals.push_back(std::move(jv));
  }
  nlohmann::json txs = nlohmann::json::array();
  for (const auto& tx : s.txs) txs.push_back(runtime::to_json(tx));
  nlohmann::json j = {{"chain_id", s.chain_id},
                      {"validators", vals},
                      {"policy", to_json(s.policy)},
                      {"gas_schedule",
                       {{"g_base", s.gas_schedule.g_base},
                        {"g_per_kib_model", s.gas_schedule.g_per_kib_model},
                        {"g_per_token", s.gas_schedule.g_per_token},
                        {"g_per_storage_op", s.gas_schedule.g_per_storage_op},
                        {"tx_gas_limit", s.gas_schedule.tx_gas_limit}}},
                      {"model_id", s.model_id},
                      {"txs", txs},
                      {"scenario_seed", s.scenario_seed}};
  if (s.model) {
    j["model"] = {{"hidden_dim", s.model->hidden_dim}, {"max_context", s.model->max_context}, {"seed", s.model->seed}};
  }
  return j;
}

/// Canonical transaction body as recorded in the chain log. Its sha256 is the
/// tx hash that feeds the randomness beacon.
inline nlohmann::json tx_json(const runtime::Address& contract, const runtime::ExecuteMsg& msg, std::uint64_t sequence,
                              std::uint64_t scenario_seed) {
  return {{"contract", contract.hex()},
          {"msg", runtime::to_json(msg)},
          {"sequence", sequence},
          {"scenario_seed", scenario_seed}};
}

/// What a validator votes on: the inference digest when the tx ran inference,
/// otherwise the digest of the canonical execution result.
inline Digest vote_digest(const runtime::ExecResult& r) {
  if (r.inference) return r.inference->digest;
  return sha256(runtime::to_json(r).dump());
}

struct ValidatorLog {
  std::string id;
  Behavior behavior = Behavior::Honest;
  std::vector<chain::BlockRecord> blocks;  // empty for Offline validators
};

struct TxOutcome {
  std::uint64_t height = 0;
  Digest tx_hash;
  std::vector<Vote> votes;  // ordered by validator id
  ConsensusOutcome outcome;
};

struct ReplicationReport {
  enum class Status { Replicated, Diverged, MissingHeights };
  Status status = Status::Replicated;
  std::string reference;  // lowest-id Honest validator
  // First (height, tx index) at which two Honest validators disagree.
  std::optional<std::uint64_t> height;
  std::optional<std::uint64_t> tx_index;
  // Every validator whose app hash differed from the reference at any height.
  std::vector<std::string> mismatching_validators;
  std::string detail;

  bool operator==(const ReplicationReport&) const = default;
};

inline std::string_view status_name(ReplicationReport::Status s) noexcept {
  switch (s) {
    case ReplicationReport::Status::Replicated: return "replicated";
    case ReplicationReport::Status::Diverged: return "diverged";
    case ReplicationReport::Status::MissingHeights: return "MissingHeights";
  }
  return "?";
}

inline nlohmann::json to_json(const ReplicationReport& r) {
  auto opt = [](const std::optional<std::uint64_t>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"status", status_name(r.status)},
          {"reference", r.reference},
          {"height", opt(r.height)},
          {"tx_index", opt(r.tx_index)},
          {"mismatching_validators", r.mismatching_validators},
          {"detail", r.detail}};
}

/// Compares app hashes block by block against the lowest-id Honest validator.
/// Offline validators (no blocks) are skipped.
inline ReplicationReport verify_replication(const std::vector<ValidatorLog>& logs) {
  ReplicationReport report;
  std::vector<const ValidatorLog*> live;
  for (const auto& l : logs) {
    if (l.behavior != Behavior::Offline) live.push_back(&l);
  }
  std::sort(live.begin(), live.end(), [](const ValidatorLog* a, const ValidatorLog* b) { return a->id < b->id; });
  auto ref = std::find_if(live.begin(), live.end(), [](const ValidatorLog* l) { return l->behavior == Behavior::Honest; });
  if (ref == live.end()) {
    report.status = ReplicationReport::Status::MissingHeights;
    report.detail = "no Honest validator log";
    return report;
  }
  const ValidatorLog& reference = **ref;
  report.reference = reference.id;

  for (const ValidatorLog* l : live) {
    if (l->blocks.size() != reference.blocks.size()) {
      report.status = ReplicationReport::Status::MissingHeights;
      report.detail = l->id + " has " + std::to_string(l->blocks.size()) + " blocks, " + reference.id + " has " +
                      std::to_string(reference.blocks.size());
      return report;
    }
  }
  for (const ValidatorLog* l : live) {
    for (std::size_t i = 0; i < l->blocks.size(); ++i) {
      if (l->blocks[i].height != reference.blocks[i].height) {
        report.status = ReplicationReport::Status::MissingHeights;
        report.detail = l->id + " block " + std::to_string(i) + " is height " + std::to_string(l->blocks[i].height);
        return report;
      }
    }
  }

  for (std::size_t i = 0; i < reference.blocks.size(); ++i) {
    for (const ValidatorLog* l : live) {
      if (l->blocks[i].app_hash == reference.blocks[i].app_hash) continue;
      if (std::find(report.mismatching_validators.begin(), report.mismatching_validators.end(), l->id) ==
          report.mismatching_validators.end()) {
        report.mismatching_validators.push_back(l->id);
      }
      if (l->behavior == Behavior::Honest && !report.height) {
        report.status = ReplicationReport::Status::Diverged;
        report.height = reference.blocks[i].height;
        report.tx_index = 0;  // one tx per block
        report.detail = l->id + " disagrees with " + reference.id;
      }
    }
  }
  std::sort(report.mismatching_validators.begin(), report.mismatching_validators.end());
  return report;
}

struct SimulationResult {
  std::vector<ValidatorLog> logs;  // in scenario order
  std::vector<TxOutcome> outcomes;
  ReplicationReport replication;
};

struct SimulationOptions {
  bool parallel = true;
};

namespace detail {

struct NodeRun {
  std::vector<runtime::ExecResult> results;
  std::vector<Digest> app_hashes;
  std::optional<Error> failure;
};

inline NodeRun run_node(const Scenario& s, const ValidatorSpec& v, const std::filesystem::path& cache_root,
                        const std::shared_ptr<const toylm::Model>& model) {
  NodeRun run;
  try {
    chain::ChainState state;
    nn::Facade facade(cache_root);
    if (model) facade.preload(s.model_id, model);
    if (v.behavior == Behavior::Divergent) facade.set_output_xor_mask(v.xor_mask);
    runtime::Runtime rt(state, facade, s.gas_schedule);
    const runtime::Address contract = rt.instantiate(runtime::name_service_code_id());
    for (std::size_t i = 0; i < s.txs.size(); ++i) {
      const std::uint64_t height = i + 1;
      const Digest tx_hash = sha256(tx_json(contract, s.txs[i], i, s.scenario_seed).dump());
      run.results.push_back(rt.execute(contract, s.txs[i], {s.chain_id, height, tx_hash}));
      state.height = height;
      run.app_hashes.push_back(chain::app_hash(state));
    }
  } catch (const Error& e) {
    run.failure = e;
  }
  return run;
}

}  // namespace detail

/// Every non-Offline validator replays the whole tx list on its own state,
/// facade and runtime; nothing is shared between nodes except the immutable
/// model. Votes are then tallied per tx in (height, validator id) order, so the
/// result does not depend on thread scheduling.
///
/// Each tx is its own block at height index + 1. Genesis instantiates the
/// built-in name service, and every tx targets that instance.
inline SimulationResult run_scenario(const Scenario& s, const std::filesystem::path& cache_root,
                                     SimulationOptions options = {}) {
  s.validate();
  std::shared_ptr<const toylm::Model> model;
  if (s.model) {
    model = std::make_shared<const toylm::Model>(
        toylm::generate_model(s.model->hidden_dim, s.model->max_context, s.model->seed));
  }

  const std::size_t n = s.validators.size();
  std::vector<detail::NodeRun> runs(n);
  if (options.parallel) {
    std::vector<std::jthread> workers;
    for (std::size_t i = 0; i < n; ++i) {
      if (s.validators[i].behavior == Behavior::Offline) continue;
      workers.emplace_back([&, i] { runs[i] = detail::run_node(s, s.validators[i], cache_root, model); });
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (s.validators[i].behavior != Behavior::Offline) runs[i] = detail::run_node(s, s.validators[i], cache_root, model);
    }
  }
  for (const auto& r : runs) {
    if (r.failure) throw *r.failure;
  }

  std::map<std::string, std::uint64_t, std::less<>> stakes;
  for (const auto& v : s.validators) stakes.emplace(v.id, v.stake);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s.validators[a].id < s.validators[b].id; });

  SimulationResult out;
  for (const auto& v : s.validators) out.logs.push_back({v.id, v.behavior, {}});
  const runtime::Address contract = [&] {
    chain::ChainState scratch;
    nn::Facade facade(cache_root);
    return runtime::Runtime(scratch, facade).instantiate(runtime::name_service_code_id());
  }();

  for (std::size_t t = 0; t < s.txs.size(); ++t) {
    TxOutcome tx;
    tx.height = t + 1;
    const nlohmann::json body = tx_json(contract, s.txs[t], t, s.scenario_seed);
    tx.tx_hash = sha256(body.dump());
    for (std::size_t i : order) {
      if (s.validators[i].behavior == Behavior::Offline) continue;
      tx.votes.push_back({s.validators[i].id, vote_digest(runs[i].results[t]), runs[i].app_hashes[t]});
    }
    tx.outcome = select_result(tx.votes, s.policy, stakes);
    for (std::size_t i = 0; i < n; ++i) {
      if (s.validators[i].behavior == Behavior::Offline) continue;
      out.logs[i].blocks.push_back({tx.height, {body}, runs[i].app_hashes[t], {tx.outcome.agreed_digest}});
    }
    out.outcomes.push_back(std::move(tx));
  }
  out.replication = verify_replication(out.logs);
  return out;
}

inline nlohmann::json to_json(const ConsensusOutcome& o) {
  nlohmann::json tally = nlohmann::json::array();
  for (const auto& [digest, t] : o.vote_tally) {
    tally.push_back({{"digest", digest.hex()}, {"count", t.count}, {"stake", t.stake}});
  }
  return {{"agreed_digest", o.agreed_digest ? nlohmann::json(o.agreed_digest->hex()) : nlohmann::json(nullptr)},
          {"decided", o.decided},
          {"divergence_detected", o.divergence_detected},
          {"vote_tally", tally}};
}

/// Consensus report written next to the per-validator logs.
inline nlohmann::json report_json(const Scenario& s, const SimulationResult& r) {
  nlohmann::json txs = nlohmann::json::array();
  for (const auto& tx : r.outcomes) {
    nlohmann::json votes = nlohmann::json::array();
    for (const auto& v : tx.votes) {
      votes.push_back({{"validator", v.validator}, {"digest", v.digest.hex()}, {"app_hash", v.app_hash.hex()}});
    }
    nlohmann::json j = to_json(tx.outcome);
    j["height"] = tx.height;
    j["tx_index"] = 0;
    j["tx_hash"] = tx.tx_hash.hex();
    j["votes"] = votes;
    txs.push_back(std::move(j));
  }
  return {{"scenario", to_json(s)}, {"txs", txs}, {"replication", to_json(r.replication)}};
}

/// Writes <out>/logs/<validator id>.jsonl (Offline validators get no file)
/// and <out>/report.json.
inline void write_outputs(const std::filesystem::path& out_dir, const Scenario& s, const SimulationResult& r) {
  std::filesystem::create_directories(out_dir / "logs");
  for (const auto& log : r.logs) {
    if (log.behavior == Behavior::Offline) continue;
    write_file(out_dir / "logs" / (log.id + ".jsonl"), as_bytes(chain::to_jsonl(log.blocks)));
  }
  write_file(out_dir / "report.json", as_bytes(report_json(s, r).dump(2) + "\n"));
}

}  // namespace wicas::consensus
