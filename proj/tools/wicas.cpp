// wicas: command-line front end for the local single-node chain, the
// multi-validator simulator, model packing and benchmarking.
//
// Exit codes: 0 success, 1 domain error, 2 usage or parse error, 3 out of gas.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wicas/chain/chain_log.hpp"
#include "wicas/chain/state.hpp"
#include "wicas/cli/config.hpp"
#include "wicas/consensus/simulator.hpp"
#include "wicas/nn/facade.hpp"
#include "wicas/runtime/runtime.hpp"
#include "wicas/toylm/model_spec.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wicas;

namespace {

constexpr int k_exit_ok = 0;
constexpr int k_exit_domain = 1;
constexpr int k_exit_usage = 2;
constexpr int k_exit_out_of_gas = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(Errc c) {
  switch (c) {
    case Errc::OutOfGas: return k_exit_out_of_gas;
    case Errc::ParseError:
    case Errc::InvalidScenario: return k_exit_usage;
    default: return k_exit_domain;
  }
}

std::string pretty(const json& j) { return j.dump(2, ' ', false, json::error_handler_t::replace); }

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ParseError, what + ": " + e.what());
  }
}

json read_json_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw UsageError("cannot read " + path.string());
  return parse_json_text(to_string(read_file(path)), path.string());
}

/// Single-node chain persisted as <data_dir>/state.json plus an append-only
/// <data_dir>/chain.jsonl with one block per committed transaction.
class LocalChain {
 public:
  explicit LocalChain(const cli::CliConfig& cfg) : cfg_(cfg), facade_(cfg.cache_root) {
    fs::create_directories(cfg.data_dir);
    if (fs::exists(state_path())) state_ = chain::state_from_json(read_json_file(state_path()));
  }

  runtime::Runtime runtime() { return runtime::Runtime(state_, facade_, cfg_.gas); }
  chain::ChainState& state() { return state_; }
  std::uint64_t next_height() const { return state_.height + 1; }

  void commit(const json& tx, std::optional<Digest> agreed) {
    state_.height += 1;
    chain::BlockRecord block{state_.height, {tx}, chain::app_hash(state_), {agreed}};
    const fs::path tmp = state_path().string() + ".tmp";
    write_file(tmp, as_bytes(chain::state_to_json(state_).dump() + "\n"));
    fs::rename(tmp, state_path());
    chain::append_block(cfg_.data_dir / "chain.jsonl", block);
  }

 private:
  fs::path state_path() const { return cfg_.data_dir / "state.json"; }

  cli::CliConfig cfg_;
  chain::ChainState state_;
  nn::Facade facade_;
};

int cmd_store(const cli::CliConfig& cfg, const fs::path& file) {
  if (!fs::is_regular_file(file)) throw UsageError("cannot read " + file.string());
  const Bytes code = read_file(file);
  LocalChain chain(cfg);
  auto rt = chain.runtime();
  const runtime::CodeId id = rt.store_code(code);
  chain.commit({{"store", id.hex()}}, std::nullopt);
  std::cout << id.hex() << "\n";
  return k_exit_ok;
}

int cmd_instantiate(const cli::CliConfig& cfg, const std::string& code_arg) {
  runtime::CodeId id;
  if (code_arg == "builtin:name-service") {
    id = runtime::name_service_code_id();
  } else {
    try {
      id = Digest::from_hex(code_arg);
    } catch (const std::exception&) {
      throw UsageError("code id must be 64 hex chars or builtin:name-service");
    }
  }
  LocalChain chain(cfg);
  auto rt = chain.runtime();
  const runtime::Address addr = rt.instantiate(id);
  chain.commit({{"instantiate", id.hex()}, {"address", addr.hex()}}, std::nullopt);
  std::cout << addr.hex() << "\n";
  return k_exit_ok;
}

int cmd_execute(const cli::CliConfig& cfg, const std::string& addr_arg, const std::string& msg_arg) {
  runtime::Address addr;
  try {
    addr = runtime::Address::from_hex(addr_arg);
  } catch (const std::exception&) {
    throw UsageError("address must be 40 hex chars");
  }
  const auto first = msg_arg.find_first_not_of(" \t\r\n");
  const bool inline_json = first != std::string::npos && msg_arg[first] == '{';
  const std::string text = inline_json ? msg_arg : read_json_file(msg_arg).dump();
  runtime::ExecuteMsg msg;
  try {
    msg = runtime::msg_from_json_text(text);
  } catch (const Error& e) {
    throw UsageError(std::string("bad message: ") + e.what());
  }

  LocalChain chain(cfg);
  auto rt = chain.runtime();
  const std::uint64_t height = chain.next_height();
  const json tx = {{"contract", addr.hex()}, {"msg", runtime::to_json(msg)}, {"height", height}};
  const Digest tx_hash = sha256(tx.dump());
  const runtime::ExecResult r = rt.execute(addr, msg, {cfg.chain_id, height, tx_hash}, cfg.tx_gas_limit);

  json out = runtime::to_json(r);
  out["height"] = height;
  out["tx_hash"] = tx_hash.hex();
  if (r.inference) out["output_text"] = to_string(r.inference->output);
  if (r.error) out["error_message"] = r.error_message;
  std::cout << pretty(out) << "\n";
  if (r.error) return exit_code_for(*r.error);
  chain.commit(tx, consensus::vote_digest(r));
  return k_exit_ok;
}

int cmd_simulate(const cli::CliConfig& cfg, const fs::path& file, const fs::path& out_dir) {
  const consensus::Scenario s = consensus::scenario_from_json(read_json_file(file));
  const auto result = consensus::run_scenario(s, cfg.cache_root);
  consensus::write_outputs(out_dir, s, result);
  for (const auto& tx : result.outcomes) {
    const std::string agreed = tx.outcome.agreed_digest ? tx.outcome.agreed_digest->hex().substr(0, 16) : "-";
    std::cout << "height=" << tx.height << " decided=" << (tx.outcome.decided ? "yes" : "no") << " agreed=" << agreed
              << " divergence=" << (tx.outcome.divergence_detected ? "yes" : "no") << "\n";
  }
  std::cout << "replication: " << consensus::status_name(result.replication.status);
  if (!result.replication.mismatching_validators.empty()) {
    std::cout << " (mismatching:";
    for (const auto& id : result.replication.mismatching_validators) std::cout << " " << id;
    std::cout << ")";
  }
  std::cout << "\nwrote " << (out_dir / "report.json").string() << "\n";
  return k_exit_ok;
}

struct BenchArgs {
  std::string model_id;
  std::string prompt = "hello";
  std::uint32_t max_tokens = 256;
  std::uint32_t repeats = 5;
  std::string mode = "greedy";
  std::uint64_t seed = 0;
  double temperature = 1.0;
};

int cmd_bench(const cli::CliConfig& cfg, BenchArgs a) {
  if (a.model_id.empty()) a.model_id = cfg.default_model_id;
  if (a.model_id.empty()) throw UsageError("--model is required (or set default_model_id in the config)");
  if (a.repeats == 0) throw UsageError("--repeats must be >= 1");
  if (a.max_tokens == 0) throw UsageError("--max-tokens must be >= 1");
  if (a.prompt.empty()) throw UsageError("--prompt must not be empty");

  nn::Facade facade(cfg.cache_root);
  const nn::GraphHandle graph = facade.build_from_cache(a.model_id);
  nn::DecodeParams params;
  params.mode = a.mode == "greedy" ? nn::DecodeMode::Greedy : nn::DecodeMode::Sampled;
  params.max_tokens = a.max_tokens;
  params.temperature = a.temperature;

  std::vector<double> rates;
  std::vector<std::string> digests;
  std::uint32_t tokens = 0;
  for (std::uint32_t i = 0; i < a.repeats; ++i) {
    const nn::ContextId ctx = facade.init_execution_context(graph, a.seed, params);
    facade.set_input(ctx, 0, nn::Tensor::text(a.prompt));
    const auto t0 = std::chrono::steady_clock::now();
    facade.compute(ctx);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto& r = facade.result(ctx);
    tokens = r.tokens_generated;
    rates.push_back(secs > 0 ? r.tokens_generated / secs : 0.0);
    digests.push_back(r.digest.hex());
    facade.release_context(ctx);
  }
  std::sort(rates.begin(), rates.end());
  const std::size_t n = rates.size();
  const double median = n % 2 ? rates[n / 2] : (rates[n / 2 - 1] + rates[n / 2]) / 2;
  const bool stable = std::all_of(digests.begin(), digests.end(), [&](const auto& d) { return d == digests[0]; });

  json out = {{"model_id", a.model_id},     {"hidden_dim", facade.model(a.model_id)->hidden_dim},
              {"mode", a.mode},             {"repeats", a.repeats},
              {"tokens_generated", tokens}, {"median_tokens_per_sec", median},
              {"digest", digests[0]},       {"digest_stable", stable}};
  std::cout << pretty(out) << "\n";
  return stable ? k_exit_ok : k_exit_domain;
}

int cmd_model_pack(const fs::path& spec_file, const fs::path& out) {
  const toylm::Model m = toylm::model_from_spec(read_json_file(spec_file));
  const Bytes bytes = toylm::serialize_model(m);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_file(out, bytes);
  std::cout << "wrote " << out.string() << " size_bytes=" << bytes.size() << " sha256=" << sha256(bytes).hex() << "\n";
  return k_exit_ok;
}

int cmd_model_inspect(const fs::path& file) {
  if (!fs::is_regular_file(file)) throw UsageError("cannot read " + file.string());
  const Bytes bytes = read_file(file);
  const toylm::Model m = toylm::load_model(bytes);
  std::cout << "V=" << m.vocab_size << " D=" << m.hidden_dim << " max_context=" << m.max_context
            << " size_bytes=" << m.size_bytes << " sha256=" << sha256(bytes).hex() << "\n";
  return k_exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wicas: on-chain inference toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file");

  fs::path store_file;
  auto* store = app.add_subcommand("store", "Upload WASM contract code, print its code id");
  store->add_option("file", store_file)->required();

  std::string code_arg;
  auto* inst = app.add_subcommand("instantiate", "Create a contract instance, print its address");
  inst->add_option("code_id", code_arg, "hex code id or builtin:name-service")->required();

  std::string exec_addr, exec_msg;
  auto* exec = app.add_subcommand("execute", "Run one transaction against a contract");
  exec->add_option("address", exec_addr)->required();
  exec->add_option("msg", exec_msg, "inline JSON or path to a JSON file")->required();

  fs::path scenario_file;
  fs::path sim_out;
  auto* sim = app.add_subcommand("simulate", "Run a multi-validator scenario");
  sim->add_option("scenario", scenario_file)->required();
  sim->add_option("--out", sim_out, "output directory (default <data_dir>/sim)");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Measure decode throughput");
  bench->add_option("--model", bench_args.model_id);
  bench->add_option("--prompt", bench_args.prompt);
  bench->add_option("--max-tokens", bench_args.max_tokens);
  bench->add_option("--repeats", bench_args.repeats);
  bench->add_option("--mode", bench_args.mode)->check(CLI::IsMember({"greedy", "sampled"}));
  bench->add_option("--seed", bench_args.seed);
  bench->add_option("--temperature", bench_args.temperature);

  auto* model = app.add_subcommand("model", "Model file utilities");
  model->require_subcommand(1);
  fs::path pack_spec, pack_out, inspect_file;
  auto* pack = model->add_subcommand("pack", "Write a .wicm file from a JSON spec");
  pack->add_option("spec", pack_spec)->required();
  pack->add_option("-o,--output", pack_out)->required();
  auto* inspect = model->add_subcommand("inspect", "Validate a .wicm file and print its header");
  inspect->add_option("file", inspect_file)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return k_exit_usage;
  }

  try {
    if (*pack) return cmd_model_pack(pack_spec, pack_out);
    if (*inspect) return cmd_model_inspect(inspect_file);

    const cli::CliConfig cfg = cli::load_config(config_path);
    if (*store) return cmd_store(cfg, store_file);
    if (*inst) return cmd_instantiate(cfg, code_arg);
    if (*exec) return cmd_execute(cfg, exec_addr, exec_msg);
    if (*sim) return cmd_simulate(cfg, scenario_file, sim_out.empty() ? cfg.data_dir / "sim" : sim_out);
    if (*bench) return cmd_bench(cfg, bench_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return k_exit_usage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return k_exit_domain;
  }
  return k_exit_usage;
}
