#pragma once

// Exhaustive call-order check for the facade: every sequence of length 1..3
// over {set_input, compute, get_output}, each on a fresh context. An
// independent transition table says which calls are legal; illegal calls must
// raise InvalidState and change nothing observable.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "wicas/nn/facade.hpp"

namespace facade_sequences {

enum class Call { SetInput, Compute, GetOutput };
inline constexpr std::array<Call, 3> k_calls = {Call::SetInput, Call::Compute, Call::GetOutput};

inline const char* call_name(Call c) {
  switch (c) {
    case Call::SetInput: return "set_input";
    case Call::Compute: return "compute";
    case Call::GetOutput: return "get_output";
  }
  return "?";
}

// 0 = Created, 1 = InputSet, 2 = Computed. -1 marks an illegal call.
inline int next_state(int state, Call c) {
  static constexpr int table[3][3] = {
      // set_input, compute, get_output
      {1, -1, -1},   // Created
      {1, 2, -1},    // InputSet
      {-1, -1, 2},   // Computed
  };
  return table[state][static_cast<int>(c)];
}

inline std::vector<std::vector<Call>> all_sequences() {
  std::vector<std::vector<Call>> out;
  std::vector<std::vector<Call>> frontier = {{}};
  for (int len = 1; len <= 3; ++len) {
    std::vector<std::vector<Call>> grown;
    for (const auto& prefix : frontier) {
      for (Call c : k_calls) {
        auto s = prefix;
        s.push_back(c);
        grown.push_back(s);
      }
    }
    out.insert(out.end(), grown.begin(), grown.end());
    frontier = std::move(grown);
  }
  return out;
}

struct Summary {
  std::size_t sequences = 0;
  std::size_t illegal_calls = 0;
  std::vector<std::string> failures;
};

/// `facade` must have `model_id` available and decode must produce output.
inline Summary run_all(wicas::nn::Facade& facade, const std::string& model_id) {
  using namespace wicas;
  using namespace wicas::nn;
  Summary summary;
  const auto graph = facade.build_from_cache(model_id);
  DecodeParams params;
  params.max_tokens = 4;

  for (const auto& seq : all_sequences()) {
    ++summary.sequences;
    std::string label;
    for (Call c : seq) label += std::string(label.empty() ? "" : ",") + call_name(c);
    auto fail = [&](const std::string& why) { summary.failures.push_back(label + ": " + why); };

    const ContextId ctx = facade.init_execution_context(graph, 1, params);
    int state = 0;
    std::optional<Bytes> last_output;
    for (Call c : seq) {
      const int expected = next_state(state, c);
      const ContextState before = facade.state(ctx);
      std::optional<Errc> err;
      Bytes out(64);
      std::uint32_t n = 0;
      try {
        switch (c) {
          case Call::SetInput: facade.set_input(ctx, 0, Tensor::text("seq")); break;
          case Call::Compute: facade.compute(ctx); break;
          case Call::GetOutput: n = facade.get_output(ctx, 0, out); break;
        }
      } catch (const Error& e) {
        err = e.code();
      }
      if (expected < 0) {
        ++summary.illegal_calls;
        if (err != Errc::InvalidState) fail(std::string(call_name(c)) + " should raise InvalidState");
        if (facade.state(ctx) != before) fail(std::string(call_name(c)) + " changed state after an error");
        if (last_output) {
          Bytes again(64);
          const auto m = facade.get_output(ctx, 0, again);
          again.resize(m);
          if (again != *last_output) fail("prior output changed");
        }
      } else {
        if (err) fail(std::string(call_name(c)) + " raised " + std::string(errc_name(*err)));
        state = expected;
        if (static_cast<int>(facade.state(ctx)) != state) fail("unexpected state after " + std::string(call_name(c)));
        if (c == Call::Compute) {
          Bytes o(64);
          o.resize(facade.get_output(ctx, 0, o));
          last_output = o;
        }
        if (c == Call::GetOutput) {
          out.resize(n);
          if (!last_output || out != *last_output) fail("get_output returned different bytes");
        }
      }
    }
    facade.release_context(ctx);
  }
  return summary;
}

}  // namespace facade_sequences
