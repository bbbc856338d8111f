#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "wicas/common/bytes.hpp"
#include "wicas/common/error.hpp"
#include "wicas/common/sha256.hpp"
#include "wicas/toylm/model.hpp"
#include "wicas/toylm/splitmix64.hpp"

namespace wicas::toylm {

enum class DecodeMode : std::uint8_t { Greedy = 0, Sampled = 1 };

struct DecodeParams {
  DecodeMode mode = DecodeMode::Greedy;
  std::uint32_t max_tokens = 1;
  double temperature = 1.0;  // Sampled only
  Token eos_token = k_eos_token;

  void validate() const {
    if (max_tokens < 1) throw Error(Errc::InvalidParams, "max_tokens must be >= 1");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
      throw Error(Errc::InvalidParams, "temperature must be finite and > 0");
    }
    if (eos_token != k_eos_token) throw Error(Errc::InvalidParams, "eos token is fixed at 0");
  }
};

struct DecodeResult {
  Bytes output;                    // EOS excluded
  std::uint32_t tokens_generated = 0;  // EOS included when emitted
  Digest digest;                   // sha256(output)
  bool context_overflow = false;   // stopped because the context window filled
};

/// Hidden state of the recurrence. Every dot product is accumulated strictly
/// left to right in index order; nothing here may be reassociated or fused.
class RecurrentState {
 public:
  explicit RecurrentState(const Model& model) : model_(&model), h_(model.hidden_dim, 0.0), next_(model.hidden_dim) {}

  /// h <- tanh(A*h + E[token])
  void feed(Token token) {
    if (token >= model_->vocab_size) throw Error(Errc::TokenOutOfRange, "token " + std::to_string(token));
    const std::size_t d = model_->hidden_dim;
    const double* emb = model_->embedding.data() + std::size_t{token} * d;
    for (std::size_t i = 0; i < d; ++i) {
      const double* row = model_->recurrence.data() + i * d;
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += row[j] * h_[j];
      next_[i] = std::tanh(acc + emb[i]);
    }
    h_.swap(next_);
  }

  /// logits = W*h + b
  void logits(std::span<double> out) const {
    const std::size_t d = model_->hidden_dim;
    for (std::size_t v = 0; v < model_->vocab_size; ++v) {
      const double* row = model_->output.data() + v * d;
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += row[j] * h_[j];
      out[v] = acc + model_->bias[v];
    }
  }

  std::span<const double> hidden() const noexcept { return h_; }

 private:
  const Model* model_;
  std::vector<double> h_;
  std::vector<double> next_;
};

/// Logits for the next token after `tokens`.
inline std::vector<double> forward(const Model& model, std::span<const Token> tokens) {
  if (tokens.empty()) throw Error(Errc::EmptyInput, "forward needs at least one token");
  if (tokens.size() > model.max_context) {
    throw Error(Errc::ContextOverflow, std::to_string(tokens.size()) + " tokens > max_context " +
                                           std::to_string(model.max_context));
  }
  RecurrentState state(model);
  for (Token t : tokens) state.feed(t);
  std::vector<double> out(model.vocab_size);
  state.logits(out);
  return out;
}

/// Argmax; ties go to the lowest token id.
inline Token select_greedy(std::span<const double> logits) noexcept {
  Token best = 0;
  for (Token k = 1; k < logits.size(); ++k) {
    if (logits[k] > logits[best]) best = k;
  }
  return best;
}

/// Inverse-CDF sampling from softmax(logits / temperature) with a single
/// uniform draw u = draw / 2^64. Picks the smallest k with CDF(k) >= u; if
/// rounding leaves the final CDF below u, the last token with nonzero
/// probability is taken.
inline Token select_sampled(std::span<const double> logits, double temperature, std::uint64_t draw,
                            std::vector<double>& scratch) {
  const std::size_t n = logits.size();
  scratch.resize(n);
  double max_scaled = logits[0] / temperature;
  for (std::size_t k = 0; k < n; ++k) {
    scratch[k] = logits[k] / temperature;
    if (scratch[k] > max_scaled) max_scaled = scratch[k];
  }
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    scratch[k] = std::exp(scratch[k] - max_scaled);
    total += scratch[k];
  }
  const double u = static_cast<double>(draw) / 18446744073709551616.0;
  double cdf = 0.0;
  Token last_nonzero = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double p = scratch[k] / total;
    cdf += p;
    if (p > 0.0) last_nonzero = static_cast<Token>(k);
    if (cdf >= u) return static_cast<Token>(k);
  }
  return last_nonzero;
}

/// Autoregressive decode. Each step computes logits over the whole sequence
/// so far (prompt plus generated tokens), selects one token, and stops on
/// EOS or after max_tokens. Prompt plus output never exceeds max_context:
/// once the sequence fills the window, generation stops with
/// context_overflow set.
inline DecodeResult decode(const Model& model, ByteSpan prompt, const DecodeParams& params, std::uint64_t seed) {
  params.validate();
  if (prompt.empty()) throw Error(Errc::EmptyInput, "prompt must be non-empty");
  if (prompt.size() > model.max_context) {
    throw Error(Errc::ContextOverflow, "prompt of " + std::to_string(prompt.size()) +
                                           " bytes exceeds max_context " + std::to_string(model.max_context));
  }

  RecurrentState state(model);
  for (std::uint8_t b : prompt) state.feed(b);

  SplitMix64 rng(seed);
  std::vector<double> logits(model.vocab_size);
  std::vector<double> scratch;
  DecodeResult result;
  std::size_t sequence_len = prompt.size();

  while (result.tokens_generated < params.max_tokens) {
    if (sequence_len == model.max_context) {
      result.context_overflow = true;
      break;
    }
    // The previous token is fed only when another one will be generated.
    if (!result.output.empty()) state.feed(result.output.back());
    state.logits(logits);
    const Token next = params.mode == DecodeMode::Greedy
                           ? select_greedy(logits)
                           : select_sampled(logits, params.temperature, rng.next(), scratch);
    ++result.tokens_generated;
    if (next == params.eos_token) break;
    result.output.push_back(static_cast<std::uint8_t>(next));
    ++sequence_len;
  }
  result.digest = sha256(result.output);
  return result;
}

}  // namespace wicas::toylm
