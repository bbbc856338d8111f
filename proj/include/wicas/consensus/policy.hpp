#pragma once

#include <cstdint>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wicas/common/error.hpp"
#include "wicas/common/sha256.hpp"

namespace wicas::consensus {

struct Vote {
  std::string validator;
  Digest digest;
  Digest app_hash;

  bool operator==(const Vote&) const = default;
};

enum class PolicyKind { ExactQuorum, Majority, StakeWeighted };

inline std::string_view policy_name(PolicyKind k) noexcept {
  switch (k) {
    case PolicyKind::ExactQuorum: return "ExactQuorum";
    case PolicyKind::Majority: return "Majority";
    case PolicyKind::StakeWeighted: return "StakeWeighted";
  }
  return "?";
}

struct ConsensusPolicy {
  PolicyKind kind = PolicyKind::ExactQuorum;
  std::uint64_t threshold_num = 2;  // ExactQuorum only
  std::uint64_t threshold_den = 3;

  static ConsensusPolicy exact_quorum(std::uint64_t num = 2, std::uint64_t den = 3) {
    return {PolicyKind::ExactQuorum, num, den};
  }
  static ConsensusPolicy majority() { return {PolicyKind::Majority}; }
  static ConsensusPolicy stake_weighted() { return {PolicyKind::StakeWeighted}; }

  /// Threshold must lie in (1/2, 1] so two digests can never both reach it.
  void validate() const {
    if (kind != PolicyKind::ExactQuorum) return;
    if (threshold_den == 0 || threshold_num > threshold_den ||
        static_cast<unsigned __int128>(threshold_num) * 2 <= threshold_den) {
      throw Error(Errc::InvalidScenario, "quorum threshold " + std::to_string(threshold_num) + "/" +
                                             std::to_string(threshold_den) + " is outside (1/2, 1]");
    }
  }
};

inline nlohmann::json to_json(const ConsensusPolicy& p) {
  nlohmann::json j = {{"kind", policy_name(p.kind)}};
  if (p.kind == PolicyKind::ExactQuorum) {
    j["threshold_num"] = p.threshold_num;
    j["threshold_den"] = p.threshold_den;
  }
  return j;
}

struct Tally {
  std::uint64_t count = 0;
  std::uint64_t stake = 0;

  bool operator==(const Tally&) const = default;
};

struct ConsensusOutcome {
  std::optional<Digest> agreed_digest;
  std::map<Digest, Tally> vote_tally;
  bool decided = false;
  bool divergence_detected = false;

  bool operator==(const ConsensusOutcome&) const = default;
};

/// Stake needed for an ExactQuorum decision: ceil(num * total / den), computed
/// without overflow.
inline std::uint64_t quorum_stake(std::uint64_t total, std::uint64_t num, std::uint64_t den) {
  const unsigned __int128 scaled = static_cast<unsigned __int128>(total) * num;
  return static_cast<std::uint64_t>((scaled + den - 1) / den);
}

/// `stakes` is the full validator set. Validators that did not vote still count
/// toward the ExactQuorum total, so offline stake makes a decision harder,
/// never easier.
inline ConsensusOutcome select_result(std::span<const Vote> votes, const ConsensusPolicy& policy,
                                      const std::map<std::string, std::uint64_t, std::less<>>& stakes) {
  if (votes.empty()) throw Error(Errc::EmptyVoteSet, "no votes cast");
  policy.validate();

  auto add = [](std::uint64_t a, std::uint64_t b) {
    if (b > UINT64_MAX - a) throw Error(Errc::InvalidScenario, "stake sum overflows u64");
    return a + b;
  };

  ConsensusOutcome out;
  for (const Vote& v : votes) {
    auto s = stakes.find(v.validator);
    if (s == stakes.end()) throw Error(Errc::InvalidScenario, "vote from unknown validator '" + v.validator + "'");
    Tally& t = out.vote_tally[v.digest];
    t.count += 1;
    t.stake = add(t.stake, s->second);
  }
  out.divergence_detected = out.vote_tally.size() >= 2;

  // The tally is ordered by digest, so keeping the first strict maximum
  // implements the lexicographic tie-break.
  auto best_by = [&](auto key) {
    auto best = out.vote_tally.begin();
    for (auto it = std::next(best); it != out.vote_tally.end(); ++it) {
      if (key(it->second) > key(best->second)) best = it;
    }
    return best->first;
  };

  switch (policy.kind) {
    case PolicyKind::Majority:
      out.agreed_digest = best_by([](const Tally& t) { return t.count; });
      out.decided = true;
      break;
    case PolicyKind::StakeWeighted:
      out.agreed_digest = best_by([](const Tally& t) { return t.stake; });
      out.decided = true;
      break;
    case PolicyKind::ExactQuorum: {
      std::uint64_t total = 0;
      for (const auto& [_, stake] : stakes) total = add(total, stake);
      const std::uint64_t need = quorum_stake(total, policy.threshold_num, policy.threshold_den);
      for (const auto& [digest, t] : out.vote_tally) {
        if (t.stake >= need && t.stake > 0) {
          out.agreed_digest = digest;
          out.decided = true;
          break;
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace wicas::consensus
