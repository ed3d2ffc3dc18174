// SPDX-License-Identifier: Apache-2.0
//
// Training-free probing: per-step confidence from short sampled
// continuations and correctness from teacher-forced answer probabilities.

#pragma once

#include <span>
#include <vector>

#include "spae/core_model.hpp"
#include "spae/policy.hpp"
#include "spae/rng.hpp"

namespace spae {

struct ProbeConfig {
  int n_samples = 5;
  int max_continuation_tokens = 3;
  DecodeConfig decode;   // probe generation mirrors the main decode settings
  Token stop_token = Vocab::standard().eot;

  void validate() const;
};

struct ProbeRecord {
  int step_index = 0;          // 1-based
  double confidence = 0.0;     // mean over samples of exp(-mean entropy)
  double correctness = 0.0;    // teacher-forced mean answer probability
  std::vector<double> sample_entropies;    // per-sample mean token entropy
  std::vector<double> sample_correctness;  // replicated forced value, length N
};

// prompt || reasoning tokens through the end of step k || ANSWER trigger.
// Throws std::out_of_range for k outside [1, K].
TokenSeq build_probe_context(const Query& query, const TokenTrajectory& trajectory, int k,
                             const Vocab& vocab);

// Shannon entropy in nats, with 0 * log 0 == 0.
double token_entropy(std::span<const double> dist);

// Samples cfg.n_samples continuations (stopping at cfg.stop_token or the
// length cap) and returns (confidence, per-sample mean entropies).
std::pair<double, std::vector<double>> probe_confidence(const PolicyOracle& policy,
                                                        std::span<const Token> context,
                                                        const ProbeConfig& cfg, Rng& rng);

// Teacher-forced mean probability of the answer tokens. The answer must be
// non-empty; a terminal stop token should already be stripped by the caller.
double probe_correctness(const PolicyOracle& policy, std::span<const Token> context,
                         std::span<const Token> answer, const ProbeConfig& cfg);

// Probe of an explicit context: confidence from sampled continuations plus
// teacher-forced correctness of the answer digits.
ProbeRecord probe_context(const PolicyOracle& policy, std::span<const Token> context,
                          std::span<const Token> answer_digits, const ProbeConfig& cfg, Rng& rng);

ProbeRecord probe_step(const PolicyOracle& policy, const Query& query,
                       const TokenTrajectory& trajectory, int k, const ProbeConfig& cfg,
                       const Vocab& vocab, Rng& rng);

// Probes every step of a trajectory; stream-seeded per (master, trajectory
// label, step) so records are independent of probe scheduling.
std::vector<ProbeRecord> probe_all_steps(const PolicyOracle& policy, const Query& query,
                                         const TokenTrajectory& trajectory, const ProbeConfig& cfg,
                                         const Vocab& vocab, std::uint64_t master_seed,
                                         std::uint64_t trajectory_label);

}  // namespace spae
