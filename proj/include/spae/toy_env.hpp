// SPDX-License-Identifier: Apache-2.0
//
// Synthetic verifiable-reasoning task: modular arithmetic chains with an
// exact-match verifier and an analytic solving-step oracle.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spae/core_model.hpp"

namespace spae {

enum class ChainOp { Add, Sub, Mul };

const char* chain_op_name(ChainOp op);
std::optional<ChainOp> chain_op_from_name(const std::string& name);

struct TaskSpec {
  int modulus = 10;
  int chain_length = 1;
  std::vector<ChainOp> ops = {ChainOp::Add, ChainOp::Sub, ChainOp::Mul};
  Vocab vocab = Vocab::standard();

  // Throws std::invalid_argument when the spec cannot be realized.
  void validate() const;
};

struct VerifierResult {
  int reward = 0;
  std::optional<TokenSeq> extracted_answer;
};

// Deterministic in (seed, spec). Prompt is [v0, op_1, a_1, ..., op_L, a_L];
// answer is the folded chain value mod M as a digit token plus EOT.
Query generate_query(std::uint64_t seed, const TaskSpec& spec);

// Evaluates the prompt's chain; throws std::invalid_argument on a malformed
// prompt. Returns the ground-truth answer tokens (digit + EOT).
TokenSeq solve_reference(const Query& query, const Vocab& vocab);

// Oracle solving step: the first step whose concluding digit token equals the
// ground-truth value. Empty when no step reaches it.
std::optional<int> ground_truth_step(const Query& query, const TokenTrajectory& trajectory,
                                     const Vocab& vocab);

// Binary exact-match reward; extracts tokens between the last ANSWER in the
// summary region and the following EOT. Total: malformed output scores 0.
VerifierResult verify(const TokenTrajectory& trajectory, const Query& query, const Vocab& vocab);

}  // namespace spae
