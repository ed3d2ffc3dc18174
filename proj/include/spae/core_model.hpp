// SPDX-License-Identifier: Apache-2.0
//
// Token/step/trajectory data model: vocabulary layout, queries, sampled
// trajectories, step segmentation and the token-to-step map.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace spae {

using Token = std::int32_t;
using TokenSeq = std::vector<Token>;

// Step indices are 1-based everywhere in the public API; kSummaryStep marks
// tokens at or after reasoning_end.
constexpr int kSummaryStep = 0;

// Token id layout. Ids below digit_capacity are value tokens 0..digit_capacity-1;
// reserved control ids and the arithmetic-op ids used in prompts live above.
struct Vocab {
  int size = 18;
  int digit_capacity = 10;
  Token delim = 10;      // step delimiter, ends a reasoning step
  Token answer = 11;     // answer trigger, also the probe prompt
  Token think_end = 12;  // reasoning terminator
  Token eot = 13;        // end of text
  Token wait = 14;       // reflective token opening a checking step
  Token op_add = 15;
  Token op_sub = 16;
  Token op_mul = 17;

  static Vocab standard() { return Vocab{}; }

  // Throws std::invalid_argument on overlapping/out-of-range reserved ids.
  void validate() const;

  bool is_digit(Token t) const { return t >= 0 && t < digit_capacity; }
};

struct QueryMeta {
  std::uint64_t seed = 0;
  int modulus = 10;
  int chain_length = 1;
};

struct Query {
  std::uint64_t id = 0;
  TokenSeq prompt;
  TokenSeq answer;  // ground-truth digits + terminal EOT
  QueryMeta meta;
};

struct StepSpan {
  int begin = 0;  // inclusive
  int end = 0;    // exclusive

  bool operator==(const StepSpan&) const = default;
};

struct TokenTrajectory {
  std::uint64_t query_id = 0;
  TokenSeq tokens;
  std::vector<double> logprobs;  // behavior-policy logprob per token
  int reasoning_end = 0;         // index of THINK_END, or tokens.size() if absent
  std::vector<StepSpan> steps;   // tile [0, reasoning_end)
  int reward = 0;                // binary
  bool truncated = false;        // hit max_len before EOT

  int num_steps() const { return static_cast<int>(steps.size()); }
  int length() const { return static_cast<int>(tokens.size()); }
};

struct StepIndexMap {
  // Per token: 1-based step index, or kSummaryStep for summary tokens.
  std::vector<int> token_to_step;
};

// Splits [0, reasoning_end) into spans, each ending right after a DELIM
// token; a trailing run without DELIM is kept as the final step.
std::vector<StepSpan> segment_steps(std::span<const Token> tokens, int reasoning_end, Token delim);

StepIndexMap map_token_to_step(const TokenTrajectory& trajectory);

}  // namespace spae
