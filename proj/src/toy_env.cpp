// SPDX-License-Identifier: Apache-2.0

#include "spae/toy_env.hpp"

#include <stdexcept>

#include "spae/rng.hpp"

namespace spae {

namespace {

int apply_op(ChainOp op, int lhs, int rhs, int modulus) {
  switch (op) {
    case ChainOp::Add:
      return (lhs + rhs) % modulus;
    case ChainOp::Sub:
      return ((lhs - rhs) % modulus + modulus) % modulus;
    case ChainOp::Mul:
      return (lhs * rhs) % modulus;
  }
  throw std::invalid_argument("unknown chain op");
}

Token op_token(ChainOp op, const Vocab& v) {
  switch (op) {
    case ChainOp::Add:
      return v.op_add;
    case ChainOp::Sub:
      return v.op_sub;
    case ChainOp::Mul:
      return v.op_mul;
  }
  throw std::invalid_argument("unknown chain op");
}

std::optional<ChainOp> op_from_token(Token t, const Vocab& v) {
  if (t == v.op_add) return ChainOp::Add;
  if (t == v.op_sub) return ChainOp::Sub;
  if (t == v.op_mul) return ChainOp::Mul;
  return std::nullopt;
}

}  // namespace

const char* chain_op_name(ChainOp op) {
  switch (op) {
    case ChainOp::Add:
      return "add";
    case ChainOp::Sub:
      return "sub";
    case ChainOp::Mul:
      return "mul";
  }
  return "?";
}

std::optional<ChainOp> chain_op_from_name(const std::string& name) {
  if (name == "add") return ChainOp::Add;
  if (name == "sub") return ChainOp::Sub;
  if (name == "mul") return ChainOp::Mul;
  return std::nullopt;
}

void TaskSpec::validate() const {
  vocab.validate();
  if (modulus < 2) throw std::invalid_argument("modulus must be >= 2");
  if (modulus > vocab.digit_capacity)
    throw std::invalid_argument("modulus exceeds vocab digit capacity");
  if (chain_length < 1) throw std::invalid_argument("chain_length must be >= 1");
  if (ops.empty()) throw std::invalid_argument("at least one chain op required");
}

Query generate_query(std::uint64_t seed, const TaskSpec& spec) {
  spec.validate();
  Rng rng(seed, {0x71u});
  const Vocab& v = spec.vocab;

  Query q;
  q.id = seed;
  q.meta = {seed, spec.modulus, spec.chain_length};

  int value = static_cast<int>(rng.below(spec.modulus));
  q.prompt.push_back(value);
  for (int i = 0; i < spec.chain_length; ++i) {
    const ChainOp op = spec.ops[rng.below(spec.ops.size())];
    const int operand = static_cast<int>(rng.below(spec.modulus));
    q.prompt.push_back(op_token(op, v));
    q.prompt.push_back(operand);
    value = apply_op(op, value, operand, spec.modulus);
  }
  q.answer = {value, v.eot};
  return q;
}

TokenSeq solve_reference(const Query& query, const Vocab& vocab) {
  const auto& p = query.prompt;
  const int modulus = query.meta.modulus;
  if (modulus < 2) throw std::invalid_argument("query has invalid modulus");
  if (p.size() < 3 || p.size() % 2 == 0) throw std::invalid_argument("malformed chain prompt");
  if (!vocab.is_digit(p[0]) || p[0] >= modulus)
    throw std::invalid_argument("malformed chain prompt: bad start value");

  int value = p[0];
  for (std::size_t i = 1; i + 1 < p.size(); i += 2) {
    const auto op = op_from_token(p[i], vocab);
    if (!op) throw std::invalid_argument("malformed chain prompt: expected op token");
    if (!vocab.is_digit(p[i + 1]) || p[i + 1] >= modulus)
      throw std::invalid_argument("malformed chain prompt: bad operand");
    value = apply_op(*op, value, p[i + 1], modulus);
  }
  return {value, vocab.eot};
}

std::optional<int> ground_truth_step(const Query& query, const TokenTrajectory& trajectory,
                                     const Vocab& vocab) {
  const TokenSeq truth = solve_reference(query, vocab);
  const Token target = truth.front();
  for (int k = 0; k < trajectory.num_steps(); ++k) {
    const StepSpan& span = trajectory.steps[k];
    // The step's conclusion is its last digit token.
    Token claimed = -1;
    for (int j = span.begin; j < span.end; ++j)
      if (vocab.is_digit(trajectory.tokens[j])) claimed = trajectory.tokens[j];
    if (claimed == target) return k + 1;
  }
  return std::nullopt;
}

VerifierResult verify(const TokenTrajectory& trajectory, const Query& query, const Vocab& vocab) {
  VerifierResult result;
  const auto& toks = trajectory.tokens;
  const int n = static_cast<int>(toks.size());

  int answer_idx = -1;
  for (int i = trajectory.reasoning_end; i < n; ++i)
    if (toks[i] == vocab.answer) answer_idx = i;
  if (answer_idx < 0) return result;

  int eot_idx = -1;
  for (int i = answer_idx + 1; i < n; ++i) {
    if (toks[i] == vocab.eot) {
      eot_idx = i;
      break;
    }
  }
  if (eot_idx < 0) return result;

  TokenSeq extracted(toks.begin() + answer_idx + 1, toks.begin() + eot_idx);
  TokenSeq expected = query.answer;
  if (!expected.empty() && expected.back() == vocab.eot) expected.pop_back();
  result.extracted_answer = extracted;
  result.reward = (extracted == expected) ? 1 : 0;
  return result;
}

}  // namespace spae
