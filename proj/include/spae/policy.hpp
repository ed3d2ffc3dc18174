// SPDX-License-Identifier: Apache-2.0
//
// Autoregressive policy oracle and the tabular-softmax reference policy with
// analytic log-likelihood gradients.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spae/core_model.hpp"
#include "spae/rng.hpp"
#include "spae/toy_env.hpp"

namespace spae {

struct DecodeConfig {
  double temperature = 1.0;
  int top_k = 0;      // 0 disables top-k
  double top_p = 1.0;  // 1.0 disables top-p
  int max_len = 64;
};

// Applies temperature then top-k then top-p to a normalized distribution,
// renormalizing over the surviving support.
void filter_distribution(std::vector<double>& dist, const DecodeConfig& decode);

class PolicyOracle {
 public:
  virtual ~PolicyOracle() = default;
  virtual int vocab_size() const = 0;
  // Normalized next-token distribution given the full context sequence.
  virtual std::vector<double> next_token_distribution(std::span<const Token> context) const = 0;
};

struct SampledToken {
  Token token = 0;
  double logprob = 0.0;  // under the filtered sampling distribution
  double entropy = 0.0;  // of the filtered sampling distribution
};

SampledToken sample_token(const PolicyOracle& policy, std::span<const Token> context,
                          const DecodeConfig& decode, Rng& rng);

// Autoregressive rollout for a query: samples until EOT or decode.max_len,
// then segments reasoning steps. Reward is left at 0; callers verify.
TokenTrajectory sample_trajectory(const PolicyOracle& policy, const Query& query,
                                  const DecodeConfig& decode, const Vocab& vocab, Rng& rng);

// Context-keyed table of logits over the vocabulary. Rows are softmaxed at
// the policy temperature; the last context_order tokens (left-padded at the
// sequence start) choose the row, via an injective positional packing when
// (vocab+1)^order fits the table and a mixing hash otherwise.
class TabularPolicy : public PolicyOracle {
 public:
  TabularPolicy(int context_order, int table_rows, int vocab_size, double temperature = 1.0);

  int vocab_size() const override { return vocab_size_; }
  int context_order() const { return context_order_; }
  int table_rows() const { return table_rows_; }
  double temperature() const { return temperature_; }

  std::vector<double> next_token_distribution(std::span<const Token> context) const override;

  std::uint32_t row_of(std::span<const Token> context) const;

  std::span<double> row(std::uint32_t r) { return {logits_.data() + std::size_t(r) * vocab_size_, static_cast<std::size_t>(vocab_size_)}; }
  std::span<const double> row(std::uint32_t r) const { return {logits_.data() + std::size_t(r) * vocab_size_, static_cast<std::size_t>(vocab_size_)}; }
  std::span<double> all_logits() { return logits_; }
  std::span<const double> all_logits() const { return logits_; }

  // Log-probability of `token` and its gradient w.r.t. the context row,
  // under the plain policy-temperature softmax.
  std::pair<double, std::vector<double>> logprob_and_grad(std::span<const Token> context,
                                                          Token token) const;

  // Same, under the filtered decode-time distribution (the one rollouts are
  // sampled from); entries outside the surviving support get zero gradient.
  std::pair<double, std::vector<double>> logprob_and_grad_decoded(std::span<const Token> context,
                                                                  Token token,
                                                                  const DecodeConfig& decode) const;

  std::vector<double> distribution_of_row(std::uint32_t r, double temperature) const;

  void save(const std::string& path) const;
  static TabularPolicy load(const std::string& path);

 private:
  int context_order_;
  int table_rows_;
  int vocab_size_;
  double temperature_;
  bool packed_rows_ = false;  // injective window packing fits the table
  std::vector<double> logits_;
};

// Initialization that biases a fresh policy toward stepwise computation,
// WAIT + re-derivation loops after reaching an answer, and occasional value
// slips while re-checking. Rows are written as exact log-probabilities over
// each pattern's plausible tokens; implausible tokens get a floor logit so
// the toy grammar is exact (and, having zero probability, they receive zero
// gradient during training).
struct OverCheckPrior {
  double solve_acc = 0.85;          // chance the solve step lands on the true value
  double loop_prob = 0.7;           // P(open a checking loop after the solve step)
  double recheck_prob = 0.7;        // P(open another loop after a checking step)
  double flip_prob = 0.08;          // per-check chance the copied value slips +-1
  double probe_first_spread = 0.0;  // probe mass spilled to neighbor digits at the
                                    // solve-step boundary (uncommitted first probe)

  void validate() const;
};

// Requires spec.chain_length == 1: longer chains are not representable within
// the context window and would degenerate to noise.
void apply_overcheck_prior(TabularPolicy& policy, const TaskSpec& spec, const OverCheckPrior& prior);

}  // namespace spae
