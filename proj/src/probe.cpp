// SPDX-License-Identifier: Apache-2.0

#include "spae/probe.hpp"

#include <cmath>
#include <stdexcept>

namespace spae {

void ProbeConfig::validate() const {
  if (n_samples < 1) throw std::invalid_argument("probe n_samples must be >= 1");
  if (max_continuation_tokens < 1)
    throw std::invalid_argument("probe max_continuation_tokens must be >= 1");
}

TokenSeq build_probe_context(const Query& query, const TokenTrajectory& trajectory, int k,
                             const Vocab& vocab) {
  if (k < 1 || k > trajectory.num_steps())
    throw std::out_of_range("probe step index outside [1, K]");
  const int end = trajectory.steps[k - 1].end;
  TokenSeq context = query.prompt;
  context.insert(context.end(), trajectory.tokens.begin(), trajectory.tokens.begin() + end);
  context.push_back(vocab.answer);
  return context;
}

double token_entropy(std::span<const double> dist) {
  double h = 0.0;
  for (double p : dist)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

std::pair<double, std::vector<double>> probe_confidence(const PolicyOracle& policy,
                                                        std::span<const Token> context,
                                                        const ProbeConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<double> mean_entropies;
  mean_entropies.reserve(cfg.n_samples);
  double conf_sum = 0.0;

  TokenSeq extended;
  for (int n = 0; n < cfg.n_samples; ++n) {
    extended.assign(context.begin(), context.end());
    double entropy_sum = 0.0;
    int length = 0;
    for (int l = 0; l < cfg.max_continuation_tokens; ++l) {
      std::vector<double> dist = policy.next_token_distribution(extended);
      filter_distribution(dist, cfg.decode);
      entropy_sum += token_entropy(dist);
      ++length;
      const int tok = rng.categorical(dist);
      extended.push_back(tok);
      if (tok == cfg.stop_token) break;
    }
    const double mean_entropy = entropy_sum / length;
    mean_entropies.push_back(mean_entropy);
    conf_sum += std::exp(-mean_entropy);
  }
  return {conf_sum / cfg.n_samples, std::move(mean_entropies)};
}

double probe_correctness(const PolicyOracle& policy, std::span<const Token> context,
                         std::span<const Token> answer, const ProbeConfig& cfg) {
  if (answer.empty()) throw std::invalid_argument("probe answer must be non-empty");
  TokenSeq extended(context.begin(), context.end());
  double prob_sum = 0.0;
  for (Token t : answer) {
    std::vector<double> dist = policy.next_token_distribution(extended);
    filter_distribution(dist, cfg.decode);
    prob_sum += dist[t];
    extended.push_back(t);
  }
  return prob_sum / static_cast<double>(answer.size());
}

ProbeRecord probe_context(const PolicyOracle& policy, std::span<const Token> context,
                          std::span<const Token> answer_digits, const ProbeConfig& cfg, Rng& rng) {
  ProbeRecord rec;
  auto [conf, entropies] = probe_confidence(policy, context, cfg, rng);
  rec.confidence = conf;
  rec.sample_entropies = std::move(entropies);
  // The forced pass does not depend on the sampled continuations; computed
  // once and replicated across the N slots.
  rec.correctness = probe_correctness(policy, context, answer_digits, cfg);
  rec.sample_correctness.assign(cfg.n_samples, rec.correctness);
  return rec;
}

ProbeRecord probe_step(const PolicyOracle& policy, const Query& query,
                       const TokenTrajectory& trajectory, int k, const ProbeConfig& cfg,
                       const Vocab& vocab, Rng& rng) {
  const TokenSeq context = build_probe_context(query, trajectory, k, vocab);
  TokenSeq answer = query.answer;
  if (!answer.empty() && answer.back() == vocab.eot) answer.pop_back();
  ProbeRecord rec = probe_context(policy, context, answer, cfg, rng);
  rec.step_index = k;
  return rec;
}

std::vector<ProbeRecord> probe_all_steps(const PolicyOracle& policy, const Query& query,
                                         const TokenTrajectory& trajectory, const ProbeConfig& cfg,
                                         const Vocab& vocab, std::uint64_t master_seed,
                                         std::uint64_t trajectory_label) {
  std::vector<ProbeRecord> records;
  records.reserve(trajectory.num_steps());
  for (int k = 1; k <= trajectory.num_steps(); ++k) {
    Rng rng(master_seed, {0x9e0beULL, trajectory_label, static_cast<std::uint64_t>(k)});
    records.push_back(probe_step(policy, query, trajectory, k, cfg, vocab, rng));
  }
  return records;
}

}  // namespace spae
