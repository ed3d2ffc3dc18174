// SPDX-License-Identifier: Apache-2.0

#include "spae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spae/kernels.hpp"

namespace spae {

const char* estimator_name(Estimator e) {
  switch (e) {
    case Estimator::Grpo:
      return "GRPO";
    case Estimator::Dapo:
      return "DAPO";
    case Estimator::Rfb:
      return "RFB";
    case Estimator::Spae:
      return "SPAE";
  }
  return "?";
}

std::optional<Estimator> estimator_from_name(const std::string& name) {
  if (name == "GRPO" || name == "grpo") return Estimator::Grpo;
  if (name == "DAPO" || name == "dapo") return Estimator::Dapo;
  if (name == "RFB" || name == "rfb") return Estimator::Rfb;
  if (name == "SPAE" || name == "spae") return Estimator::Spae;
  return std::nullopt;
}

void TrainConfig::validate() const {
  task.validate();
  probe.validate();
  spae.validate();
  if (group_size < 2) throw std::invalid_argument("group_size must be >= 2");
  if (batch_queries < 1) throw std::invalid_argument("batch_queries must be >= 1");
  if (mini_batch < 1) throw std::invalid_argument("mini_batch must be >= 1");
  if (!(eps_low > 0.0) || !(eps_high > 0.0))
    throw std::invalid_argument("clip bounds must be > 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
}

bool RolloutGroup::zero_reward_variance() const {
  if (rollouts.empty()) return true;
  const int first = rollouts.front().reward;
  for (const auto& r : rollouts)
    if (r.reward != first) return false;
  return true;
}

std::vector<RolloutGroup> sample_groups(const PolicyOracle& policy, std::span<const Query> queries,
                                        int group_size, const DecodeConfig& decode,
                                        const Vocab& vocab, std::uint64_t stream_seed) {
  if (group_size < 1) throw std::invalid_argument("group_size must be >= 1");
  std::vector<RolloutGroup> groups;
  groups.reserve(queries.size());
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    RolloutGroup group;
    group.query = queries[qi];
    group.rollouts.reserve(group_size);
    for (int g = 0; g < group_size; ++g) {
      Rng rng(stream_seed, {qi, static_cast<std::uint64_t>(g)});
      TokenTrajectory traj = sample_trajectory(policy, group.query, decode, vocab, rng);
      traj.reward = verify(traj, group.query, vocab).reward;
      group.rollouts.push_back(std::move(traj));
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

std::vector<RolloutGroup> dynamic_sampling_filter(std::vector<RolloutGroup> groups) {
  std::vector<RolloutGroup> kept;
  kept.reserve(groups.size());
  for (auto& g : groups)
    if (!g.zero_reward_variance()) kept.push_back(std::move(g));
  return kept;
}

double clipped_surrogate_term(double ratio, double advantage, double eps_low, double eps_high) {
  const double clipped = std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high);
  return std::min(ratio * advantage, clipped * advantage);
}

namespace {

// Gradient buffer over the full logit table with touched-row tracking, so a
// mini-batch touching a few hundred rows never pays for the whole table.
class GradBuffer {
 public:
  GradBuffer(int rows, int vocab)
      : vocab_(vocab), grad_(std::size_t(rows) * vocab, 0.0), touched_flag_(rows, 0) {}

  std::span<double> row(std::uint32_t r) {
    if (!touched_flag_[r]) {
      touched_flag_[r] = 1;
      touched_.push_back(r);
    }
    return {grad_.data() + std::size_t(r) * vocab_, static_cast<std::size_t>(vocab_)};
  }

  void apply_and_reset(TabularPolicy& policy, double lr) {
    for (std::uint32_t r : touched_) {
      auto g = std::span<double>(grad_.data() + std::size_t(r) * vocab_,
                                 static_cast<std::size_t>(vocab_));
      kern::add_scaled(policy.row(r).data(), g.data(), g.size(), lr);
      std::fill(g.begin(), g.end(), 0.0);
      touched_flag_[r] = 0;
    }
    touched_.clear();
  }

 private:
  int vocab_;
  std::vector<double> grad_;
  std::vector<char> touched_flag_;
  std::vector<std::uint32_t> touched_;
};

struct EntropyStats {
  double token_entropy_sum = 0.0;
  std::size_t tokens = 0;
};

// Shared surrogate evaluation; GradRowFn(row) -> span<double> receives
// accumulated gradients when with_grad is set.
template <typename GradRowFn>
SurrogateStats surrogate_impl(const TabularPolicy& policy, std::span<const RolloutGroup> groups,
                              const AdvantageTensor& adv, std::size_t traj_offset,
                              const TrainConfig& cfg, bool with_grad, GradRowFn grad_row) {
  const DecodeConfig decode = cfg.rollout_decode();
  const bool sample_mean = cfg.estimator == Estimator::Grpo;
  const double inv_temp = 1.0 / decode.temperature;

  SurrogateStats stats;
  std::size_t batch_tokens = 0;
  std::size_t batch_trajs = 0;
  for (const auto& g : groups) {
    for (const auto& r : g.rollouts) {
      batch_tokens += r.length();
      ++batch_trajs;
    }
  }
  if (batch_tokens == 0) return stats;

  std::size_t ti = traj_offset;
  for (const auto& group : groups) {
    for (const auto& traj : group.rollouts) {
      if (ti >= adv.per_token.size() ||
          adv.per_token[ti].size() != static_cast<std::size_t>(traj.length()))
        throw std::invalid_argument("advantage tensor inconsistent with rollouts");
      const double traj_weight = sample_mean
                                     ? 1.0 / (static_cast<double>(batch_trajs) * traj.length())
                                     : 1.0 / static_cast<double>(batch_tokens);
      TokenSeq ctx = group.query.prompt;
      for (int j = 0; j < traj.length(); ++j) {
        const Token tok = traj.tokens[j];
        std::vector<double> dist = policy.next_token_distribution(ctx);
        filter_distribution(dist, decode);
        const double lp_new = std::log(dist[tok]);
        const double ratio = std::exp(lp_new - traj.logprobs[j]);
        const double a = adv.per_token[ti][j];

        const double unclipped = ratio * a;
        const double clipped = std::clamp(ratio, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high) * a;
        stats.loss += std::min(unclipped, clipped) * traj_weight;
        ++stats.tokens;

        if (unclipped <= clipped) {
          if (with_grad) {
            // Unclipped branch active: d/dlogits = A * r * (onehot - q) / T.
            const double coef = a * ratio * traj_weight * inv_temp;
            auto g = grad_row(policy.row_of(ctx));
            kern::add_scaled(g.data(), dist.data(), g.size(), -coef);
            g[tok] += coef;
          }
        } else {
          ++stats.clipped;
        }
        ctx.push_back(tok);
      }
      ++ti;
    }
  }
  return stats;
}

// Sampling-distribution entropy of every generated token, replayed under the
// rollout decode settings.
EntropyStats replay_entropy(const TabularPolicy& policy, const Query& query,
                            const TokenTrajectory& traj, const DecodeConfig& decode) {
  EntropyStats stats;
  TokenSeq ctx = query.prompt;
  for (Token t : traj.tokens) {
    std::vector<double> dist = policy.next_token_distribution(ctx);
    filter_distribution(dist, decode);
    stats.token_entropy_sum += token_entropy(dist);
    ++stats.tokens;
    ctx.push_back(t);
  }
  return stats;
}

}  // namespace

UpdateReport train_iteration(TabularPolicy& policy, const TrainConfig& cfg, int iteration,
                             IterationTrace* trace) {
  cfg.validate();
  const Vocab& vocab = cfg.task.vocab;
  const DecodeConfig decode = cfg.rollout_decode();
  const auto iter_label = static_cast<std::uint64_t>(iteration);

  UpdateReport report;
  report.iteration = iteration;

  // 1. Group sampling over a fresh batch of queries.
  std::vector<Query> queries;
  queries.reserve(cfg.batch_queries);
  for (int qi = 0; qi < cfg.batch_queries; ++qi)
    queries.push_back(generate_query(
        stream_seed(cfg.seed, {1, iter_label, static_cast<std::uint64_t>(qi)}), cfg.task));
  std::vector<RolloutGroup> groups = sample_groups(policy, queries, cfg.group_size, decode, vocab,
                                                   stream_seed(cfg.seed, {2, iter_label}));

  std::size_t total_tokens = 0;
  std::size_t total_rollouts = 0;
  double entropy_sum = 0.0;
  std::size_t entropy_tokens = 0;
  for (const auto& g : groups) {
    for (const auto& r : g.rollouts) {
      report.mean_reward += r.reward;
      report.mean_length += r.length();
      const EntropyStats es = replay_entropy(policy, g.query, r, decode);
      entropy_sum += es.token_entropy_sum;
      entropy_tokens += es.tokens;
      total_tokens += r.length();
      ++total_rollouts;
    }
  }
  if (total_rollouts > 0) {
    report.mean_reward /= total_rollouts;
    report.mean_length /= total_rollouts;
  }
  if (entropy_tokens > 0) report.mean_entropy = entropy_sum / entropy_tokens;

  // 2. Dynamic sampling.
  groups = dynamic_sampling_filter(std::move(groups));
  report.groups_kept = static_cast<int>(groups.size());
  if (groups.empty()) {
    report.skipped = true;
    return report;
  }

  // 3. Probing and step potentials (SPAE only). Probe draws use their own
  // streams keyed by (query id, rollout), so the other estimators see
  // identical rollouts under a shared seed.
  const std::size_t n_traj = [&] {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.rollouts.size();
    return n;
  }();

  std::vector<StepIndexMap> maps;
  maps.reserve(n_traj);
  std::vector<double> group_advs;
  group_advs.reserve(n_traj);
  std::vector<PotentialSeries> series;

  for (const auto& g : groups) {
    std::vector<double> rewards;
    rewards.reserve(g.rollouts.size());
    for (const auto& r : g.rollouts) rewards.push_back(r.reward);
    const std::vector<double> adv =
        (cfg.estimator == Estimator::Grpo || cfg.estimator == Estimator::Dapo)
            ? grpo_advantage(rewards)
            : group_advantage(rewards);
    for (std::size_t ri = 0; ri < g.rollouts.size(); ++ri) {
      maps.push_back(map_token_to_step(g.rollouts[ri]));
      group_advs.push_back(adv[ri]);
    }
  }

  if (cfg.estimator == Estimator::Spae) {
    series.reserve(n_traj);
    const std::uint64_t probe_master = stream_seed(cfg.seed, {3, iter_label});
    for (const auto& g : groups) {
      for (std::size_t ri = 0; ri < g.rollouts.size(); ++ri) {
        const std::vector<ProbeRecord> records =
            probe_all_steps(policy, g.query, g.rollouts[ri], cfg.probe, vocab, probe_master,
                            stream_seed(g.query.id, {ri}));
        series.push_back(make_potential_series(records, cfg.spae.eps_sat));
      }
    }
  }

  // 4. Token advantages.
  AdvantageTensor raw;
  AdvantageTensor adv;
  switch (cfg.estimator) {
    case Estimator::Grpo:
    case Estimator::Dapo: {
      raw.stage = AdvantageTensor::Stage::Final;
      raw.per_token.resize(n_traj);
      for (std::size_t i = 0; i < n_traj; ++i)
        raw.per_token[i].assign(maps[i].token_to_step.size(), group_advs[i]);
      adv = raw;
      break;
    }
    case Estimator::Rfb: {
      raw.per_token.resize(n_traj);
      for (std::size_t i = 0; i < n_traj; ++i)
        raw.per_token[i].assign(maps[i].token_to_step.size(), group_advs[i]);
      adv = batch_normalize(raw, cfg.spae.eps_norm);
      break;
    }
    case Estimator::Spae:
      raw = spae_token_advantages(group_advs, series, maps, cfg.spae);
      adv = batch_normalize(raw, cfg.spae.eps_norm);
      break;
  }

  if (trace) {
    trace->groups = groups;
    trace->series = series;
    trace->adv_raw = raw;
    trace->adv_final = adv;
  }

  // 5. Mini-batch clipped policy-gradient ascent, reusing the stored rollouts.
  GradBuffer grad(policy.table_rows(), policy.vocab_size());

  std::size_t clipped_tokens = 0;
  std::size_t processed_tokens = 0;
  double loss_sum = 0.0;
  int n_chunks = 0;

  std::size_t traj_cursor = 0;
  for (std::size_t chunk_begin = 0; chunk_begin < groups.size();
       chunk_begin += cfg.mini_batch, ++n_chunks) {
    const std::size_t chunk_end = std::min(groups.size(), chunk_begin + cfg.mini_batch);
    const std::span<const RolloutGroup> chunk(groups.data() + chunk_begin,
                                              chunk_end - chunk_begin);
    const SurrogateStats stats =
        surrogate_impl(policy, chunk, adv, traj_cursor, cfg, /*with_grad=*/true,
                       [&](std::uint32_t r) { return grad.row(r); });
    for (const auto& g : chunk) traj_cursor += g.rollouts.size();
    loss_sum += stats.loss;
    clipped_tokens += stats.clipped;
    processed_tokens += stats.tokens;
    grad.apply_and_reset(policy, cfg.learning_rate);
  }

  report.loss = n_chunks > 0 ? loss_sum / n_chunks : 0.0;
  report.clipped_fraction =
      processed_tokens > 0 ? static_cast<double>(clipped_tokens) / processed_tokens : 0.0;
  return report;
}

SurrogateStats clipped_surrogate_batch(const TabularPolicy& policy,
                                       std::span<const RolloutGroup> groups,
                                       const AdvantageTensor& adv, std::size_t traj_offset,
                                       const TrainConfig& cfg, std::span<double> grad) {
  if (!grad.empty() &&
      grad.size() != std::size_t(policy.table_rows()) * policy.vocab_size())
    throw std::invalid_argument("gradient span must cover the whole logit table");
  const std::size_t vocab = policy.vocab_size();
  return surrogate_impl(policy, groups, adv, traj_offset, cfg, !grad.empty(),
                        [&](std::uint32_t r) {
                          return std::span<double>(grad.data() + std::size_t(r) * vocab, vocab);
                        });
}

ProbedDecodeResult probe_truncated_decode(const PolicyOracle& policy, const Query& query,
                                          const DecodeConfig& decode, const ProbeConfig& probe_cfg,
                                          double eps_sat, const Vocab& vocab, Rng& main_rng,
                                          std::uint64_t probe_seed, std::uint64_t probe_label) {
  if (decode.max_len <= 0) throw std::invalid_argument("max_len must be > 0");

  ProbedDecodeResult result;
  TokenTrajectory& traj = result.trajectory;
  traj.query_id = query.id;
  result.series.eps_sat = eps_sat;

  TokenSeq answer_digits = query.answer;
  if (!answer_digits.empty() && answer_digits.back() == vocab.eot) answer_digits.pop_back();

  TokenSeq ctx = query.prompt;
  bool in_reasoning = true;
  int completed_steps = 0;

  while (traj.length() < decode.max_len) {
    const SampledToken s = sample_token(policy, ctx, decode, main_rng);
    traj.tokens.push_back(s.token);
    traj.logprobs.push_back(s.logprob);
    ctx.push_back(s.token);

    if (s.token == vocab.eot) break;
    if (in_reasoning && s.token == vocab.think_end) {
      in_reasoning = false;
      continue;
    }
    if (!in_reasoning || s.token != vocab.delim) continue;

    // Step boundary: probe the prefix, same streams as probe_all_steps.
    ++completed_steps;
    TokenSeq probe_ctx = ctx;
    probe_ctx.push_back(vocab.answer);
    Rng probe_rng(probe_seed, {0x9e0beULL, probe_label, static_cast<std::uint64_t>(completed_steps)});
    ProbeRecord rec = probe_context(policy, probe_ctx, answer_digits, probe_cfg, probe_rng);
    rec.step_index = completed_steps;
    result.series.phi.push_back(step_potential(rec.correctness, rec.confidence));
    result.records.push_back(std::move(rec));

    if (result.series.phi.back() > eps_sat && traj.length() < decode.max_len) {
      // Saturated: close the reasoning block and let only the summary follow.
      std::vector<double> dist = policy.next_token_distribution(ctx);
      filter_distribution(dist, decode);
      traj.tokens.push_back(vocab.think_end);
      traj.logprobs.push_back(std::log(dist[vocab.think_end]));
      ctx.push_back(vocab.think_end);
      in_reasoning = false;
      result.intervened = true;
      result.intervention_step = completed_steps;
    }
  }

  traj.truncated = traj.tokens.empty() || traj.tokens.back() != vocab.eot;
  traj.reasoning_end = traj.length();
  for (int i = 0; i < traj.length(); ++i) {
    if (traj.tokens[i] == vocab.think_end) {
      traj.reasoning_end = i;
      break;
    }
  }
  traj.steps = segment_steps(traj.tokens, traj.reasoning_end, vocab.delim);
  return result;
}

}  // namespace spae
