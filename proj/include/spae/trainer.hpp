// SPDX-License-Identifier: Apache-2.0
//
// RLVR training loop: group sampling, dynamic sampling, probing, advantage
// estimation and the clipped policy-gradient update; plus probe-truncated
// decoding.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spae/advantage.hpp"
#include "spae/policy.hpp"
#include "spae/probe.hpp"
#include "spae/toy_env.hpp"

namespace spae {

enum class Estimator { Grpo, Dapo, Rfb, Spae };

const char* estimator_name(Estimator e);
std::optional<Estimator> estimator_from_name(const std::string& name);

struct TrainConfig {
  Estimator estimator = Estimator::Spae;
  int group_size = 8;
  int batch_queries = 64;
  int mini_batch = 8;  // query groups per gradient step; rollouts are reused
  double eps_low = 0.2;
  double eps_high = 0.28;
  double learning_rate = 1e-2;
  int iterations = 100;
  std::uint64_t seed = 42;
  int max_len = 64;
  double rollout_temperature = 1.0;
  int rollout_top_k = 0;
  double rollout_top_p = 1.0;
  ProbeConfig probe;
  SpaeConfig spae;
  TaskSpec task;

  DecodeConfig rollout_decode() const {
    return {rollout_temperature, rollout_top_k, rollout_top_p, max_len};
  }
  void validate() const;
};

struct RolloutGroup {
  Query query;
  std::vector<TokenTrajectory> rollouts;  // rewards verified

  bool zero_reward_variance() const;
};

struct UpdateReport {
  int iteration = 0;
  double mean_reward = 0.0;   // over all sampled rollouts, before filtering
  double mean_length = 0.0;   // generated tokens per rollout
  double mean_entropy = 0.0;  // sampling-distribution entropy per token
  double clipped_fraction = 0.0;
  double loss = 0.0;
  int groups_kept = 0;
  bool skipped = false;  // no group survived dynamic sampling
};

// G verified rollouts per query; rollout (qi, g) draws from its own stream
// derived from stream_seed, so scheduling order is irrelevant.
std::vector<RolloutGroup> sample_groups(const PolicyOracle& policy, std::span<const Query> queries,
                                        int group_size, const DecodeConfig& decode,
                                        const Vocab& vocab, std::uint64_t stream_seed);

// Drops groups with zero reward variance (all-correct or all-wrong).
std::vector<RolloutGroup> dynamic_sampling_filter(std::vector<RolloutGroup> groups);

// min(r*A, clip(r, 1-eps_low, 1+eps_high)*A).
double clipped_surrogate_term(double ratio, double advantage, double eps_low, double eps_high);

struct SurrogateStats {
  double loss = 0.0;
  std::size_t tokens = 0;
  std::size_t clipped = 0;
};

// Evaluates the clipped surrogate over `groups` with frozen token advantages
// (trajectory i of the flattened group order reads adv.per_token[traj_offset
// + i]). When `grad` is non-empty it must span the whole logit table and
// receives d(loss)/d(logits). Aggregation is sample-mean for GRPO and
// token-mean (DAPO-style) otherwise.
SurrogateStats clipped_surrogate_batch(const TabularPolicy& policy,
                                       std::span<const RolloutGroup> groups,
                                       const AdvantageTensor& adv, std::size_t traj_offset,
                                       const TrainConfig& cfg, std::span<double> grad);

// Post-filter batch snapshot of one iteration, for offline inspection.
struct IterationTrace {
  std::vector<RolloutGroup> groups;
  std::vector<PotentialSeries> series;  // SPAE only, else empty
  AdvantageTensor adv_raw;              // pre-normalization token advantages
  AdvantageTensor adv_final;
};

// One full Algorithm-1 iteration: sample -> filter -> probe (SPAE only) ->
// advantages -> mini-batch clipped policy-gradient ascent on `policy`.
// When `trace` is given it receives the batch before the update runs.
UpdateReport train_iteration(TabularPolicy& policy, const TrainConfig& cfg, int iteration,
                             IterationTrace* trace = nullptr);

struct ProbedDecodeResult {
  TokenTrajectory trajectory;
  std::vector<ProbeRecord> records;  // one probe per completed step boundary
  PotentialSeries series;
  bool intervened = false;
  int intervention_step = 0;  // 1-based step whose boundary triggered truncation
};

// Decodes normally, probing at every step boundary; once the potential
// exceeds eps_sat, THINK_END is forced and only the summary is generated.
// Probe draws come from (probe_seed, probe_label, k) streams, never from
// main_rng, so a never-saturating decode replays the standard one exactly.
ProbedDecodeResult probe_truncated_decode(const PolicyOracle& policy, const Query& query,
                                          const DecodeConfig& decode, const ProbeConfig& probe_cfg,
                                          double eps_sat, const Vocab& vocab, Rng& main_rng,
                                          std::uint64_t probe_seed, std::uint64_t probe_label);

}  // namespace spae
