// SPDX-License-Identifier: Apache-2.0
//
// Behavioral metrics: solving/checking token counts, reflect counts, R2W
// rate, acc/len/pass at k, alignment displacement and progress-binned probe
// variance.

#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "spae/policy.hpp"
#include "spae/potential.hpp"
#include "spae/toy_env.hpp"

namespace spae {

// Token counts by inherited step phase; summary tokens count in neither.
std::pair<int, int> solve_check_split(const TokenTrajectory& trajectory,
                                      const PhaseLabels& phases);

// Number of reasoning steps containing at least one WAIT token.
int reflect_count(const TokenTrajectory& trajectory, const Vocab& vocab);

// Fraction of reward-0 trajectories flagged right-to-wrong; 0 when there are
// no incorrect trajectories.
double r2w_rate(std::span<const PotentialSeries> series, std::span<const int> rewards);

struct QueryEval {
  std::uint64_t query_id = 0;
  double acc = 0.0;
  double len = 0.0;
  int pass = 0;
};

struct EvalAtK {
  int k = 0;
  double acc_at_k = 0.0;
  double len_at_k = 0.0;
  double pass_at_k = 0.0;
  std::vector<QueryEval> per_query;
  std::vector<TokenTrajectory> trajectories;  // query-major, k per query
};

EvalAtK eval_at_k(const PolicyOracle& policy, std::span<const Query> queries, int k,
                  const DecodeConfig& decode, const Vocab& vocab, std::uint64_t stream_seed);

// k_probe - k_gt; absent without saturation or without an oracle step.
std::optional<int> alignment_displacement(const PotentialSeries& series,
                                          std::optional<int> k_gt);

struct VarianceBins {
  struct Bin {
    double var_conf = 0.0;
    double var_acc = 0.0;
    long count = 0;
  };
  // Relative-progress bins [0,.2) [.2,.4) [.4,.6) [.6,.8) [.8,1].
  std::array<Bin, 5> bins{};
};

// Within-step population variance of per-sample Conf (= exp(-mean entropy))
// and Acc across the N probe samples, averaged per progress bin. Records
// with fewer than 2 samples are skipped; K is the record count of its set.
VarianceBins variance_bins(std::span<const std::vector<ProbeRecord>> record_sets);

struct BehaviorSummary {
  double acc = 0.0;            // mean reward over all trajectories
  double solve_tokens = 0.0;   // mean over correct trajectories
  double check_tokens = 0.0;   // mean over correct trajectories
  double reflect_steps = 0.0;  // mean over correct trajectories
  double r2w = 0.0;            // rate over incorrect trajectories
  int num_correct = 0;
  int num_incorrect = 0;
};

BehaviorSummary summarize_behavior(std::span<const TokenTrajectory> trajectories,
                                   std::span<const PotentialSeries> series, const Vocab& vocab);

struct PairedDecodeStats {
  double acc = 0.0;
  double mean_len = 0.0;
  double r2w = 0.0;
};

struct TruncationComparison {
  PairedDecodeStats standard;
  PairedDecodeStats truncated;
  long pairs = 0;
  // Diagnostics for the saturating pairs: how many saturated with a correct
  // induced value, and how many of those ended wrong after truncation.
  long saturated_correct = 0;
  long saturated_correct_r2w_truncated = 0;
  long reasoning_len_violations = 0;  // truncated reasoning longer than standard's
};

// Runs `reps` seed-paired standard vs probe-truncated decodes per query.
TruncationComparison paired_truncation_eval(const PolicyOracle& policy,
                                            std::span<const Query> queries, int reps,
                                            const DecodeConfig& decode,
                                            const ProbeConfig& probe_cfg, double eps_sat,
                                            const Vocab& vocab, std::uint64_t stream_seed);

}  // namespace spae
