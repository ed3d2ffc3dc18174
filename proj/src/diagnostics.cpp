// SPDX-License-Identifier: Apache-2.0

#include "spae/diagnostics.hpp"

#include <cmath>
#include <stdexcept>

#include "spae/kernels.hpp"
#include "spae/trainer.hpp"

namespace spae {

std::pair<int, int> solve_check_split(const TokenTrajectory& trajectory,
                                      const PhaseLabels& phases) {
  if (static_cast<int>(phases.step_phase.size()) != trajectory.num_steps())
    throw std::invalid_argument("phase labels inconsistent with trajectory steps");
  int solving = 0, checking = 0;
  for (int k = 0; k < trajectory.num_steps(); ++k) {
    const int width = trajectory.steps[k].end - trajectory.steps[k].begin;
    if (phases.step_phase[k] == Phase::Solving)
      solving += width;
    else
      checking += width;
  }
  return {solving, checking};
}

int reflect_count(const TokenTrajectory& trajectory, const Vocab& vocab) {
  int count = 0;
  for (const StepSpan& span : trajectory.steps) {
    for (int j = span.begin; j < span.end; ++j) {
      if (trajectory.tokens[j] == vocab.wait) {
        ++count;
        break;
      }
    }
  }
  return count;
}

double r2w_rate(std::span<const PotentialSeries> series, std::span<const int> rewards) {
  if (series.size() != rewards.size())
    throw std::invalid_argument("series/reward length mismatch");
  long incorrect = 0, r2w = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (rewards[i] != 0) continue;
    ++incorrect;
    if (detect_r2w(series[i], rewards[i])) ++r2w;
  }
  return incorrect == 0 ? 0.0 : static_cast<double>(r2w) / incorrect;
}

EvalAtK eval_at_k(const PolicyOracle& policy, std::span<const Query> queries, int k,
                  const DecodeConfig& decode, const Vocab& vocab, std::uint64_t stream_seed) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  EvalAtK result;
  result.k = k;
  result.per_query.reserve(queries.size());
  result.trajectories.reserve(queries.size() * k);

  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    QueryEval qe;
    qe.query_id = queries[qi].id;
    for (int rep = 0; rep < k; ++rep) {
      Rng rng(stream_seed, {qi, static_cast<std::uint64_t>(rep)});
      TokenTrajectory traj = sample_trajectory(policy, queries[qi], decode, vocab, rng);
      traj.reward = verify(traj, queries[qi], vocab).reward;
      qe.acc += traj.reward;
      qe.len += traj.length();
      qe.pass |= traj.reward;
      result.trajectories.push_back(std::move(traj));
    }
    qe.acc /= k;
    qe.len /= k;
    result.acc_at_k += qe.acc;
    result.len_at_k += qe.len;
    result.pass_at_k += qe.pass;
    result.per_query.push_back(qe);
  }
  if (!queries.empty()) {
    result.acc_at_k /= static_cast<double>(queries.size());
    result.len_at_k /= static_cast<double>(queries.size());
    result.pass_at_k /= static_cast<double>(queries.size());
  }
  return result;
}

std::optional<int> alignment_displacement(const PotentialSeries& series,
                                          std::optional<int> k_gt) {
  if (!k_gt) return std::nullopt;
  const std::optional<int> k_probe = first_saturated_step(series);
  if (!k_probe) return std::nullopt;
  return *k_probe - *k_gt;
}

namespace {

double population_variance(std::span<const double> xs) {
  const double mean = kern::reduce_sum(xs.data(), xs.size()) / xs.size();
  return kern::sum_sq_dev(xs.data(), xs.size(), mean) / xs.size();
}

}  // namespace

VarianceBins variance_bins(std::span<const std::vector<ProbeRecord>> record_sets) {
  VarianceBins out;
  std::array<double, 5> conf_sum{}, acc_sum{};
  std::array<long, 5> counts{};

  for (const auto& records : record_sets) {
    const int num_steps = static_cast<int>(records.size());
    for (const ProbeRecord& rec : records) {
      if (rec.sample_entropies.size() < 2) continue;
      const double r = static_cast<double>(rec.step_index) / num_steps;
      const int bin = std::min(4, static_cast<int>(r * 5.0));

      std::vector<double> conf(rec.sample_entropies.size());
      for (std::size_t n = 0; n < conf.size(); ++n) conf[n] = std::exp(-rec.sample_entropies[n]);
      conf_sum[bin] += population_variance(conf);
      acc_sum[bin] += population_variance(rec.sample_correctness);
      ++counts[bin];
    }
  }
  for (int b = 0; b < 5; ++b) {
    out.bins[b].count = counts[b];
    if (counts[b] > 0) {
      out.bins[b].var_conf = conf_sum[b] / counts[b];
      out.bins[b].var_acc = acc_sum[b] / counts[b];
    }
  }
  return out;
}

BehaviorSummary summarize_behavior(std::span<const TokenTrajectory> trajectories,
                                   std::span<const PotentialSeries> series, const Vocab& vocab) {
  if (trajectories.size() != series.size())
    throw std::invalid_argument("trajectory/series length mismatch");
  BehaviorSummary summary;
  long r2w_count = 0;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const TokenTrajectory& traj = trajectories[i];
    summary.acc += traj.reward;
    if (traj.reward == 1) {
      const PhaseLabels phases = classify_phases(series[i]);
      const auto [solve, check] = solve_check_split(traj, phases);
      summary.solve_tokens += solve;
      summary.check_tokens += check;
      summary.reflect_steps += reflect_count(traj, vocab);
      ++summary.num_correct;
    } else {
      if (detect_r2w(series[i], traj.reward)) ++r2w_count;
      ++summary.num_incorrect;
    }
  }
  if (!trajectories.empty()) summary.acc /= static_cast<double>(trajectories.size());
  if (summary.num_correct > 0) {
    summary.solve_tokens /= summary.num_correct;
    summary.check_tokens /= summary.num_correct;
    summary.reflect_steps /= summary.num_correct;
  }
  if (summary.num_incorrect > 0)
    summary.r2w = static_cast<double>(r2w_count) / summary.num_incorrect;
  return summary;
}

TruncationComparison paired_truncation_eval(const PolicyOracle& policy,
                                            std::span<const Query> queries, int reps,
                                            const DecodeConfig& decode,
                                            const ProbeConfig& probe_cfg, double eps_sat,
                                            const Vocab& vocab, std::uint64_t stream_seed) {
  if (reps < 1) throw std::invalid_argument("reps must be >= 1");
  TruncationComparison cmp;
  const std::uint64_t probe_master = stream_seed ^ 0x70b5ULL;

  long std_r2w = 0, std_incorrect = 0, trunc_r2w = 0, trunc_incorrect = 0;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const Query& query = queries[qi];
    const Token target_digit = solve_reference(query, vocab).front();

    for (int rep = 0; rep < reps; ++rep) {
      const std::uint64_t probe_label =
          spae::stream_seed(stream_seed, {qi, static_cast<std::uint64_t>(rep)});

      // Standard arm.
      Rng std_rng(stream_seed, {qi, static_cast<std::uint64_t>(rep)});
      TokenTrajectory std_traj = sample_trajectory(policy, query, decode, vocab, std_rng);
      std_traj.reward = verify(std_traj, query, vocab).reward;
      const std::vector<ProbeRecord> std_records =
          probe_all_steps(policy, query, std_traj, probe_cfg, vocab, probe_master, probe_label);
      const PotentialSeries std_series = make_potential_series(std_records, eps_sat);

      // Truncated arm, replaying the same main stream.
      Rng trunc_rng(stream_seed, {qi, static_cast<std::uint64_t>(rep)});
      ProbedDecodeResult trunc = probe_truncated_decode(policy, query, decode, probe_cfg, eps_sat,
                                                        vocab, trunc_rng, probe_master, probe_label);
      trunc.trajectory.reward = verify(trunc.trajectory, query, vocab).reward;

      cmp.standard.acc += std_traj.reward;
      cmp.standard.mean_len += std_traj.length();
      cmp.truncated.acc += trunc.trajectory.reward;
      cmp.truncated.mean_len += trunc.trajectory.length();
      ++cmp.pairs;

      if (std_traj.reward == 0) {
        ++std_incorrect;
        if (detect_r2w(std_series, 0)) ++std_r2w;
      }
      if (trunc.trajectory.reward == 0) {
        ++trunc_incorrect;
        if (detect_r2w(trunc.series, 0)) ++trunc_r2w;
      }

      if (trunc.intervened) {
        // Concluding digit of the saturating step.
        const StepSpan span = trunc.trajectory.steps[trunc.intervention_step - 1];
        Token claimed = -1;
        for (int j = span.begin; j < span.end; ++j)
          if (vocab.is_digit(trunc.trajectory.tokens[j])) claimed = trunc.trajectory.tokens[j];
        if (claimed == target_digit) {
          ++cmp.saturated_correct;
          if (trunc.trajectory.reward == 0) ++cmp.saturated_correct_r2w_truncated;
        }
      }
      if (trunc.trajectory.reasoning_end > std_traj.reasoning_end)
        ++cmp.reasoning_len_violations;
    }
  }

  if (cmp.pairs > 0) {
    cmp.standard.acc /= cmp.pairs;
    cmp.standard.mean_len /= cmp.pairs;
    cmp.truncated.acc /= cmp.pairs;
    cmp.truncated.mean_len /= cmp.pairs;
  }
  cmp.standard.r2w = std_incorrect == 0 ? 0.0 : static_cast<double>(std_r2w) / std_incorrect;
  cmp.truncated.r2w = trunc_incorrect == 0 ? 0.0 : static_cast<double>(trunc_r2w) / trunc_incorrect;
  return cmp;
}

}  // namespace spae
