// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "spae/commands.hpp"
#include "spae/diagnostics.hpp"

using namespace spae;

namespace {

const Vocab kV = Vocab::standard();

PotentialSeries series_of(std::vector<double> phi, double eps = 0.9) {
  PotentialSeries s;
  s.phi = std::move(phi);
  s.eps_sat = eps;
  return s;
}

TokenTrajectory two_step_trajectory() {
  TokenTrajectory traj;
  // Step 1: 4 tokens; step 2: 3 tokens; summary: 2 tokens.
  traj.tokens = {1, 2, 3, kV.delim, kV.wait, 5, kV.delim, kV.think_end, kV.eot};
  traj.reasoning_end = 7;
  traj.steps = {{0, 4}, {4, 7}};
  return traj;
}

}  // namespace

TEST_CASE("solve/check token split") {
  const TokenTrajectory traj = two_step_trajectory();

  SUBCASE("labels (S, C) split (4, 3)") {
    PhaseLabels labels{{Phase::Solving, Phase::Checking}};
    const auto [solve, check] = solve_check_split(traj, labels);
    CHECK(solve == 4);
    CHECK(check == 3);
    CHECK(solve + check == traj.reasoning_end);
  }
  SUBCASE("all solving") {
    PhaseLabels labels{{Phase::Solving, Phase::Solving}};
    const auto [solve, check] = solve_check_split(traj, labels);
    CHECK(solve == 7);
    CHECK(check == 0);
  }
  SUBCASE("empty trajectory") {
    TokenTrajectory empty;
    const auto [solve, check] = solve_check_split(empty, PhaseLabels{});
    CHECK(solve == 0);
    CHECK(check == 0);
  }
  SUBCASE("solving + checking always equals reasoning tokens") {
    const PotentialSeries s = series_of({0.95, 0.2});
    const auto [solve, check] = solve_check_split(traj, classify_phases(s));
    CHECK(solve + check == traj.reasoning_end);
  }
}

TEST_CASE("reflect counts steps, not tokens") {
  TokenTrajectory traj;
  traj.tokens = {kV.wait, 1, kV.wait, kV.delim, 2, kV.delim, kV.wait, 3, kV.delim};
  traj.reasoning_end = 9;
  traj.steps = {{0, 4}, {4, 6}, {6, 9}};
  CHECK(reflect_count(traj, kV) == 2);  // WAIT twice in step 1 counts once

  TokenTrajectory no_wait;
  no_wait.tokens = {1, kV.delim};
  no_wait.reasoning_end = 2;
  no_wait.steps = {{0, 2}};
  CHECK(reflect_count(no_wait, kV) == 0);
}

TEST_CASE("r2w rate over incorrect trajectories") {
  std::vector<PotentialSeries> series;
  std::vector<int> rewards;
  // 10 incorrect, 2 of them saturated; plus 3 correct saturated.
  for (int i = 0; i < 10; ++i) {
    series.push_back(series_of({i < 2 ? 0.95 : 0.5}));
    rewards.push_back(0);
  }
  for (int i = 0; i < 3; ++i) {
    series.push_back(series_of({0.95}));
    rewards.push_back(1);
  }
  CHECK(r2w_rate(series, rewards) == doctest::Approx(0.2));

  SUBCASE("no incorrect trajectories reports 0") {
    std::vector<PotentialSeries> s = {series_of({0.99})};
    std::vector<int> r = {1};
    CHECK(r2w_rate(s, r) == 0.0);
  }
  SUBCASE("all incorrect and saturated reports 1") {
    std::vector<PotentialSeries> s = {series_of({0.95}), series_of({0.99})};
    std::vector<int> r = {0, 0};
    CHECK(r2w_rate(s, r) == 1.0);
  }
}

TEST_CASE("eval at k") {
  RunConfig cfg;
  cfg.train.seed = 5;

  SUBCASE("deterministic always-correct policy: acc = pass = 1") {
    cfg.prior.solve_acc = 1.0;
    cfg.prior.loop_prob = 0.0;
    cfg.prior.recheck_prob = 0.0;
    cfg.prior.flip_prob = 0.0;
    const TabularPolicy policy = make_prior_policy(cfg);
    const auto queries = make_queries(cfg.train.task, 5, 0xAB, 6);
    const EvalAtK r = eval_at_k(policy, queries, 4, {1.0, 0, 1.0, 48}, kV, 909);
    CHECK(r.acc_at_k == doctest::Approx(1.0));
    CHECK(r.pass_at_k == doctest::Approx(1.0));
    CHECK(r.len_at_k == doctest::Approx(6.0));  // v DELIM THINK_END ANSWER d EOT
  }
  SUBCASE("pass >= acc, and they agree at k=1") {
    cfg.prior.solve_acc = 0.7;
    cfg.prior.flip_prob = 0.15;
    const TabularPolicy policy = make_prior_policy(cfg);
    const auto queries = make_queries(cfg.train.task, 5, 0xAB, 8);
    const EvalAtK r4 = eval_at_k(policy, queries, 4, {1.0, 0, 1.0, 48}, kV, 909);
    CHECK(r4.pass_at_k >= r4.acc_at_k);
    for (const QueryEval& qe : r4.per_query) CHECK(qe.pass >= static_cast<int>(qe.acc));

    const EvalAtK r1 = eval_at_k(policy, queries, 1, {1.0, 0, 1.0, 48}, kV, 909);
    CHECK(r1.acc_at_k == doctest::Approx(r1.pass_at_k));

    // Aggregates agree with the returned trajectories.
    double total_reward = 0;
    for (const auto& t : r4.trajectories) total_reward += t.reward;
    CHECK(r4.acc_at_k == doctest::Approx(total_reward / r4.trajectories.size()));
  }
}

TEST_CASE("alignment displacement") {
  CHECK(alignment_displacement(series_of({0.1, 0.2, 0.95}), 3) == 0);
  CHECK(alignment_displacement(series_of({0.1, 0.2, 0.1, 0.2, 0.95}), 3) == 2);
  CHECK(alignment_displacement(series_of({0.95, 0.2}), 2) == -1);
  CHECK_FALSE(alignment_displacement(series_of({0.1, 0.2}), 1).has_value());
  CHECK_FALSE(alignment_displacement(series_of({0.95}), std::nullopt).has_value());
}

TEST_CASE("variance bins") {
  SUBCASE("hand case: samples {0.4, 0.6} give population variance 0.01") {
    ProbeRecord rec;
    rec.step_index = 3;
    rec.sample_entropies = {-std::log(0.4), -std::log(0.6)};
    rec.sample_correctness = {0.4, 0.6};
    std::vector<std::vector<ProbeRecord>> sets(1);
    sets[0].assign(10, ProbeRecord{});  // K = 10 records
    for (int k = 0; k < 10; ++k) {
      sets[0][k].step_index = k + 1;
      sets[0][k].sample_entropies = {0.0, 0.0};
      sets[0][k].sample_correctness = {0.5, 0.5};
    }
    sets[0][2] = rec;  // step 3 of 10 -> r = 0.3 -> bin [0.2, 0.4)
    const VarianceBins bins = variance_bins(sets);
    // Steps 2 and 3 land in [0.2, 0.4); step 2 contributes zero variance.
    CHECK(bins.bins[1].count == 2);
    CHECK(bins.bins[1].var_conf == doctest::Approx(0.005).epsilon(1e-9));
    CHECK(bins.bins[1].var_acc == doctest::Approx(0.005).epsilon(1e-9));
  }
  SUBCASE("deterministic samples give zero variance everywhere") {
    std::vector<std::vector<ProbeRecord>> sets(1);
    for (int k = 1; k <= 5; ++k) {
      ProbeRecord rec;
      rec.step_index = k;
      rec.sample_entropies = {0.2, 0.2, 0.2};
      rec.sample_correctness = {0.7, 0.7, 0.7};
      sets[0].push_back(rec);
    }
    const VarianceBins bins = variance_bins(sets);
    for (const auto& b : bins.bins) {
      CHECK(b.var_conf == doctest::Approx(0.0));
      CHECK(b.var_acc == doctest::Approx(0.0));
    }
  }
  SUBCASE("records with fewer than 2 samples are skipped") {
    std::vector<std::vector<ProbeRecord>> sets(1);
    ProbeRecord rec;
    rec.step_index = 1;
    rec.sample_entropies = {0.1};
    rec.sample_correctness = {0.5};
    sets[0].push_back(rec);
    const VarianceBins bins = variance_bins(sets);
    for (const auto& b : bins.bins) CHECK(b.count == 0);
  }
}

TEST_CASE("behavior summary") {
  std::vector<TokenTrajectory> trajs(3, two_step_trajectory());
  trajs[0].reward = 1;
  trajs[1].reward = 1;
  trajs[2].reward = 0;
  std::vector<PotentialSeries> series = {
      series_of({0.95, 0.5}),  // correct, step 2 checking
      series_of({0.5, 0.5}),   // correct, all solving
      series_of({0.95, 0.5})   // incorrect and saturated: R2W
  };
  const BehaviorSummary b = summarize_behavior(trajs, series, kV);
  CHECK(b.acc == doctest::Approx(2.0 / 3.0));
  CHECK(b.num_correct == 2);
  CHECK(b.num_incorrect == 1);
  CHECK(b.solve_tokens == doctest::Approx((4 + 7) / 2.0));
  CHECK(b.check_tokens == doctest::Approx((3 + 0) / 2.0));
  CHECK(b.reflect_steps == doctest::Approx(1.0));  // one WAIT step in each correct traj
  CHECK(b.r2w == doctest::Approx(1.0));
}

TEST_CASE("paired truncation eval on the overcheck prior") {
  RunConfig cfg;
  cfg.train.seed = 17;
  cfg.prior.loop_prob = 0.8;
  cfg.prior.recheck_prob = 0.8;
  cfg.prior.flip_prob = 0.12;
  const TabularPolicy policy = make_prior_policy(cfg);
  const auto queries = make_queries(cfg.train.task, 17, 0xCD, 8);

  const TruncationComparison cmp = paired_truncation_eval(
      policy, queries, 8, {1.0, 0, 1.0, 64}, cfg.train.probe, 0.9, kV, 31337);
  CHECK(cmp.pairs == 64);
  CHECK(cmp.truncated.mean_len < cmp.standard.mean_len);
  CHECK(cmp.truncated.acc >= cmp.standard.acc - 0.01);
  CHECK(cmp.reasoning_len_violations == 0);
  CHECK(cmp.saturated_correct > 0);
  CHECK(cmp.saturated_correct_r2w_truncated == 0);
  CHECK(cmp.truncated.r2w <= cmp.standard.r2w);
}
