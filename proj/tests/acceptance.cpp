// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one pass/fail line per criterion. Exit code is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "spae/commands.hpp"

using namespace spae;

namespace {

namespace fs = std::filesystem;

struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

const Vocab kVocab = Vocab::standard();

// Shared experiment configuration for the directional criteria (5/6) and the
// truncation test (7): the over-checking prior on the modular-chain task.
RunConfig experiment_config(Estimator estimator, std::uint64_t seed) {
  RunConfig cfg;
  cfg.train.estimator = estimator;
  cfg.train.seed = seed;
  cfg.train.group_size = 8;
  cfg.train.batch_queries = 16;
  cfg.train.mini_batch = 4;
  cfg.train.learning_rate = 1.0;
  cfg.train.iterations = 350;
  cfg.train.max_len = 64;
  cfg.prior.solve_acc = 0.75;
  cfg.prior.loop_prob = 0.8;
  cfg.prior.recheck_prob = 0.8;
  cfg.prior.flip_prob = 0.03;
  cfg.eval_queries = 160;
  cfg.eval_k = 16;
  cfg.eval_temperature = 1.0;  // measure the trained behavior distribution
  cfg.eval_top_k = 0;
  cfg.eval_top_p = 1.0;
  return cfg;
}

// ---------------------------------------------------------------------------
// 1. Formula golden values.
Check criterion_1() {
  Check c;
  c.expect(std::abs(step_potential(1.0, 1.0) - 1.0) < 1e-12, "phi(1,1) != 1");
  c.expect(std::abs(step_potential(0.0, 1.0) + 1.0) < 1e-12, "phi(0,1) != -1");
  c.expect(std::abs(step_potential(0.5, 0.5) - 0.125) < 1e-12, "phi(.5,.5) != 0.125");
  c.expect(std::abs(saturation_penalty_factor(1, 0.5) - 0.683940) < 1e-6,
           "f(1;0.5) != 0.683940");

  const std::vector<double> g = shaping_signal(std::vector<double>{-0.5, 0.0, 0.5});
  c.expect(std::abs(g[0] + 0.789001) < 1e-6, "g(-0.5) != -0.789001");
  c.expect(std::abs(g[1] + 0.140280) < 1e-6, "g(0) != -0.140280");
  c.expect(std::abs(g[2] - 0.929281) < 1e-6, "g(+0.5) != 0.929281");

  // Uniform policy over V=10: probe confidence and correctness are 1/V.
  TabularPolicy uniform(1, 16, 10, 1.0);
  ProbeConfig probe;
  probe.stop_token = 13;  // outside the vocab: continuations run to the cap
  const TokenSeq ctx = {0, 1, 2};
  Rng rng(123, {1});
  const auto [conf, ents] = probe_confidence(uniform, ctx, probe, rng);
  c.expect(std::abs(conf - 0.1) < 1e-9, "uniform Conf != 0.1 (" + fmt(conf) + ")");
  const double acc = probe_correctness(uniform, ctx, TokenSeq{7}, probe);
  c.expect(std::abs(acc - 0.1) < 1e-9, "uniform Acc != 0.1 (" + fmt(acc) + ")");
  return c;
}

// ---------------------------------------------------------------------------
// 2. Invariant suite, 10k randomized cases per invariant.
Check criterion_2() {
  Check c;
  std::mt19937_64 rng(20240801);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> wide(-1.0, 1.0);

  // Phi range.
  for (int i = 0; i < 10000; ++i) {
    const double phi = step_potential(unit(rng), unit(rng));
    if (!(phi >= -1.0 && phi <= 1.0)) {
      c.expect(false, "phi out of [-1,1]");
      break;
    }
  }

  // Conf/Acc bounds over 10k probe records against random policies.
  {
    TabularPolicy policy(3, 4096, kVocab.size, 1.0);
    ProbeConfig probe;
    probe.n_samples = 2;
    probe.max_continuation_tokens = 2;
    int bad = 0;
    for (int i = 0; i < 10000; ++i) {
      if (i % 500 == 0)
        for (auto& l : policy.all_logits()) l = 4.0 * wide(rng);
      TokenSeq ctx(1 + (rng() % 5));
      for (auto& t : ctx) t = static_cast<Token>(rng() % kVocab.size);
      Rng prng(9000, {static_cast<std::uint64_t>(i)});
      const auto [conf, ents] = probe_confidence(policy, ctx, probe, prng);
      const double acc =
          probe_correctness(policy, ctx, TokenSeq{static_cast<Token>(rng() % 10)}, probe);
      if (!(conf >= 0.0 && conf <= 1.0 + 1e-12 && acc >= 0.0 && acc <= 1.0 + 1e-12)) ++bad;
    }
    c.expect(bad == 0, "conf/acc out of [0,1] in " + std::to_string(bad) + " cases");
  }

  // Shaping population mean.
  {
    long cases = 0;
    while (cases < 10000) {
      std::vector<double> deltas(2 + rng() % 30);
      for (auto& d : deltas) d = 2.0 * wide(rng);
      const auto g = shaping_signal(deltas);
      double mean = 0;
      for (double x : g) mean += x;
      mean /= g.size();
      if (std::abs(mean) > 1e-9) {
        c.expect(false, "shaping mean " + fmt(mean));
        break;
      }
      cases += static_cast<long>(deltas.size());
    }
  }

  // FINAL advantage normalization over random raw batches.
  {
    long tokens_checked = 0;
    while (tokens_checked < 10000) {
      AdvantageTensor raw;
      const int n = 2 + static_cast<int>(rng() % 6);
      std::size_t total = 0;
      for (int i = 0; i < n; ++i) {
        std::vector<double> v(1 + rng() % 12);
        for (auto& x : v) x = 3.0 * wide(rng);
        total += v.size();
        raw.per_token.push_back(std::move(v));
      }
      if (total < 2) continue;
      const AdvantageTensor out = batch_normalize(raw, 1e-8);
      double mean = 0;
      for (const auto& v : out.per_token)
        for (double x : v) mean += x;
      mean /= total;
      double var = 0;
      for (const auto& v : out.per_token)
        for (double x : v) var += (x - mean) * (x - mean);
      var /= total;
      if (std::abs(mean) > 1e-6 || std::abs(std::sqrt(var) - 1.0) > 1e-6) {
        c.expect(false, "final advantages mean " + fmt(mean) + " std " + fmt(std::sqrt(var)));
        break;
      }
      tokens_checked += static_cast<long>(total);
    }
  }

  // Absorbing checking labels, and saturation-count consistency.
  for (int i = 0; i < 10000; ++i) {
    PotentialSeries s;
    s.phi.resize(1 + rng() % 10);
    for (auto& x : s.phi) x = wide(rng);
    const PhaseLabels labels = classify_phases(s);
    bool checking = false;
    for (std::size_t k = 0; k < labels.step_phase.size(); ++k) {
      const bool is_checking = labels.step_phase[k] == Phase::Checking;
      if (checking && !is_checking) {
        c.expect(false, "checking not absorbing");
        break;
      }
      if (is_checking != (saturation_count(s, static_cast<int>(k) + 1) >= 1)) {
        c.expect(false, "phase/saturation mismatch");
        break;
      }
      checking = checking || is_checking;
    }
    if (!c.ok) break;
  }

  // Solving + checking tokens tile the reasoning region, on real rollouts.
  {
    RunConfig cfg = experiment_config(Estimator::Spae, 7);
    const TabularPolicy policy = make_prior_policy(cfg);
    long done = 0;
    std::uint64_t qi = 0;
    while (done < 10000) {
      const Query q = generate_query(stream_seed(31, {qi}), cfg.train.task);
      Rng drng(32, {qi});
      const TokenTrajectory traj =
          sample_trajectory(policy, q, cfg.train.rollout_decode(), kVocab, drng);
      PotentialSeries s;
      s.phi.resize(traj.num_steps());
      for (auto& x : s.phi) x = wide(rng);
      const auto [solve, check] = solve_check_split(traj, classify_phases(s));
      if (solve + check != traj.reasoning_end) {
        c.expect(false, "solve+check != reasoning tokens");
        break;
      }
      done += traj.length();
      ++qi;
    }
  }

  // pass@k >= acc@k on randomized policies.
  {
    RunConfig cfg = experiment_config(Estimator::Spae, 8);
    long queries_checked = 0;
    std::uint64_t round = 0;
    while (queries_checked < 10000) {
      RunConfig variant = cfg;
      variant.prior.solve_acc = 0.3 + 0.6 * unit(rng);
      variant.prior.flip_prob = 0.3 * unit(rng);
      const TabularPolicy policy = make_prior_policy(variant);
      const auto queries = make_queries(cfg.train.task, 100 + round, 0xACC, 25);
      const EvalAtK r =
          eval_at_k(policy, queries, 4, cfg.train.rollout_decode(), kVocab, 200 + round);
      if (r.pass_at_k < r.acc_at_k - 1e-12) {
        c.expect(false, "pass@k < acc@k");
        break;
      }
      for (const QueryEval& qe : r.per_query)
        if (qe.pass < qe.acc - 1e-12) c.expect(false, "per-query pass < acc");
      queries_checked += static_cast<long>(queries.size());
      ++round;
      if (!c.ok) break;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// 3. Reduction identity: SPAE(0,0) vs RF-B, bitwise, >= 50 iterations.
Check criterion_3() {
  Check c;
  const fs::path base = fs::temp_directory_path() / "spae_accept_c3";
  fs::remove_all(base);

  RunConfig rfb = experiment_config(Estimator::Rfb, 1234);
  rfb.train.iterations = 55;
  rfb.out_dir = (base / "rfb").string();
  RunConfig spae00 = experiment_config(Estimator::Spae, 1234);
  spae00.train.iterations = 55;
  spae00.train.spae.xi = 0.0;
  spae00.train.spae.alpha = 0.0;
  spae00.out_dir = (base / "spae00").string();

  cmd_train(rfb);
  cmd_train(spae00);

  const std::string curves_rfb = slurp(rfb.out_dir + "/curves.csv");
  const std::string curves_spae = slurp(spae00.out_dir + "/curves.csv");
  c.expect(!curves_rfb.empty() && curves_rfb == curves_spae, "training curves differ");

  const TabularPolicy p_rfb = TabularPolicy::load(rfb.out_dir + "/checkpoint_final.bin");
  const TabularPolicy p_spae = TabularPolicy::load(spae00.out_dir + "/checkpoint_final.bin");
  const auto lr = p_rfb.all_logits();
  const auto ls = p_spae.all_logits();
  c.expect(lr.size() == ls.size() &&
               std::memcmp(lr.data(), ls.data(), lr.size() * sizeof(double)) == 0,
           "trained parameters differ");

  // Bitwise-identical FINAL advantages on a freshly sampled batch.
  {
    const TabularPolicy policy = make_prior_policy(rfb);
    const auto queries = make_queries(rfb.train.task, 55, 0xC3, 16);
    const auto groups = dynamic_sampling_filter(
        sample_groups(policy, queries, 8, rfb.train.rollout_decode(), kVocab, 77));
    std::vector<double> advs;
    std::vector<StepIndexMap> maps;
    std::vector<PotentialSeries> series;
    for (const auto& g : groups) {
      std::vector<double> rewards;
      for (const auto& r : g.rollouts) rewards.push_back(r.reward);
      const auto ga = group_advantage(rewards);
      for (std::size_t ri = 0; ri < g.rollouts.size(); ++ri) {
        advs.push_back(ga[ri]);
        maps.push_back(map_token_to_step(g.rollouts[ri]));
        const auto records = probe_all_steps(policy, g.query, g.rollouts[ri], rfb.train.probe,
                                             kVocab, 88, stream_seed(g.query.id, {ri}));
        series.push_back(make_potential_series(records, 0.9));
      }
    }
    SpaeConfig zero;
    zero.xi = 0.0;
    zero.alpha = 0.0;
    const AdvantageTensor via_spae =
        batch_normalize(spae_token_advantages(advs, series, maps, zero), zero.eps_norm);
    const AdvantageTensor via_rfb = rfb_advantages(advs, maps, zero.eps_norm);
    bool equal = via_spae.per_token.size() == via_rfb.per_token.size();
    for (std::size_t i = 0; equal && i < via_spae.per_token.size(); ++i)
      equal = via_spae.per_token[i].size() == via_rfb.per_token[i].size() &&
              std::memcmp(via_spae.per_token[i].data(), via_rfb.per_token[i].data(),
                          via_rfb.per_token[i].size() * sizeof(double)) == 0;
    c.expect(equal, "FINAL advantages not bitwise-identical");
  }

  fs::remove_all(base);
  return c;
}

// ---------------------------------------------------------------------------
// 4. Gradient oracle: analytic surrogate gradients vs central differences.
Check criterion_4() {
  Check c;
  for (const Estimator estimator : {Estimator::Grpo, Estimator::Rfb, Estimator::Spae}) {
    RunConfig cfg = experiment_config(estimator, 4000);
    cfg.train.batch_queries = 6;

    for (int batch = 0; batch < 3; ++batch) {
      const TabularPolicy base = make_prior_policy(cfg);
      const auto queries = make_queries(cfg.train.task, 4100 + batch, 0xC4, 6);
      const auto groups = dynamic_sampling_filter(sample_groups(
          base, queries, cfg.train.group_size, cfg.train.rollout_decode(), kVocab, 4200 + batch));
      if (groups.empty()) {
        c.expect(false, "empty frozen batch");
        continue;
      }

      std::vector<double> advs;
      std::vector<StepIndexMap> maps;
      std::vector<PotentialSeries> series;
      for (const auto& g : groups) {
        std::vector<double> rewards;
        for (const auto& r : g.rollouts) rewards.push_back(r.reward);
        const auto ga =
            estimator == Estimator::Grpo ? grpo_advantage(rewards) : group_advantage(rewards);
        for (std::size_t ri = 0; ri < g.rollouts.size(); ++ri) {
          advs.push_back(ga[ri]);
          maps.push_back(map_token_to_step(g.rollouts[ri]));
          if (estimator == Estimator::Spae) {
            const auto records =
                probe_all_steps(base, g.query, g.rollouts[ri], cfg.train.probe, kVocab,
                                4300 + batch, stream_seed(g.query.id, {ri}));
            series.push_back(make_potential_series(records, cfg.train.spae.eps_sat));
          }
        }
      }
      AdvantageTensor adv;
      if (estimator == Estimator::Spae)
        adv = batch_normalize(spae_token_advantages(advs, series, maps, cfg.train.spae),
                              cfg.train.spae.eps_norm);
      else if (estimator == Estimator::Rfb)
        adv = rfb_advantages(advs, maps, cfg.train.spae.eps_norm);
      else {
        adv.per_token.resize(maps.size());
        for (std::size_t i = 0; i < maps.size(); ++i)
          adv.per_token[i].assign(maps[i].token_to_step.size(), advs[i]);
      }

      // Evaluate at a slightly perturbed policy so ratios are non-trivial.
      TabularPolicy theta = base;
      std::mt19937_64 noise(500 + batch);
      for (auto& l : theta.all_logits())
        if (l > -500.0) l += std::uniform_real_distribution<double>(-0.04, 0.04)(noise);

      std::vector<double> grad(std::size_t(theta.table_rows()) * theta.vocab_size(), 0.0);
      (void)clipped_surrogate_batch(theta, groups, adv, 0, cfg.train, grad);
      double grad_max = 0.0;
      for (double g : grad) grad_max = std::max(grad_max, std::abs(g));

      // Coordinates carrying at least 1% of the peak gradient; below that the
      // centered difference of a ~2000-term loss sum is dominated by rounding.
      std::mt19937_64 pick(600 + batch);
      int checked = 0;
      double worst = 0.0;
      const double h = 1e-4;
      for (std::size_t attempt = 0; attempt < 10 * grad.size() && checked < 20; ++attempt) {
        const std::size_t idx = pick() % grad.size();
        if (std::abs(grad[idx]) < 0.01 * grad_max) continue;
        auto logits = theta.all_logits();
        const double saved = logits[idx];
        logits[idx] = saved + h;
        const double up = clipped_surrogate_batch(theta, groups, adv, 0, cfg.train, {}).loss;
        logits[idx] = saved - h;
        const double down = clipped_surrogate_batch(theta, groups, adv, 0, cfg.train, {}).loss;
        logits[idx] = saved;
        const double fd = (up - down) / (2 * h);
        const double rel = std::abs(grad[idx] - fd) / std::max(std::abs(fd), 1e-12);
        worst = std::max(worst, rel);
        ++checked;
      }
      c.expect(checked >= 10, std::string(estimator_name(estimator)) + ": too few coordinates");
      c.expect(worst <= 1e-4, std::string(estimator_name(estimator)) + " batch " +
                                  std::to_string(batch) + ": rel err " + fmt(worst));
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// 5 & 6. Directional training experiments, shared across both criteria.
struct ArmResult {
  double acc = 0.0;
  double check = 0.0;
  double r2w = 0.0;
};

struct ExperimentData {
  std::vector<ArmResult> rfb, spae;
  bool ran = false;
};

ExperimentData g_experiment;

void run_experiment() {
  if (g_experiment.ran) return;
  for (int s = 0; s < 5; ++s) {
    for (const Estimator est : {Estimator::Rfb, Estimator::Spae}) {
      RunConfig cfg = experiment_config(est, 1000 + s);
      TabularPolicy policy = make_prior_policy(cfg);
      for (int it = 0; it < cfg.train.iterations; ++it)
        (void)train_iteration(policy, cfg.train, it);
      const BehaviorEval be = evaluate_behavior(policy, cfg, 5000 + s);
      ArmResult r{be.eval.acc_at_k, be.behavior.check_tokens, be.behavior.r2w};
      (est == Estimator::Rfb ? g_experiment.rfb : g_experiment.spae).push_back(r);
    }
  }
  g_experiment.ran = true;
}

Check criterion_5() {
  Check c;
  run_experiment();
  double rfb_check = 0, spae_check = 0, rfb_acc = 0, spae_acc = 0;
  for (int s = 0; s < 5; ++s) {
    rfb_check += g_experiment.rfb[s].check;
    spae_check += g_experiment.spae[s].check;
    rfb_acc += g_experiment.rfb[s].acc;
    spae_acc += g_experiment.spae[s].acc;
  }
  rfb_check /= 5;
  spae_check /= 5;
  rfb_acc /= 5;
  spae_acc /= 5;
  c.note("check RFB " + fmt(rfb_check) + " vs SPAE " + fmt(spae_check) + "; acc RFB " +
         fmt(rfb_acc) + " vs SPAE " + fmt(spae_acc));
  c.expect(spae_check <= 0.7 * rfb_check, "checking-token reduction below 30%");
  c.expect(spae_acc >= rfb_acc - 0.02, "SPAE accuracy more than 2pp below RF-B");
  return c;
}

Check criterion_6() {
  Check c;
  run_experiment();
  double rfb_sum = 0, spae_sum = 0;
  for (int s = 0; s < 5; ++s) {
    const double r = g_experiment.rfb[s].r2w;
    const double p = g_experiment.spae[s].r2w;
    rfb_sum += r;
    spae_sum += p;
    c.expect(p <= r, "seed " + std::to_string(s) + ": SPAE r2w " + fmt(p) + " > RF-B " + fmt(r));
  }
  c.note("mean r2w RFB " + fmt(rfb_sum / 5) + " vs SPAE " + fmt(spae_sum / 5));
  c.expect(spae_sum < rfb_sum, "mean R2W not strictly lower");
  return c;
}

// ---------------------------------------------------------------------------
// 7. Probe-truncated decoding on the untrained over-checking policy.
Check criterion_7() {
  Check c;
  RunConfig cfg = experiment_config(Estimator::Spae, 2024);
  const TabularPolicy policy = make_prior_policy(cfg);
  const auto queries = make_queries(cfg.train.task, 2024, 0xAC7, 50);
  const TruncationComparison cmp =
      paired_truncation_eval(policy, queries, 20, cfg.train.rollout_decode(), cfg.train.probe,
                             cfg.train.spae.eps_sat, kVocab, 777);

  c.note("pairs " + std::to_string(cmp.pairs) + ", acc " + fmt(cmp.standard.acc) + " -> " +
         fmt(cmp.truncated.acc) + ", len " + fmt(cmp.standard.mean_len) + " -> " +
         fmt(cmp.truncated.mean_len) + ", r2w " + fmt(cmp.standard.r2w) + " -> " +
         fmt(cmp.truncated.r2w));
  c.expect(cmp.pairs >= 1000, "fewer than 1000 paired decodes");
  c.expect(cmp.saturated_correct > 0, "no saturating pairs observed");
  c.expect(cmp.saturated_correct_r2w_truncated == 0,
           "R2W after truncation on a correct saturation");
  c.expect(cmp.truncated.r2w <= cmp.standard.r2w, "truncated R2W above standard");
  c.expect(cmp.truncated.mean_len < cmp.standard.mean_len, "mean length not reduced");
  c.expect(cmp.truncated.acc >= cmp.standard.acc - 0.01, "accuracy drop above 1pp");
  c.expect(cmp.reasoning_len_violations == 0, "truncated reasoning longer than standard");
  return c;
}

// ---------------------------------------------------------------------------
// 8. Progress-binned probe variance: middle bins exceed the final bin.
Check criterion_8() {
  Check c;
  RunConfig cfg;
  cfg.prior.solve_acc = 0.75;
  cfg.prior.loop_prob = 0.85;   // most trajectories re-check at least once
  cfg.prior.recheck_prob = 0.45;
  cfg.prior.flip_prob = 0.03;
  cfg.prior.probe_first_spread = 0.5;  // uncommitted first probe
  const TabularPolicy policy = make_prior_policy(cfg);

  std::vector<std::vector<ProbeRecord>> sets;
  long steps = 0;
  for (std::uint64_t i = 0; i < 600; ++i) {
    const Query q = generate_query(stream_seed(4242, {0xAC8, i}), cfg.train.task);
    Rng rng(4242, {i, 1});
    const TokenTrajectory traj =
        sample_trajectory(policy, q, cfg.train.rollout_decode(), kVocab, rng);
    auto records = probe_all_steps(policy, q, traj, cfg.train.probe, kVocab, 4243, i);
    steps += static_cast<long>(records.size());
    sets.push_back(std::move(records));
  }
  const VarianceBins bins = variance_bins(sets);
  const long mid_count = bins.bins[1].count + bins.bins[2].count;
  const double mid = mid_count == 0 ? 0.0
                                    : (bins.bins[1].var_conf * bins.bins[1].count +
                                       bins.bins[2].var_conf * bins.bins[2].count) /
                                          mid_count;
  const double last = bins.bins[4].var_conf;
  c.note("steps " + std::to_string(steps) + ", Var[Conf] mid " + fmt(mid) + " vs final " +
         fmt(last));
  c.expect(steps >= 1000, "fewer than 1000 probed steps");
  c.expect(mid_count > 0 && bins.bins[4].count > 0, "empty bins");
  c.expect(mid > last, "mid-bin variance does not exceed the final bin");
  c.expect(mid > 0.005, "mid-bin variance not substantive");
  return c;
}

// ---------------------------------------------------------------------------
// 9. Byte-stable serialization and manifest reproduction.
Check criterion_9() {
  Check c;
  const fs::path base = fs::temp_directory_path() / "spae_accept_c9";
  fs::remove_all(base);

  RunConfig cfg = experiment_config(Estimator::Spae, 321);
  cfg.train.iterations = 12;
  cfg.train.batch_queries = 8;
  cfg.eval_queries = 8;
  cfg.eval_k = 4;
  cfg.num_queries = 40;
  cfg.dump_trajectories = true;
  cfg.out_dir = (base / "run").string();

  cmd_gen(cfg);
  cmd_train(cfg);
  cfg.checkpoint = cfg.out_dir + "/checkpoint_final.bin";
  cmd_eval(cfg);
  cfg.truncate_pairs = 64;
  cmd_truncate_eval(cfg);

  const std::vector<std::string> artifacts = {"queries.jsonl",      "curves.csv",
                                              "checkpoint_final.bin", "eval.csv",
                                              "trajectories.jsonl", "truncate_eval.csv"};
  std::vector<std::string> before;
  for (const auto& name : artifacts) before.push_back(slurp(cfg.out_dir + "/" + name));
  c.expect(!before[0].empty() && !before[1].empty(), "missing artifacts");

  // Re-run every command from the manifest's own config snapshot.
  for (const std::string cmd : {"gen", "train", "eval", "truncate-eval"}) {
    const std::string manifest_path = cfg.out_dir + "/" + cmd + "_manifest.json";
    std::ifstream in(manifest_path);
    c.expect(static_cast<bool>(in), "missing manifest " + manifest_path);
    if (!in) continue;
    Json manifest;
    in >> manifest;
    const RunConfig replay = config_from_json(manifest.at("config"));
    if (cmd == "gen") cmd_gen(replay);
    if (cmd == "train") cmd_train(replay);
    if (cmd == "eval") cmd_eval(replay);
    if (cmd == "truncate-eval") cmd_truncate_eval(replay);
  }
  for (std::size_t i = 0; i < artifacts.size(); ++i) {
    const std::string after = slurp(cfg.out_dir + "/" + artifacts[i]);
    c.expect(after == before[i], artifacts[i] + " not byte-stable");
  }

  // Trajectory JSONL round trip: parse and re-serialize byte-identically.
  const auto records = read_trajectory_jsonl(cfg.out_dir + "/trajectories.jsonl");
  write_trajectory_jsonl(cfg.out_dir + "/trajectories.jsonl", records);
  c.expect(slurp(cfg.out_dir + "/trajectories.jsonl") == before[4],
           "trajectory JSONL round trip changed bytes");

  fs::remove_all(base);
  return c;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Check()> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "formula golden values", criterion_1},
      {2, "invariant suite (10k randomized cases)", criterion_2},
      {3, "reduction identity SPAE(0,0) == RF-B", criterion_3},
      {4, "gradient oracle vs central differences", criterion_4},
      {5, "over-checking reduction vs RF-B", criterion_5},
      {6, "R2W suppression vs RF-B", criterion_6},
      {7, "probe-truncated decoding", criterion_7},
      {8, "probe variance peaks mid-trajectory", criterion_8},
      {9, "byte-stable serialization and manifests", criterion_9},
  };

  int failures = 0;
  for (const auto& crit : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Check result;
    try {
      result = crit.fn();
    } catch (const std::exception& e) {
      result.ok = false;
      result.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %d: %s (%.1fs)%s%s\n", result.ok ? "PASS" : "FAIL", crit.id,
                crit.name, secs, result.detail.empty() ? "" : " -- ",
                result.detail.c_str());
    std::fflush(stdout);
    if (!result.ok) ++failures;
  }
  return failures;
}
