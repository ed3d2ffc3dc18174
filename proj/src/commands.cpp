// SPDX-License-Identifier: Apache-2.0

#include "spae/commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

namespace spae {

namespace {

namespace fs = std::filesystem;

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_out_dir(const RunConfig& cfg) {
  if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);
}

std::vector<std::string> ops_to_names(const std::vector<ChainOp>& ops) {
  std::vector<std::string> names;
  for (ChainOp op : ops) names.push_back(chain_op_name(op));
  return names;
}

std::vector<ChainOp> ops_from_names(const std::vector<std::string>& names) {
  std::vector<ChainOp> ops;
  for (const std::string& n : names) {
    const auto op = chain_op_from_name(n);
    if (!op) throw std::invalid_argument("unknown chain op: " + n);
    ops.push_back(*op);
  }
  if (ops.empty()) throw std::invalid_argument("ops list must be non-empty");
  return ops;
}

void emit_manifest(const RunConfig& cfg, const std::string& command,
                   std::vector<std::string> outputs) {
  RunManifest manifest;
  manifest.command = command;
  manifest.config = config_to_json(cfg);
  manifest.seed = cfg.train.seed;
  manifest.content_hash = manifest_content_hash(command, manifest.config);
  manifest.outputs = std::move(outputs);
  write_manifest(join_path(cfg.out_dir, command + "_manifest.json"), manifest);
}

}  // namespace

RunConfig config_from_json(const Json& j) {
  RunConfig cfg;
  TrainConfig& t = cfg.train;

  if (j.contains("estimator")) {
    const auto e = estimator_from_name(j.at("estimator").get<std::string>());
    if (!e) throw std::invalid_argument("unknown estimator: " + j.at("estimator").get<std::string>());
    t.estimator = *e;
  }
  t.group_size = j.value("group_size", t.group_size);
  t.batch_queries = j.value("batch_queries", t.batch_queries);
  t.mini_batch = j.value("mini_batch", t.mini_batch);
  t.eps_low = j.value("eps_low", t.eps_low);
  t.eps_high = j.value("eps_high", t.eps_high);
  t.learning_rate = j.value("lr", t.learning_rate);
  t.iterations = j.value("iterations", t.iterations);
  t.seed = j.value("seed", t.seed);
  t.max_len = j.value("max_len", t.max_len);
  t.rollout_temperature = j.value("rollout_temperature", t.rollout_temperature);
  t.rollout_top_k = j.value("rollout_top_k", t.rollout_top_k);
  t.rollout_top_p = j.value("rollout_top_p", t.rollout_top_p);

  t.probe.n_samples = j.value("probe_samples", t.probe.n_samples);
  t.probe.max_continuation_tokens = j.value("probe_max_tokens", t.probe.max_continuation_tokens);

  t.spae.xi = j.value("xi", t.spae.xi);
  t.spae.alpha = j.value("alpha", t.spae.alpha);
  t.spae.eps_sat = j.value("eps_sat", t.spae.eps_sat);
  t.spae.eps_norm = j.value("eps_norm", t.spae.eps_norm);

  t.task.modulus = j.value("modulus", t.task.modulus);
  t.task.chain_length = j.value("chain_length", t.task.chain_length);
  if (j.contains("ops")) t.task.ops = ops_from_names(j.at("ops").get<std::vector<std::string>>());

  if (j.contains("prior")) {
    const Json& p = j.at("prior");
    cfg.prior.solve_acc = p.value("solve_acc", cfg.prior.solve_acc);
    cfg.prior.loop_prob = p.value("loop_prob", cfg.prior.loop_prob);
    cfg.prior.recheck_prob = p.value("recheck_prob", cfg.prior.recheck_prob);
    cfg.prior.flip_prob = p.value("flip_prob", cfg.prior.flip_prob);
    cfg.prior.probe_first_spread = p.value("probe_first_spread", cfg.prior.probe_first_spread);
  }

  cfg.context_order = j.value("context_order", cfg.context_order);
  cfg.table_rows = j.value("table_rows", cfg.table_rows);
  cfg.policy_temperature = j.value("policy_temperature", cfg.policy_temperature);
  cfg.num_queries = j.value("num_queries", cfg.num_queries);
  cfg.eval_queries = j.value("eval_queries", cfg.eval_queries);
  cfg.eval_k = j.value("eval_k", cfg.eval_k);
  cfg.eval_temperature = j.value("eval_temperature", cfg.eval_temperature);
  cfg.eval_top_k = j.value("eval_top_k", cfg.eval_top_k);
  cfg.eval_top_p = j.value("eval_top_p", cfg.eval_top_p);
  cfg.truncate_pairs = j.value("truncate_pairs", cfg.truncate_pairs);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.checkpoint = j.value("checkpoint", cfg.checkpoint);
  cfg.resume_checkpoint = j.value("resume", cfg.resume_checkpoint);
  cfg.resume_from = j.value("resume_from", cfg.resume_from);
  cfg.queries_path = j.value("queries", cfg.queries_path);
  cfg.input = j.value("input", cfg.input);
  cfg.method_label = j.value("method", cfg.method_label);
  cfg.dump_trajectories = j.value("dump", cfg.dump_trajectories);
  return cfg;
}

Json config_to_json(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  Json j;
  j["estimator"] = estimator_name(t.estimator);
  j["group_size"] = t.group_size;
  j["batch_queries"] = t.batch_queries;
  j["mini_batch"] = t.mini_batch;
  j["eps_low"] = t.eps_low;
  j["eps_high"] = t.eps_high;
  j["lr"] = t.learning_rate;
  j["iterations"] = t.iterations;
  j["seed"] = t.seed;
  j["max_len"] = t.max_len;
  j["rollout_temperature"] = t.rollout_temperature;
  j["rollout_top_k"] = t.rollout_top_k;
  j["rollout_top_p"] = t.rollout_top_p;
  j["probe_samples"] = t.probe.n_samples;
  j["probe_max_tokens"] = t.probe.max_continuation_tokens;
  j["xi"] = t.spae.xi;
  j["alpha"] = t.spae.alpha;
  j["eps_sat"] = t.spae.eps_sat;
  j["eps_norm"] = t.spae.eps_norm;
  j["modulus"] = t.task.modulus;
  j["chain_length"] = t.task.chain_length;
  j["ops"] = ops_to_names(t.task.ops);
  j["prior"] = {{"solve_acc", cfg.prior.solve_acc},
                {"loop_prob", cfg.prior.loop_prob},
                {"recheck_prob", cfg.prior.recheck_prob},
                {"flip_prob", cfg.prior.flip_prob},
                {"probe_first_spread", cfg.prior.probe_first_spread}};
  j["context_order"] = cfg.context_order;
  j["table_rows"] = cfg.table_rows;
  j["policy_temperature"] = cfg.policy_temperature;
  j["num_queries"] = cfg.num_queries;
  j["eval_queries"] = cfg.eval_queries;
  j["eval_k"] = cfg.eval_k;
  j["eval_temperature"] = cfg.eval_temperature;
  j["eval_top_k"] = cfg.eval_top_k;
  j["eval_top_p"] = cfg.eval_top_p;
  j["truncate_pairs"] = cfg.truncate_pairs;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["out_dir"] = cfg.out_dir;
  if (!cfg.checkpoint.empty()) j["checkpoint"] = cfg.checkpoint;
  if (!cfg.resume_checkpoint.empty()) {
    j["resume"] = cfg.resume_checkpoint;
    j["resume_from"] = cfg.resume_from;
  }
  if (!cfg.queries_path.empty()) j["queries"] = cfg.queries_path;
  if (!cfg.input.empty()) j["input"] = cfg.input;
  j["method"] = cfg.method_label;
  j["dump"] = cfg.dump_trajectories;
  return j;
}

void apply_env_overrides(RunConfig& cfg) {
  if (const char* env_seed = std::getenv("SPAE_SEED"))
    cfg.train.seed = std::strtoull(env_seed, nullptr, 10);
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config: " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return config_from_json(j);
}

TabularPolicy make_prior_policy(const RunConfig& cfg) {
  TabularPolicy policy(cfg.context_order, cfg.table_rows, cfg.train.task.vocab.size,
                       cfg.policy_temperature);
  apply_overcheck_prior(policy, cfg.train.task, cfg.prior);
  return policy;
}

std::vector<Query> make_queries(const TaskSpec& task, std::uint64_t seed, std::uint64_t stream,
                                int count) {
  std::vector<Query> queries;
  queries.reserve(count);
  for (int i = 0; i < count; ++i)
    queries.push_back(
        generate_query(stream_seed(seed, {stream, static_cast<std::uint64_t>(i)}), task));
  return queries;
}

BehaviorEval evaluate_behavior(const TabularPolicy& policy, const RunConfig& cfg,
                               std::uint64_t eval_seed) {
  const Vocab& vocab = cfg.train.task.vocab;
  const std::vector<Query> queries =
      make_queries(cfg.train.task, eval_seed, 0xE7a1, cfg.eval_queries);

  BehaviorEval out;
  out.eval = eval_at_k(policy, queries, cfg.eval_k, cfg.eval_decode(), vocab,
                       stream_seed(eval_seed, {0xE7a2}));

  std::vector<PotentialSeries> series;
  series.reserve(out.eval.trajectories.size());
  const std::uint64_t probe_master = stream_seed(eval_seed, {0xE7a3});
  for (std::size_t i = 0; i < out.eval.trajectories.size(); ++i) {
    const Query& q = queries[i / cfg.eval_k];
    const auto records = probe_all_steps(policy, q, out.eval.trajectories[i], cfg.train.probe,
                                         vocab, probe_master, i);
    series.push_back(make_potential_series(records, cfg.train.spae.eps_sat));
  }
  out.behavior = summarize_behavior(out.eval.trajectories, series, vocab);
  return out;
}

void cmd_gen(const RunConfig& cfg, std::ostream* log) {
  cfg.train.task.validate();
  ensure_out_dir(cfg);
  const std::vector<Query> queries =
      make_queries(cfg.train.task, cfg.train.seed, 0x9e1ULL, cfg.num_queries);
  const std::string out_path = join_path(cfg.out_dir, "queries.jsonl");
  write_query_jsonl(out_path, queries);
  emit_manifest(cfg, "gen", {out_path});
  if (log) *log << "wrote " << queries.size() << " queries to " << out_path << "\n";
}

void cmd_train(const RunConfig& cfg, std::ostream* log) {
  cfg.train.validate();
  ensure_out_dir(cfg);
  const bool resuming = !cfg.resume_checkpoint.empty();
  if (resuming && (cfg.resume_from < 0 || cfg.resume_from >= cfg.train.iterations))
    throw std::invalid_argument("resume_from outside [0, iterations)");
  TabularPolicy policy =
      resuming ? TabularPolicy::load(cfg.resume_checkpoint) : make_prior_policy(cfg);

  std::vector<std::vector<std::string>> rows;
  rows.reserve(cfg.train.iterations);
  std::vector<std::string> outputs;

  for (int it = resuming ? cfg.resume_from : 0; it < cfg.train.iterations; ++it) {
    const bool last = it + 1 == cfg.train.iterations;
    IterationTrace trace;
    const bool want_trace = last && cfg.dump_trajectories;
    const UpdateReport report =
        train_iteration(policy, cfg.train, it, want_trace ? &trace : nullptr);
    rows.push_back({std::to_string(report.iteration), fmt_double(report.mean_entropy),
                    fmt_double(report.mean_reward), fmt_double(report.mean_length)});
    if (report.skipped && log)
      *log << "iteration " << it << ": batch empty after dynamic sampling, skipped\n";
    if (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0 && !last) {
      const std::string path =
          join_path(cfg.out_dir, "checkpoint_" + std::to_string(it + 1) + ".bin");
      policy.save(path);
      outputs.push_back(path);
    }
    if (log && ((it + 1) % 50 == 0 || last))
      *log << "iteration " << (it + 1) << "/" << cfg.train.iterations
           << " acc=" << fmt_double(report.mean_reward)
           << " len=" << fmt_double(report.mean_length) << "\n";

    if (want_trace && !report.skipped) {
      // Final-iteration batch with per-token advantages, for offline
      // inspection of the credit assignment.
      std::vector<TrajectoryRecord> records;
      std::size_t ti = 0;
      for (const auto& group : trace.groups) {
        for (const auto& rollout : group.rollouts) {
          TrajectoryRecord rec;
          rec.trajectory = rollout;
          if (ti < trace.series.size()) {
            rec.phi = trace.series[ti].phi;
            const PhaseLabels phases = classify_phases(trace.series[ti]);
            for (Phase p : phases.step_phase) rec.phases += p == Phase::Solving ? 'S' : 'C';
          }
          rec.adv_raw = trace.adv_raw.per_token[ti];
          rec.adv_final = trace.adv_final.per_token[ti];
          rec.query = group.query;
          records.push_back(std::move(rec));
          ++ti;
        }
      }
      const std::string batch_path = join_path(cfg.out_dir, "train_batch.jsonl");
      write_trajectory_jsonl(batch_path, records);
      outputs.push_back(batch_path);
    }
  }

  const std::string curves_path = join_path(cfg.out_dir, "curves.csv");
  write_csv(curves_path, "iteration,entropy,acc,len", rows);
  const std::string ckpt_path = join_path(cfg.out_dir, "checkpoint_final.bin");
  policy.save(ckpt_path);
  outputs.push_back(curves_path);
  outputs.push_back(ckpt_path);
  emit_manifest(cfg, "train", std::move(outputs));
}

namespace {

std::vector<Query> eval_queries_for(const RunConfig& cfg) {
  if (!cfg.queries_path.empty()) return read_query_jsonl(cfg.queries_path);
  return make_queries(cfg.train.task, cfg.train.seed, 0xE7a1, cfg.eval_queries);
}

TabularPolicy policy_for_eval(const RunConfig& cfg) {
  if (cfg.checkpoint.empty()) throw std::invalid_argument("--checkpoint is required");
  return TabularPolicy::load(cfg.checkpoint);
}

}  // namespace

void cmd_eval(const RunConfig& cfg, std::ostream* log) {
  ensure_out_dir(cfg);
  const TabularPolicy policy = policy_for_eval(cfg);
  const std::vector<Query> queries = eval_queries_for(cfg);
  const Vocab& vocab = cfg.train.task.vocab;

  const EvalAtK result = eval_at_k(policy, queries, cfg.eval_k, cfg.eval_decode(), vocab,
                                   stream_seed(cfg.train.seed, {0xE7a2}));

  std::vector<std::vector<std::string>> rows;
  for (const QueryEval& qe : result.per_query)
    rows.push_back({std::to_string(qe.query_id), fmt_double(qe.acc), fmt_double(qe.len),
                    std::to_string(qe.pass)});
  rows.push_back({"ALL", fmt_double(result.acc_at_k), fmt_double(result.len_at_k),
                  fmt_double(result.pass_at_k)});
  const std::string eval_path = join_path(cfg.out_dir, "eval.csv");
  write_csv(eval_path, "query_id,acc_at_k,len_at_k,pass_at_k", rows);
  std::vector<std::string> outputs{eval_path};

  if (cfg.dump_trajectories) {
    std::vector<TrajectoryRecord> records;
    records.reserve(result.trajectories.size());
    const std::uint64_t probe_master = stream_seed(cfg.train.seed, {0xE7a3});
    for (std::size_t i = 0; i < result.trajectories.size(); ++i) {
      const Query& q = queries[i / cfg.eval_k];
      TrajectoryRecord rec;
      rec.trajectory = result.trajectories[i];
      rec.probes =
          probe_all_steps(policy, q, rec.trajectory, cfg.train.probe, vocab, probe_master, i);
      const PotentialSeries series = make_potential_series(rec.probes, cfg.train.spae.eps_sat);
      rec.phi = series.phi;
      const PhaseLabels phases = classify_phases(series);
      for (Phase p : phases.step_phase) rec.phases += p == Phase::Solving ? 'S' : 'C';
      rec.query = q;
      records.push_back(std::move(rec));
    }
    const std::string dump_path = join_path(cfg.out_dir, "trajectories.jsonl");
    write_trajectory_jsonl(dump_path, records);
    outputs.push_back(dump_path);
  }

  emit_manifest(cfg, "eval", std::move(outputs));
  if (log)
    *log << "acc@" << cfg.eval_k << "=" << fmt_double(result.acc_at_k) << " len@" << cfg.eval_k
         << "=" << fmt_double(result.len_at_k) << " pass@" << cfg.eval_k << "="
         << fmt_double(result.pass_at_k) << "\n";
}

namespace {

const char* kBinLabels[5] = {"[0,0.2)", "[0.2,0.4)", "[0.4,0.6)", "[0.6,0.8)", "[0.8,1.0]"};

}  // namespace

void cmd_diagnose(const RunConfig& cfg, std::ostream* log) {
  if (cfg.input.empty()) throw std::invalid_argument("--input is required");
  ensure_out_dir(cfg);
  const std::vector<TrajectoryRecord> records = read_trajectory_jsonl(cfg.input);
  const Vocab& vocab = cfg.train.task.vocab;
  const double eps_sat = cfg.train.spae.eps_sat;

  std::vector<TokenTrajectory> trajectories;
  std::vector<PotentialSeries> series;
  std::vector<std::vector<ProbeRecord>> probe_sets;
  for (const TrajectoryRecord& rec : records) {
    trajectories.push_back(rec.trajectory);
    PotentialSeries s;
    s.eps_sat = eps_sat;
    if (!rec.phi.empty())
      s.phi = rec.phi;
    else if (!rec.probes.empty())
      s = make_potential_series(rec.probes, eps_sat);
    series.push_back(std::move(s));
    if (!rec.probes.empty()) probe_sets.push_back(rec.probes);
  }

  // behavior.csv, one summary row.
  std::vector<std::vector<std::string>> behavior_rows;
  if (!records.empty()) {
    const BehaviorSummary b = summarize_behavior(trajectories, series, vocab);
    behavior_rows.push_back({cfg.method_label, fmt_double(b.acc), fmt_double(b.solve_tokens),
                             fmt_double(b.check_tokens), fmt_double(b.reflect_steps),
                             fmt_double(b.r2w)});
  }
  const std::string behavior_path = join_path(cfg.out_dir, "behavior.csv");
  write_csv(behavior_path, "method,acc,solve,check,reflect,r2w", behavior_rows);

  // variance_bins.csv.
  std::vector<std::vector<std::string>> bin_rows;
  if (!probe_sets.empty()) {
    const VarianceBins bins = variance_bins(probe_sets);
    for (int b = 0; b < 5; ++b)
      bin_rows.push_back({kBinLabels[b], fmt_double(bins.bins[b].var_conf),
                          fmt_double(bins.bins[b].var_acc)});
  }
  const std::string bins_path = join_path(cfg.out_dir, "variance_bins.csv");
  write_csv(bins_path, "bin,var_conf,var_acc", bin_rows);

  // alignment.csv: displacement stats over records with an embedded query.
  std::vector<int> displacements;
  std::map<int, long> hist;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].query || series[i].phi.empty()) continue;
    const auto k_gt = ground_truth_step(*records[i].query, records[i].trajectory, vocab);
    const auto dk = alignment_displacement(series[i], k_gt);
    if (dk) {
      displacements.push_back(*dk);
      ++hist[*dk];
    }
  }
  std::vector<std::vector<std::string>> align_rows;
  if (!displacements.empty()) {
    long exact = 0, early = 0, late = 0;
    double abs_sum = 0.0;
    for (int d : displacements) {
      exact += d == 0;
      early += d < 0;
      late += d > 0;
      abs_sum += std::abs(d);
    }
    const double n = static_cast<double>(displacements.size());
    align_rows.push_back({"n", std::to_string(displacements.size())});
    align_rows.push_back({"pr_exact", fmt_double(exact / n)});
    align_rows.push_back({"pr_early", fmt_double(early / n)});
    align_rows.push_back({"pr_late", fmt_double(late / n)});
    align_rows.push_back({"mean_abs", fmt_double(abs_sum / n)});
    for (const auto& [d, count] : hist)
      align_rows.push_back({"hist_" + std::to_string(d), std::to_string(count)});
  }
  const std::string align_path = join_path(cfg.out_dir, "alignment.csv");
  write_csv(align_path, "metric,value", align_rows);

  emit_manifest(cfg, "diagnose", {behavior_path, bins_path, align_path});
  if (log) *log << "diagnosed " << records.size() << " trajectories\n";
}

void cmd_truncate_eval(const RunConfig& cfg, std::ostream* log) {
  ensure_out_dir(cfg);
  const TabularPolicy policy = policy_for_eval(cfg);
  const std::vector<Query> queries = eval_queries_for(cfg);
  if (queries.empty()) throw std::invalid_argument("no queries to evaluate");
  const int reps =
      std::max(1, (cfg.truncate_pairs + static_cast<int>(queries.size()) - 1) /
                      static_cast<int>(queries.size()));

  const TruncationComparison cmp =
      paired_truncation_eval(policy, queries, reps, cfg.eval_decode(), cfg.train.probe,
                             cfg.train.spae.eps_sat, cfg.train.task.vocab,
                             stream_seed(cfg.train.seed, {0x7c4ULL}));

  std::vector<std::vector<std::string>> rows;
  rows.push_back({"standard", fmt_double(cmp.standard.acc), fmt_double(cmp.standard.mean_len),
                  fmt_double(cmp.standard.r2w)});
  rows.push_back({"truncated", fmt_double(cmp.truncated.acc), fmt_double(cmp.truncated.mean_len),
                  fmt_double(cmp.truncated.r2w)});
  const std::string path = join_path(cfg.out_dir, "truncate_eval.csv");
  write_csv(path, "method,acc_at_k,len_at_k,r2w", rows);
  emit_manifest(cfg, "truncate-eval", {path});
  if (log)
    *log << "pairs=" << cmp.pairs << " std_acc=" << fmt_double(cmp.standard.acc)
         << " trunc_acc=" << fmt_double(cmp.truncated.acc) << "\n";
}

}  // namespace spae
