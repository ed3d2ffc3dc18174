// SPDX-License-Identifier: Apache-2.0
//
// Single-binary CLI: gen / train / eval / diagnose / truncate-eval.
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "spae/commands.hpp"

namespace {

struct FlagOverrides {
  std::optional<std::string> estimator;
  std::optional<double> xi, alpha, eps_sat, eps_low, eps_high, lr;
  std::optional<double> rollout_temperature, eval_temperature;
  std::optional<int> group_size, batch_queries, mini_batch, iterations, max_len;
  std::optional<int> modulus, chain_length, context_order, table_rows;
  std::optional<int> num_queries, eval_queries, eval_k, truncate_pairs, checkpoint_every;
  std::optional<std::uint64_t> seed;
  std::optional<double> prior_solve_acc, prior_loop_prob, prior_recheck_prob, prior_flip_prob,
      prior_probe_first_spread;
  std::optional<std::string> ops_csv, out_dir, checkpoint, queries, input, method;
  std::optional<std::string> resume;
  std::optional<int> resume_from;
  bool dump = false;
};

void add_common_flags(CLI::App* sub, std::string& config_path, FlagOverrides& f) {
  sub->add_option("--config", config_path, "JSON config file");
  sub->add_option("--estimator", f.estimator, "GRPO|DAPO|RFB|SPAE");
  sub->add_option("--xi", f.xi);
  sub->add_option("--alpha", f.alpha);
  sub->add_option("--eps-sat", f.eps_sat);
  sub->add_option("--eps-low", f.eps_low);
  sub->add_option("--eps-high", f.eps_high);
  sub->add_option("--lr", f.lr);
  sub->add_option("--group-size", f.group_size);
  sub->add_option("--batch-queries", f.batch_queries);
  sub->add_option("--mini-batch", f.mini_batch);
  sub->add_option("--iterations", f.iterations);
  sub->add_option("--max-len", f.max_len);
  sub->add_option("--rollout-temperature", f.rollout_temperature);
  sub->add_option("--eval-temperature", f.eval_temperature);
  sub->add_option("--modulus", f.modulus);
  sub->add_option("--chain-length", f.chain_length);
  sub->add_option("--ops", f.ops_csv, "comma-separated subset of add,sub,mul");
  sub->add_option("--context-order", f.context_order);
  sub->add_option("--table-rows", f.table_rows);
  sub->add_option("--num-queries", f.num_queries);
  sub->add_option("--eval-queries", f.eval_queries);
  sub->add_option("--eval-k", f.eval_k);
  sub->add_option("--truncate-pairs", f.truncate_pairs);
  sub->add_option("--checkpoint-every", f.checkpoint_every);
  sub->add_option("--seed", f.seed);
  sub->add_option("--prior-solve-acc", f.prior_solve_acc);
  sub->add_option("--prior-loop-prob", f.prior_loop_prob);
  sub->add_option("--prior-recheck-prob", f.prior_recheck_prob);
  sub->add_option("--prior-flip-prob", f.prior_flip_prob);
  sub->add_option("--prior-probe-first-spread", f.prior_probe_first_spread);
  sub->add_option("--out-dir", f.out_dir);
  sub->add_option("--checkpoint", f.checkpoint, "policy checkpoint to evaluate");
  sub->add_option("--resume", f.resume, "train: continue from this checkpoint");
  sub->add_option("--resume-from", f.resume_from, "train: first iteration when resuming");
  sub->add_option("--queries", f.queries, "query JSONL file");
  sub->add_option("--input", f.input, "trajectory JSONL file");
  sub->add_option("--method", f.method, "method label for diagnose output");
  sub->add_flag("--dump", f.dump, "eval: dump probed trajectories");
}

spae::RunConfig build_config(const std::string& config_path, const FlagOverrides& f) {
  spae::RunConfig cfg =
      config_path.empty() ? spae::RunConfig{} : spae::load_config_file(config_path);
  spae::apply_env_overrides(cfg);

  if (f.estimator) {
    const auto e = spae::estimator_from_name(*f.estimator);
    if (!e) throw std::invalid_argument("unknown estimator: " + *f.estimator);
    cfg.train.estimator = *e;
  }
  if (f.xi) cfg.train.spae.xi = *f.xi;
  if (f.alpha) cfg.train.spae.alpha = *f.alpha;
  if (f.eps_sat) cfg.train.spae.eps_sat = *f.eps_sat;
  if (f.eps_low) cfg.train.eps_low = *f.eps_low;
  if (f.eps_high) cfg.train.eps_high = *f.eps_high;
  if (f.lr) cfg.train.learning_rate = *f.lr;
  if (f.group_size) cfg.train.group_size = *f.group_size;
  if (f.batch_queries) cfg.train.batch_queries = *f.batch_queries;
  if (f.mini_batch) cfg.train.mini_batch = *f.mini_batch;
  if (f.iterations) cfg.train.iterations = *f.iterations;
  if (f.max_len) cfg.train.max_len = *f.max_len;
  if (f.rollout_temperature) cfg.train.rollout_temperature = *f.rollout_temperature;
  if (f.eval_temperature) cfg.eval_temperature = *f.eval_temperature;
  if (f.modulus) cfg.train.task.modulus = *f.modulus;
  if (f.chain_length) cfg.train.task.chain_length = *f.chain_length;
  if (f.ops_csv) {
    std::vector<spae::ChainOp> ops;
    std::string item;
    std::istringstream ss(*f.ops_csv);
    while (std::getline(ss, item, ',')) {
      const auto op = spae::chain_op_from_name(item);
      if (!op) throw std::invalid_argument("unknown chain op: " + item);
      ops.push_back(*op);
    }
    if (ops.empty()) throw std::invalid_argument("--ops must name at least one op");
    cfg.train.task.ops = std::move(ops);
  }
  if (f.context_order) cfg.context_order = *f.context_order;
  if (f.table_rows) cfg.table_rows = *f.table_rows;
  if (f.num_queries) cfg.num_queries = *f.num_queries;
  if (f.eval_queries) cfg.eval_queries = *f.eval_queries;
  if (f.eval_k) cfg.eval_k = *f.eval_k;
  if (f.truncate_pairs) cfg.truncate_pairs = *f.truncate_pairs;
  if (f.checkpoint_every) cfg.checkpoint_every = *f.checkpoint_every;
  if (f.seed) cfg.train.seed = *f.seed;
  if (f.prior_solve_acc) cfg.prior.solve_acc = *f.prior_solve_acc;
  if (f.prior_loop_prob) cfg.prior.loop_prob = *f.prior_loop_prob;
  if (f.prior_recheck_prob) cfg.prior.recheck_prob = *f.prior_recheck_prob;
  if (f.prior_flip_prob) cfg.prior.flip_prob = *f.prior_flip_prob;
  if (f.prior_probe_first_spread) cfg.prior.probe_first_spread = *f.prior_probe_first_spread;
  if (f.out_dir) cfg.out_dir = *f.out_dir;
  if (f.checkpoint) cfg.checkpoint = *f.checkpoint;
  if (f.resume) cfg.resume_checkpoint = *f.resume;
  if (f.resume_from) cfg.resume_from = *f.resume_from;
  if (f.queries) cfg.queries_path = *f.queries;
  if (f.input) cfg.input = *f.input;
  if (f.method) cfg.method_label = *f.method;
  if (f.dump) cfg.dump_trajectories = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPAE credit-assignment pipeline on a synthetic verifiable-reasoning task"};
  app.require_subcommand(1);

  std::string config_path;
  FlagOverrides flags;

  CLI::App* gen = app.add_subcommand("gen", "generate a deterministic query set");
  CLI::App* train = app.add_subcommand("train", "run the RLVR training loop");
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint at k samples per query");
  CLI::App* diagnose = app.add_subcommand("diagnose", "behavioral metrics from trajectory JSONL");
  CLI::App* truncate =
      app.add_subcommand("truncate-eval", "paired standard vs probe-truncated decoding");
  for (CLI::App* sub : {gen, train, eval, diagnose, truncate})
    add_common_flags(sub, config_path, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const spae::RunConfig cfg = build_config(config_path, flags);
    if (gen->parsed()) spae::cmd_gen(cfg, &std::cout);
    if (train->parsed()) spae::cmd_train(cfg, &std::cout);
    if (eval->parsed()) spae::cmd_eval(cfg, &std::cout);
    if (diagnose->parsed()) spae::cmd_diagnose(cfg, &std::cout);
    if (truncate->parsed()) spae::cmd_truncate_eval(cfg, &std::cout);
  } catch (const spae::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
