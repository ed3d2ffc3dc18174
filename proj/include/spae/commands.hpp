// SPDX-License-Identifier: Apache-2.0
//
// Run configuration and the subcommand entry points shared by the CLI and
// the test suites.

#pragma once

#include <iosfwd>
#include <string>

#include "spae/diagnostics.hpp"
#include "spae/serialize.hpp"
#include "spae/trainer.hpp"

namespace spae {

struct RunConfig {
  TrainConfig train;  // estimator, optimization, probe, shaping, task
  OverCheckPrior prior;

  // Policy table. The pipeline default is a 4-token window: the running
  // value must stay inside the window across WAIT loops and through the
  // forced THINK_END summary, which a 2-token window cannot do. The default
  // table admits the injective window packing ((18+1)^4 <= 2^17), so row
  // lookups are collision-free.
  int context_order = 4;
  int table_rows = 131072;
  double policy_temperature = 1.0;

  int num_queries = 100;  // gen
  int eval_queries = 32;
  int eval_k = 16;
  double eval_temperature = 0.6;
  int eval_top_k = 50;
  double eval_top_p = 1.0;
  int truncate_pairs = 1000;
  int checkpoint_every = 0;  // 0: final checkpoint only

  std::string out_dir = ".";
  std::string checkpoint;     // input checkpoint (eval / truncate-eval)
  std::string resume_checkpoint;  // train: continue from this checkpoint
  int resume_from = 0;            // train: first iteration index when resuming
  std::string queries_path;   // optional query JSONL (eval / truncate-eval)
  std::string input;          // trajectory JSONL (diagnose)
  std::string method_label = "input";  // method column written by diagnose
  bool dump_trajectories = false;      // eval: dump probed trajectories

  DecodeConfig eval_decode() const {
    return {eval_temperature, eval_top_k, eval_top_p, train.max_len};
  }
};

RunConfig config_from_json(const Json& j);
Json config_to_json(const RunConfig& cfg);
RunConfig load_config_file(const std::string& path);  // DataError on bad file

// SPAE_SEED overrides the config seed when set.
void apply_env_overrides(RunConfig& cfg);

// Subcommand bodies. They throw (std::invalid_argument for usage-level
// problems, DataError for malformed data); the CLI maps those to exit codes.
void cmd_gen(const RunConfig& cfg, std::ostream* log = nullptr);
void cmd_train(const RunConfig& cfg, std::ostream* log = nullptr);
void cmd_eval(const RunConfig& cfg, std::ostream* log = nullptr);
void cmd_diagnose(const RunConfig& cfg, std::ostream* log = nullptr);
void cmd_truncate_eval(const RunConfig& cfg, std::ostream* log = nullptr);

// Builds the prior-initialized policy for cfg.
TabularPolicy make_prior_policy(const RunConfig& cfg);

// Deterministic query sets.
std::vector<Query> make_queries(const TaskSpec& task, std::uint64_t seed, std::uint64_t stream,
                                int count);

// Post-training behavioral evaluation: eval_at_k under the eval decode, with
// probes on every trajectory.
struct BehaviorEval {
  EvalAtK eval;
  BehaviorSummary behavior;
};
BehaviorEval evaluate_behavior(const TabularPolicy& policy, const RunConfig& cfg,
                               std::uint64_t eval_seed);

}  // namespace spae
