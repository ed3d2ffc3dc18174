// SPDX-License-Identifier: Apache-2.0

#include "spae/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "spae/kernels.hpp"

namespace spae {

namespace {

constexpr Token kPadToken = -1;

void softmax_scaled(std::span<const double> logits, double inv_temp, std::vector<double>& out) {
  const std::size_t n = logits.size();
  out.resize(n);
  const double m = kern::reduce_max(logits.data(), n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp((logits[i] - m) * inv_temp);
  const double z = kern::reduce_sum(out.data(), n);
  kern::scale(out.data(), n, 1.0 / z);
}

}  // namespace

void filter_distribution(std::vector<double>& dist, const DecodeConfig& decode) {
  const std::size_t n = dist.size();
  if (decode.temperature <= 0.0) throw std::invalid_argument("decode temperature must be > 0");

  if (decode.temperature != 1.0) {
    // p^(1/T) renormalized == softmax(logits / T); done in log space.
    double maxlog = -std::numeric_limits<double>::infinity();
    for (double p : dist) maxlog = std::max(maxlog, std::log(p));
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = dist[i] > 0.0 ? std::exp((std::log(dist[i]) - maxlog) / decode.temperature) : 0.0;
      z += dist[i];
    }
    kern::scale(dist.data(), n, 1.0 / z);
  }

  const bool want_top_k = decode.top_k > 0 && decode.top_k < static_cast<int>(n);
  const bool want_top_p = decode.top_p < 1.0;
  if (!want_top_k && !want_top_p) return;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return dist[a] > dist[b]; });

  std::size_t keep = n;
  if (want_top_k) keep = static_cast<std::size_t>(decode.top_k);
  if (want_top_p) {
    double cum = 0.0;
    std::size_t p_keep = 0;
    while (p_keep < keep) {
      cum += dist[order[p_keep]];
      ++p_keep;
      if (cum >= decode.top_p) break;
    }
    keep = p_keep;
  }

  std::vector<double> filtered(n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < keep; ++i) {
    filtered[order[i]] = dist[order[i]];
    z += dist[order[i]];
  }
  if (z <= 0.0) throw std::runtime_error("decode filter removed all probability mass");
  kern::scale(filtered.data(), n, 1.0 / z);
  dist = std::move(filtered);
}

SampledToken sample_token(const PolicyOracle& policy, std::span<const Token> context,
                          const DecodeConfig& decode, Rng& rng) {
  std::vector<double> dist = policy.next_token_distribution(context);
  filter_distribution(dist, decode);

  double entropy = 0.0;
  for (double p : dist)
    if (p > 0.0) entropy -= p * std::log(p);

  const int tok = rng.categorical(dist);
  if (tok < 0) throw std::runtime_error("sampling from empty distribution");
  return {tok, std::log(dist[tok]), entropy};
}

TokenTrajectory sample_trajectory(const PolicyOracle& policy, const Query& query,
                                  const DecodeConfig& decode, const Vocab& vocab, Rng& rng) {
  if (decode.max_len <= 0) throw std::invalid_argument("max_len must be > 0");

  TokenTrajectory traj;
  traj.query_id = query.id;
  TokenSeq context = query.prompt;
  for (int j = 0; j < decode.max_len; ++j) {
    const SampledToken s = sample_token(policy, context, decode, rng);
    traj.tokens.push_back(s.token);
    traj.logprobs.push_back(s.logprob);
    context.push_back(s.token);
    if (s.token == vocab.eot) break;
  }
  traj.truncated = traj.tokens.empty() || traj.tokens.back() != vocab.eot;

  traj.reasoning_end = static_cast<int>(traj.tokens.size());
  for (int i = 0; i < static_cast<int>(traj.tokens.size()); ++i) {
    if (traj.tokens[i] == vocab.think_end) {
      traj.reasoning_end = i;
      break;
    }
  }
  traj.steps = segment_steps(traj.tokens, traj.reasoning_end, vocab.delim);
  return traj;
}

TabularPolicy::TabularPolicy(int context_order, int table_rows, int vocab_size, double temperature)
    : context_order_(context_order),
      table_rows_(table_rows),
      vocab_size_(vocab_size),
      temperature_(temperature),
      logits_(std::size_t(table_rows) * vocab_size, 0.0) {
  if (context_order < 1) throw std::invalid_argument("context_order must be >= 1");
  if (table_rows < 1 || (table_rows & (table_rows - 1)) != 0)
    throw std::invalid_argument("table_rows must be a positive power of two");
  if (vocab_size < 2) throw std::invalid_argument("vocab_size must be >= 2");
  if (temperature <= 0.0) throw std::invalid_argument("temperature must be > 0");

  // Prefer a collision-free row function whenever the window space fits.
  const std::uint64_t base = static_cast<std::uint64_t>(vocab_size) + 1;
  std::uint64_t span = 1;
  packed_rows_ = true;
  for (int i = 0; i < context_order; ++i) {
    if (span > static_cast<std::uint64_t>(table_rows) / base) {
      packed_rows_ = false;
      break;
    }
    span *= base;
  }
  packed_rows_ = packed_rows_ && span <= static_cast<std::uint64_t>(table_rows);
}

std::uint32_t TabularPolicy::row_of(std::span<const Token> context) const {
  const int len = static_cast<int>(context.size());
  if (packed_rows_) {
    // Injective positional packing: every distinct window owns its own row.
    const std::uint64_t base = static_cast<std::uint64_t>(vocab_size_) + 1;
    std::uint64_t idx = 0;
    for (int i = len - context_order_; i < len; ++i) {
      const Token t = i >= 0 ? context[i] : kPadToken;
      idx = idx * base + static_cast<std::uint64_t>(static_cast<std::int64_t>(t) + 1);
    }
    return static_cast<std::uint32_t>(idx);
  }
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (int i = len - context_order_; i < len; ++i) {
    const Token t = i >= 0 ? context[i] : kPadToken;
    h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(t) + 1));
  }
  return static_cast<std::uint32_t>(h & static_cast<std::uint64_t>(table_rows_ - 1));
}

std::vector<double> TabularPolicy::next_token_distribution(std::span<const Token> context) const {
  std::vector<double> dist;
  softmax_scaled(row(row_of(context)), 1.0 / temperature_, dist);
  return dist;
}

std::vector<double> TabularPolicy::distribution_of_row(std::uint32_t r, double temperature) const {
  std::vector<double> dist;
  softmax_scaled(row(r), 1.0 / temperature, dist);
  return dist;
}

std::pair<double, std::vector<double>> TabularPolicy::logprob_and_grad(
    std::span<const Token> context, Token token) const {
  if (token < 0 || token >= vocab_size_) throw std::invalid_argument("token outside vocab");
  std::vector<double> p;
  softmax_scaled(row(row_of(context)), 1.0 / temperature_, p);
  const double lp = std::log(p[token]);
  std::vector<double> grad(p.size());
  const double inv_t = 1.0 / temperature_;
  for (std::size_t i = 0; i < p.size(); ++i) grad[i] = -p[i] * inv_t;
  grad[token] += inv_t;
  return {lp, std::move(grad)};
}

std::pair<double, std::vector<double>> TabularPolicy::logprob_and_grad_decoded(
    std::span<const Token> context, Token token, const DecodeConfig& decode) const {
  if (token < 0 || token >= vocab_size_) throw std::invalid_argument("token outside vocab");
  std::vector<double> q = next_token_distribution(context);
  filter_distribution(q, decode);
  const double lp = std::log(q[token]);
  std::vector<double> grad(q.size(), 0.0);
  const double inv_t = 1.0 / decode.temperature;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q[i] > 0.0) grad[i] = -q[i] * inv_t;
  grad[token] += inv_t;  // sampled token is always in the support
  return {lp, std::move(grad)};
}

namespace {
constexpr char kCheckpointMagic[8] = {'S', 'P', 'A', 'E', 'P', 'O', 'L', '1'};
}

void TabularPolicy::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint32_t header[3] = {static_cast<std::uint32_t>(context_order_),
                                   static_cast<std::uint32_t>(table_rows_),
                                   static_cast<std::uint32_t>(vocab_size_)};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(&temperature_), sizeof(double));
  out.write(reinterpret_cast<const char*>(logits_.data()),
            static_cast<std::streamsize>(logits_.size() * sizeof(double)));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

TabularPolicy TabularPolicy::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a policy checkpoint: " + path);
  std::uint32_t header[3];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  double temperature = 1.0;
  in.read(reinterpret_cast<char*>(&temperature), sizeof(double));
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path);
  TabularPolicy policy(static_cast<int>(header[0]), static_cast<int>(header[1]),
                       static_cast<int>(header[2]), temperature);
  in.read(reinterpret_cast<char*>(policy.logits_.data()),
          static_cast<std::streamsize>(policy.logits_.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated checkpoint payload: " + path);
  return policy;
}

void OverCheckPrior::validate() const {
  auto check01 = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument(std::string(name) + " must lie in [0,1]");
  };
  check01(solve_acc, "solve_acc");
  check01(loop_prob, "loop_prob");
  check01(recheck_prob, "recheck_prob");
  check01(flip_prob, "flip_prob");
  check01(probe_first_spread, "probe_first_spread");
}

namespace {

// Logit floor for tokens a pattern rules out; exp(floor - anything sane)
// underflows to exactly zero probability.
constexpr double kFloorLogit = -1e3;

struct PatternEntry {
  Token token;
  double prob;
};

// Writes one context pattern: plausible tokens get ln(prob) (duplicate
// targets sum their mass first), every other token gets the floor.
void add_pattern(TabularPolicy& policy, std::initializer_list<Token> window,
                 std::initializer_list<PatternEntry> entries) {
  const std::vector<Token> ctx(window);
  auto row = policy.row(policy.row_of(ctx));
  std::vector<double> mass(row.size(), 0.0);
  for (const PatternEntry& e : entries) mass[e.token] += e.prob;
  for (std::size_t t = 0; t < row.size(); ++t)
    row[t] += mass[t] > 0.0 ? std::log(mass[t]) : kFloorLogit;
}

}  // namespace

void apply_overcheck_prior(TabularPolicy& policy, const TaskSpec& spec,
                           const OverCheckPrior& prior) {
  prior.validate();
  spec.validate();
  if (spec.chain_length != 1)
    throw std::invalid_argument("overcheck prior requires chain_length == 1");

  const Vocab& v = spec.vocab;
  const int M = spec.modulus;
  if (policy.vocab_size() < v.size) throw std::invalid_argument("policy vocab too small for task");

  auto op_tokens = [&]() {
    std::vector<Token> ts;
    for (ChainOp op : spec.ops)
      ts.push_back(op == ChainOp::Add ? v.op_add : op == ChainOp::Sub ? v.op_sub : v.op_mul);
    return ts;
  }();
  auto apply_chain = [&](Token opt, int lhs, int rhs) {
    if (opt == v.op_add) return (lhs + rhs) % M;
    if (opt == v.op_sub) return ((lhs - rhs) % M + M) % M;
    return (lhs * rhs) % M;
  };
  auto up = [&](int d) { return Token((d + 1) % M); };
  auto down = [&](int d) { return Token((d + M - 1) % M); };
  auto pat = [&](std::initializer_list<Token> w, std::initializer_list<PatternEntry> e) {
    add_pattern(policy, w, e);
  };

  const double half_miss = (1.0 - prior.solve_acc) / 2.0;
  const double half_flip = prior.flip_prob / 2.0;
  const double half_spread = prior.probe_first_spread / 2.0;

  for (int v0 = 0; v0 < M; ++v0) {
    for (Token opt : op_tokens) {
      for (int a = 0; a < M; ++a) {
        const int t = apply_chain(opt, v0, a);
        // Solve step: the true value with off-by-one slips.
        pat({kPadToken, v0, opt, a},
            {{t, prior.solve_acc}, {up(t), half_miss}, {down(t), half_miss}});
        // Delimiter after any reachable solve value.
        for (Token u : {down(t), Token(t), up(t)}) pat({v0, opt, a, u}, {{v.delim, 1.0}});
      }
      // Decision after the solve step's delimiter: keep checking or stop.
      for (int a = 0; a < M; ++a)
        for (int u = 0; u < M; ++u)
          pat({opt, a, u, v.delim},
              {{v.wait, prior.loop_prob}, {v.think_end, 1.0 - prior.loop_prob}});
    }
  }

  for (int u = 0; u < M; ++u) {
    // Value copy entering a checking loop, with neighbor slips. The x slot is
    // the last prompt digit (first loop) or WAIT (later loops).
    for (int x = 0; x <= M; ++x) {
      const Token xs = x == M ? v.wait : Token(x);
      pat({xs, u, v.delim, v.wait},
          {{u, 1.0 - prior.flip_prob}, {up(u), half_flip}, {down(u), half_flip}});
    }
    // Delimiter after the copied value.
    for (Token w : {down(u), Token(u), up(u)}) pat({u, v.delim, v.wait, w}, {{v.delim, 1.0}});
    // Decision after a checking loop's delimiter.
    pat({v.delim, v.wait, u, v.delim},
        {{v.wait, prior.recheck_prob}, {v.think_end, 1.0 - prior.recheck_prob}});

    // Summary: ANSWER, the committed value, EOT.
    for (int x = 0; x <= M; ++x) {
      const Token xs = x == M ? v.wait : Token(x);
      pat({xs, u, v.delim, v.think_end}, {{v.answer, 1.0}});
    }
    pat({u, v.delim, v.think_end, v.answer}, {{u, 1.0}});
    pat({v.delim, v.think_end, v.answer, u}, {{v.eot, 1.0}});

    // Probe rows: uncommitted right after the solve step (x = prompt digit),
    // committed at checking-step boundaries (x = WAIT).
    for (int a = 0; a < M; ++a)
      pat({a, u, v.delim, v.answer},
          {{u, 1.0 - prior.probe_first_spread}, {up(u), half_spread}, {down(u), half_spread}});
    pat({v.wait, u, v.delim, v.answer}, {{u, 1.0}});
    // A consistent probe answer ends crisply; inconsistent ones are left
    // diffuse (their rows stay uniform).
    pat({u, v.delim, v.answer, u}, {{v.eot, 1.0}});
  }
}

}  // namespace spae
