// SPDX-License-Identifier: Apache-2.0

#include "spae/advantage.hpp"

#include <cmath>
#include <stdexcept>

#include "spae/kernels.hpp"

namespace spae {

void SpaeConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0,1]");
  if (!(xi >= 0.0)) throw std::invalid_argument("xi must be >= 0");
  if (!(eps_norm > 0.0)) throw std::invalid_argument("eps_norm must be > 0");
}

std::size_t AdvantageTensor::total_tokens() const {
  std::size_t n = 0;
  for (const auto& t : per_token) n += t.size();
  return n;
}

std::vector<double> group_advantage(std::span<const double> rewards) {
  if (rewards.empty()) throw std::invalid_argument("empty reward group");
  const double mean = kern::reduce_sum(rewards.data(), rewards.size()) / rewards.size();
  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = rewards[i] - mean;
  return adv;
}

std::vector<double> grpo_advantage(std::span<const double> rewards) {
  if (rewards.size() < 2) throw std::invalid_argument("GRPO needs a group of size >= 2");
  const double mean = kern::reduce_sum(rewards.data(), rewards.size()) / rewards.size();
  const double var = kern::sum_sq_dev(rewards.data(), rewards.size(), mean) / rewards.size();
  std::vector<double> adv(rewards.size(), 0.0);
  if (var == 0.0) return adv;  // degenerate group: zero advantage, never NaN
  const double inv_std = 1.0 / std::sqrt(var);
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) * inv_std;
  return adv;
}

double saturation_penalty_factor(int c_sat, double alpha) {
  if (c_sat < 0) throw std::invalid_argument("saturation count must be >= 0");
  return 1.0 - alpha * (1.0 - std::exp(-static_cast<double>(c_sat)));
}

std::vector<double> potential_deltas(const PotentialSeries& series) {
  std::vector<double> deltas;
  if (series.num_steps() < 2) return deltas;
  deltas.reserve(series.num_steps() - 1);
  for (int k = 1; k < series.num_steps(); ++k)
    deltas.push_back(series.phi[k] - series.phi[k - 1]);
  return deltas;
}

std::vector<double> shaping_signal(std::span<const double> batch_deltas) {
  const std::size_t n = batch_deltas.size();
  std::vector<double> g(n, 0.0);
  if (n == 0) return g;

  const double lo = kern::reduce_min(batch_deltas.data(), n);
  const double hi = kern::reduce_max(batch_deltas.data(), n);
  const double range = hi - lo;

  double mean_exp = 0.0;
  if (range == 0.0) {
    // No relative ordering information: all normalized deltas collapse to 0.
    mean_exp = 1.0;
    for (std::size_t i = 0; i < n; ++i) g[i] = 1.0;
  } else {
    const double inv_range = 1.0 / range;
    for (std::size_t i = 0; i < n; ++i) g[i] = std::exp((batch_deltas[i] - lo) * inv_range);
    mean_exp = kern::reduce_sum(g.data(), n) / static_cast<double>(n);
  }
  for (std::size_t i = 0; i < n; ++i) g[i] -= mean_exp;
  return g;
}

AdvantageTensor spae_token_advantages(std::span<const double> group_advantages,
                                      std::span<const PotentialSeries> series,
                                      std::span<const StepIndexMap> step_maps,
                                      const SpaeConfig& cfg) {
  cfg.validate();
  const std::size_t n_traj = group_advantages.size();
  if (series.size() != n_traj || step_maps.size() != n_traj)
    throw std::invalid_argument("mismatched advantage inputs");

  // Batch-wide shaping population: deltas of steps k >= 2 across all
  // trajectories, in trajectory order.
  std::vector<double> deltas;
  std::vector<std::size_t> delta_base(n_traj, 0);
  for (std::size_t i = 0; i < n_traj; ++i) {
    delta_base[i] = deltas.size();
    const std::vector<double> d = potential_deltas(series[i]);
    deltas.insert(deltas.end(), d.begin(), d.end());
  }
  const std::vector<double> g = shaping_signal(deltas);

  AdvantageTensor tensor;
  tensor.stage = AdvantageTensor::Stage::RawSpae;
  tensor.per_token.resize(n_traj);
  for (std::size_t i = 0; i < n_traj; ++i) {
    const auto& map = step_maps[i].token_to_step;
    auto& out = tensor.per_token[i];
    out.resize(map.size());

    // Per-step factors for this trajectory.
    const int num_steps = series[i].num_steps();
    std::vector<double> f_k(num_steps), g_k(num_steps, 0.0);
    for (int k = 1; k <= num_steps; ++k) {
      f_k[k - 1] = saturation_penalty_factor(saturation_count(series[i], k), cfg.alpha);
      if (k >= 2) g_k[k - 1] = g[delta_base[i] + (k - 2)];
    }

    for (std::size_t j = 0; j < map.size(); ++j) {
      const int k = map[j];
      if (k == kSummaryStep) {
        out[j] = group_advantages[i] * 1.0 + cfg.xi * 0.0;
      } else {
        if (k < 1 || k > num_steps)
          throw std::invalid_argument("step map references a step without potential");
        out[j] = group_advantages[i] * f_k[k - 1] + cfg.xi * g_k[k - 1];
      }
    }
  }
  return tensor;
}

AdvantageTensor batch_normalize(const AdvantageTensor& raw, double eps_norm) {
  const std::size_t total = raw.total_tokens();
  if (total == 0) throw std::invalid_argument("cannot normalize an empty batch");

  std::vector<double> flat;
  flat.reserve(total);
  for (const auto& t : raw.per_token) flat.insert(flat.end(), t.begin(), t.end());

  const double mean = kern::reduce_sum(flat.data(), total) / static_cast<double>(total);
  const double var = kern::sum_sq_dev(flat.data(), total, mean) / static_cast<double>(total);
  const double scale = 1.0 / (std::sqrt(var) + eps_norm);

  AdvantageTensor out;
  out.stage = AdvantageTensor::Stage::Final;
  out.per_token.resize(raw.per_token.size());
  for (std::size_t i = 0; i < raw.per_token.size(); ++i) {
    const auto& src = raw.per_token[i];
    out.per_token[i].resize(src.size());
    kern::scale_shift(out.per_token[i].data(), src.data(), src.size(), mean, scale);
  }
  return out;
}

AdvantageTensor rfb_advantages(std::span<const double> group_advantages,
                               std::span<const StepIndexMap> step_maps, double eps_norm) {
  if (group_advantages.size() != step_maps.size())
    throw std::invalid_argument("mismatched advantage inputs");
  AdvantageTensor raw;
  raw.stage = AdvantageTensor::Stage::RawSpae;
  raw.per_token.resize(group_advantages.size());
  for (std::size_t i = 0; i < group_advantages.size(); ++i)
    raw.per_token[i].assign(step_maps[i].token_to_step.size(), group_advantages[i]);
  return batch_normalize(raw, eps_norm);
}

}  // namespace spae
