// SPDX-License-Identifier: Apache-2.0
//
// Advantage estimators: group-relative baselines (GRPO / group mean), the
// SPAE saturation penalty and difference shaping, and global batch
// normalization (RF-B style).

#pragma once

#include <span>
#include <vector>

#include "spae/core_model.hpp"
#include "spae/potential.hpp"

namespace spae {

struct SpaeConfig {
  double xi = 0.5;        // shaping weight
  double alpha = 0.5;     // saturation penalty strength
  double eps_sat = 0.9;   // shared with PotentialSeries
  double eps_norm = 1e-8; // stabilizer in the global normalization

  void validate() const;
};

struct AdvantageTensor {
  enum class Stage { RawSpae, Final };
  std::vector<std::vector<double>> per_token;  // [trajectory][token]
  Stage stage = Stage::RawSpae;

  std::size_t total_tokens() const;
};

// A_i = R_i - mean(R). Defined for G >= 1.
std::vector<double> group_advantage(std::span<const double> rewards);

// (R_i - mean) / population std; an all-equal group maps to zeros.
// Throws std::invalid_argument for G < 2.
std::vector<double> grpo_advantage(std::span<const double> rewards);

// f = 1 - alpha * (1 - exp(-c_sat)).
double saturation_penalty_factor(int c_sat, double alpha);

// Deltas for steps 2..K (size K-1); step 1 has no delta.
std::vector<double> potential_deltas(const PotentialSeries& series);

// Min-max normalizes the batch delta population to [0,1] (all-equal
// populations collapse to 0), exponentiates and centers on the batch mean.
// Output is aligned with the input; an empty population yields an empty
// result.
std::vector<double> shaping_signal(std::span<const double> batch_deltas);

// Raw SPAE token advantages (Stage::RawSpae): for token j in step k,
// A = A_group * f(C_sat) + xi * g(delta phi at k); step 1 and summary tokens
// carry g = 0, summary tokens also f = 1.
AdvantageTensor spae_token_advantages(std::span<const double> group_advantages,
                                      std::span<const PotentialSeries> series,
                                      std::span<const StepIndexMap> step_maps,
                                      const SpaeConfig& cfg);

// Subtracts the token-level batch mean and divides by population std +
// eps_norm, yielding Stage::Final.
AdvantageTensor batch_normalize(const AdvantageTensor& raw, double eps_norm);

// RF-B: broadcast group advantages to tokens, then global normalization.
// Identical pipeline to SPAE with xi = 0, alpha = 0.
AdvantageTensor rfb_advantages(std::span<const double> group_advantages,
                               std::span<const StepIndexMap> step_maps, double eps_norm);

}  // namespace spae
