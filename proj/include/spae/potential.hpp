// SPDX-License-Identifier: Apache-2.0
//
// Step Potential, solving/checking phase classification, right-to-wrong
// detection and saturation counting.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "spae/probe.hpp"

namespace spae {

struct PotentialSeries {
  std::vector<double> phi;  // phi[k-1] is the potential of step k
  double eps_sat = 0.9;

  int num_steps() const { return static_cast<int>(phi.size()); }
};

enum class Phase : std::uint8_t { Solving, Checking };

struct PhaseLabels {
  std::vector<Phase> step_phase;  // per step, 1-based step k at index k-1
};

// Phi = 1.5*acc*conf + 0.5*acc - conf, bounded in [-1, 1].
// Throws std::domain_error when inputs leave [0, 1].
double step_potential(double acc, double conf);

PotentialSeries make_potential_series(std::span<const ProbeRecord> records, double eps_sat);

// Step k is CHECKING iff some strictly earlier step exceeded eps_sat.
PhaseLabels classify_phases(const PotentialSeries& series);

// max_k phi > eps_sat with a zero terminal reward.
bool detect_r2w(const PotentialSeries& series, int reward);

// Number of steps t < k with phi_t > eps_sat. k is 1-based in [1, K].
int saturation_count(const PotentialSeries& series, int k);

// Earliest saturated step (k_probe); empty when the series never saturates.
std::optional<int> first_saturated_step(const PotentialSeries& series);

}  // namespace spae
