// SPDX-License-Identifier: Apache-2.0

#include "spae/potential.hpp"

#include <stdexcept>

namespace spae {

double step_potential(double acc, double conf) {
  if (!(acc >= 0.0 && acc <= 1.0) || !(conf >= 0.0 && conf <= 1.0))
    throw std::domain_error("step_potential inputs must lie in [0,1]");
  return 1.5 * acc * conf + 0.5 * acc - conf;
}

PotentialSeries make_potential_series(std::span<const ProbeRecord> records, double eps_sat) {
  PotentialSeries series;
  series.eps_sat = eps_sat;
  series.phi.reserve(records.size());
  for (const ProbeRecord& rec : records)
    series.phi.push_back(step_potential(rec.correctness, rec.confidence));
  return series;
}

PhaseLabels classify_phases(const PotentialSeries& series) {
  PhaseLabels labels;
  labels.step_phase.resize(series.phi.size(), Phase::Solving);
  bool saturated_before = false;
  for (std::size_t i = 0; i < series.phi.size(); ++i) {
    if (saturated_before) labels.step_phase[i] = Phase::Checking;
    if (series.phi[i] > series.eps_sat) saturated_before = true;
  }
  return labels;
}

bool detect_r2w(const PotentialSeries& series, int reward) {
  if (reward != 0) return false;
  for (double phi : series.phi)
    if (phi > series.eps_sat) return true;
  return false;
}

int saturation_count(const PotentialSeries& series, int k) {
  if (k < 1 || k > series.num_steps()) throw std::out_of_range("step index outside [1, K]");
  int count = 0;
  for (int t = 0; t < k - 1; ++t)
    if (series.phi[t] > series.eps_sat) ++count;
  return count;
}

std::optional<int> first_saturated_step(const PotentialSeries& series) {
  for (int i = 0; i < series.num_steps(); ++i)
    if (series.phi[i] > series.eps_sat) return i + 1;
  return std::nullopt;
}

}  // namespace spae
