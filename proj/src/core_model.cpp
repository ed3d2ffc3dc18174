// SPDX-License-Identifier: Apache-2.0

#include "spae/core_model.hpp"

#include <stdexcept>

namespace spae {

void Vocab::validate() const {
  if (size < 8) throw std::invalid_argument("vocab size must be >= 8");
  if (digit_capacity < 2 || digit_capacity > size)
    throw std::invalid_argument("digit capacity out of range");
  const Token reserved[] = {delim, answer, think_end, eot, wait};
  for (int i = 0; i < 5; ++i) {
    if (reserved[i] < 0 || reserved[i] >= size)
      throw std::invalid_argument("reserved token id out of range");
    for (int j = i + 1; j < 5; ++j)
      if (reserved[i] == reserved[j]) throw std::invalid_argument("reserved token ids collide");
  }
}

std::vector<StepSpan> segment_steps(std::span<const Token> tokens, int reasoning_end, Token delim) {
  if (reasoning_end < 0 || reasoning_end > static_cast<int>(tokens.size()))
    throw std::invalid_argument("reasoning_end outside token sequence");
  std::vector<StepSpan> spans;
  int begin = 0;
  for (int i = 0; i < reasoning_end; ++i) {
    if (tokens[i] == delim) {
      spans.push_back({begin, i + 1});
      begin = i + 1;
    }
  }
  if (begin < reasoning_end) spans.push_back({begin, reasoning_end});
  return spans;
}

StepIndexMap map_token_to_step(const TokenTrajectory& trajectory) {
  StepIndexMap map;
  map.token_to_step.assign(trajectory.tokens.size(), kSummaryStep);
  for (int k = 0; k < trajectory.num_steps(); ++k) {
    const StepSpan& span = trajectory.steps[k];
    if (span.begin < 0 || span.end > static_cast<int>(trajectory.tokens.size()) ||
        span.begin > span.end)
      throw std::invalid_argument("step span outside trajectory");
    for (int j = span.begin; j < span.end; ++j) map.token_to_step[j] = k + 1;
  }
  return map;
}

}  // namespace spae
