#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dpmn/param.hpp"

namespace dpmn {

// Linear sparsity ramp with optional gradient-driven regrowth.
struct PruneSchedule {
  double target_sparsity = 0.5;
  std::int64_t start_round = 10;
  std::int64_t ramp_rounds = 50;
  double regrow_fraction = 0.0;

  std::vector<std::string> validate() const {
    std::vector<std::string> issues;
    if (!(target_sparsity >= 0.0 && target_sparsity < 1.0))
      issues.emplace_back("pruning.target_sparsity must be in [0, 1)");
    if (start_round < 0) issues.emplace_back("pruning.start_round must be >= 0");
    if (ramp_rounds < 1) issues.emplace_back("pruning.ramp_rounds must be >= 1");
    if (!(regrow_fraction >= 0.0 && regrow_fraction <= 1.0))
      issues.emplace_back("pruning.regrow_fraction must be in [0, 1]");
    return issues;
  }

  // s(round): 0 before start_round, target after start_round + ramp_rounds.
  double sparsity_at(std::int64_t round) const noexcept {
    if (round <= start_round) return 0.0;
    const double t = std::min(1.0, static_cast<double>(round - start_round) / static_cast<double>(ramp_rounds));
    return t * target_sparsity;
  }

  bool fully_ramped(std::int64_t round) const noexcept { return round >= start_round + ramp_rounds; }
};

// Number of coordinates retained at sparsity s: ceil((1 - s) d), at least one.
inline std::size_t retained_count(double s, std::size_t d) {
  if (d == 0) return 0;
  const auto dropped = static_cast<std::size_t>(std::floor(s * static_cast<double>(d) + 1e-9));
  return std::clamp<std::size_t>(d - std::min(dropped, d), 1, d);
}

// Magnitude pruning with regrowth. The retained budget is split into the
// largest-|x| coordinates and, when regrow_fraction > 0, a slice re-enabled
// from the previously pruned set by largest |gradient|. Total kept is always
// retained_count(s(round), d). Ties go to the lower coordinate index.
inline PruneMask compute_mask(const ParamVector& x, const PruneSchedule& schedule, std::int64_t round,
                              const PruneMask& prev_mask, std::span<const double> gradient = {}) {
  const std::size_t d = x.size();
  require_same_size(d, prev_mask.size());
  if (!gradient.empty()) require_same_size(d, gradient.size());
  if (round < schedule.start_round) return PruneMask::ones(d);

  const std::size_t keep = retained_count(schedule.sparsity_at(round), d);
  std::size_t regrow = 0;
  if (!gradient.empty() && schedule.regrow_fraction > 0.0) {
    regrow = static_cast<std::size_t>(std::floor(schedule.regrow_fraction * static_cast<double>(d - keep)));
    regrow = std::min(regrow, keep - 1);
  }

  std::vector<std::size_t> by_magnitude(d);
  std::iota(by_magnitude.begin(), by_magnitude.end(), std::size_t{0});
  std::stable_sort(by_magnitude.begin(), by_magnitude.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(x[a]) > std::abs(x[b]); });

  PruneMask mask = PruneMask::zeros(d);
  const std::size_t by_size = keep - regrow;
  for (std::size_t t = 0; t < by_size; ++t) mask.set(by_magnitude[t], true);
  if (regrow == 0) return mask;

  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < d; ++k) {
    if (!mask[k] && !prev_mask[k]) candidates.push_back(k);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(gradient[a]) > std::abs(gradient[b]); });
  std::size_t grown = 0;
  for (std::size_t t = 0; t < candidates.size() && grown < regrow; ++t, ++grown) mask.set(candidates[t], true);
  // Not enough previously pruned coordinates: fill the rest by magnitude.
  for (std::size_t t = by_size; t < d && grown < regrow; ++t) {
    if (!mask[by_magnitude[t]]) {
      mask.set(by_magnitude[t], true);
      ++grown;
    }
  }
  return mask;
}

}  // namespace dpmn
