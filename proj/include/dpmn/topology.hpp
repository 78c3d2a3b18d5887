#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpmn/errors.hpp"
#include "dpmn/parallel.hpp"
#include "dpmn/param.hpp"
#include "dpmn/rng.hpp"

namespace dpmn {

enum class TopologyStrategy { cosine_threshold, euclidean_nearest, random_k, static_full, static_ring };

inline std::string to_string(TopologyStrategy s) {
  switch (s) {
    case TopologyStrategy::cosine_threshold:
      return "cosine-threshold";
    case TopologyStrategy::euclidean_nearest:
      return "euclidean-nearest";
    case TopologyStrategy::random_k:
      return "random-k";
    case TopologyStrategy::static_full:
      return "static-full";
    case TopologyStrategy::static_ring:
      return "static-ring";
  }
  return "?";
}

inline bool is_static(TopologyStrategy s) noexcept {
  return s == TopologyStrategy::static_full || s == TopologyStrategy::static_ring;
}

struct TopologyConfig {
  TopologyStrategy strategy = TopologyStrategy::cosine_threshold;
  double delta = 0.2;
  std::size_t k = 2;
  std::size_t max_neighbors = 4;  // ignored by the static graphs
  // Rebuild the graph every `period` rounds.
  std::size_t period = 1;

  std::vector<std::string> validate(std::size_t num_devices) const {
    std::vector<std::string> issues;
    if (!(delta >= -1.0 && delta <= 1.0)) issues.emplace_back("topology.delta must be in [-1, 1]");
    if (k < 1) issues.emplace_back("topology.k must be >= 1");
    if (num_devices >= 2 && k > num_devices - 1 &&
        (strategy == TopologyStrategy::euclidean_nearest || strategy == TopologyStrategy::random_k))
      issues.emplace_back("topology.k must be <= N - 1 (" + std::to_string(num_devices - 1) + ")");
    if (max_neighbors < 1) issues.emplace_back("topology.max_neighbors must be >= 1");
    if (period < 1) issues.emplace_back("topology.period must be >= 1");
    return issues;
  }
};

// Directed neighbor sets: adjacency[i] = S_i, ascending device id.
struct NeighborGraph {
  std::int64_t round = 0;
  std::vector<std::vector<std::size_t>> adjacency;

  std::size_t num_devices() const noexcept { return adjacency.size(); }

  std::size_t num_edges() const noexcept {
    std::size_t n = 0;
    for (const auto& s : adjacency) n += s.size();
    return n;
  }

  // (i, j) pairs with j in S_i, ordered by i then j.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < adjacency.size(); ++i)
      for (auto j : adjacency[i]) out.emplace_back(i, j);
    return out;
  }

  bool has_edge(std::size_t i, std::size_t j) const {
    return std::binary_search(adjacency[i].begin(), adjacency[i].end(), j);
  }

  friend bool operator==(const NeighborGraph&, const NeighborGraph&) = default;
};

inline NeighborGraph empty_graph(std::size_t num_devices, std::int64_t round = 0) {
  NeighborGraph g;
  g.round = round;
  g.adjacency.resize(num_devices);
  return g;
}

// Standard cosine similarity, clamped to [-1, 1]. A zero vector has similarity 0.
inline double cosine_similarity(const ParamVector& a, const ParamVector& b) {
  require_same_size(a.size(), b.size());
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

// Cosine similarity restricted to the overlap support of the two masks.
inline double cosine_similarity(const ParamVector& a, const PruneMask& ma, const ParamVector& b,
                                const PruneMask& mb) {
  require_same_size(a.size(), b.size());
  require_same_size(a.size(), ma.size());
  require_same_size(a.size(), mb.size());
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!(ma[k] && mb[k])) continue;
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

// Euclidean distance restricted to the overlap support.
inline double overlap_distance(const ParamVector& a, const PruneMask& ma, const ParamVector& b,
                               const PruneMask& mb) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (ma[k] && mb[k]) {
      const double diff = a[k] - b[k];
      s += diff * diff;
    }
  }
  return std::sqrt(s);
}

namespace detail {

// Symmetric pairwise score matrix, upper triangle computed in parallel.
template <typename Score>
std::vector<double> pairwise(std::size_t n, std::size_t workers, Score&& score) {
  std::vector<double> m(n * n, 0.0);
  parallel_for(n, workers, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) m[i * n + j] = score(i, j);
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) m[i * n + j] = m[j * n + i];
  return m;
}

// Picks up to `limit` candidates by score (higher first when `descending`),
// ties to the lower id, and returns them in ascending id order.
inline std::vector<std::size_t> top_by_score(std::vector<std::size_t> candidates, std::span<const double> row,
                                             std::size_t limit, bool descending) {
  std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    return descending ? row[a] > row[b] : row[a] < row[b];
  });
  if (candidates.size() > limit) candidates.resize(limit);
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

}  // namespace detail

// Builds S_i for every device from the current (masked) models. `seed` feeds
// random-k only; the per-device stream is derived from (seed, round, i).
inline NeighborGraph build_neighbors(std::span<const ParamVector> models, std::span<const PruneMask> masks,
                                     const TopologyConfig& config, std::uint64_t seed, std::int64_t round = 0,
                                     std::size_t workers = 1) {
  const std::size_t n = models.size();
  require_same_size(n, masks.size());
  NeighborGraph g = empty_graph(n, round);
  if (n < 2) return g;

  switch (config.strategy) {
    case TopologyStrategy::static_full:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (j != i) g.adjacency[i].push_back(j);
      break;
    case TopologyStrategy::static_ring:
      for (std::size_t i = 0; i < n; ++i) {
        auto& s = g.adjacency[i];
        s.push_back((i + n - 1) % n);
        s.push_back((i + 1) % n);
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
      }
      break;
    case TopologyStrategy::cosine_threshold: {
      const auto sim = detail::pairwise(n, workers, [&](std::size_t i, std::size_t j) {
        return cosine_similarity(models[i], masks[i], models[j], masks[j]);
      });
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = std::span<const double>(sim).subspan(i * n, n);
        std::vector<std::size_t> admitted;
        for (std::size_t j = 0; j < n; ++j)
          if (j != i && row[j] >= config.delta) admitted.push_back(j);
        g.adjacency[i] = detail::top_by_score(std::move(admitted), row, config.max_neighbors, true);
      }
      break;
    }
    case TopologyStrategy::euclidean_nearest: {
      const auto dist = detail::pairwise(n, workers, [&](std::size_t i, std::size_t j) {
        return overlap_distance(models[i], masks[i], models[j], masks[j]);
      });
      const std::size_t limit = std::min({config.k, config.max_neighbors, n - 1});
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < n; ++j)
          if (j != i) others.push_back(j);
        g.adjacency[i] =
            detail::top_by_score(std::move(others), std::span<const double>(dist).subspan(i * n, n), limit, false);
      }
      break;
    }
    case TopologyStrategy::random_k: {
      const std::size_t limit = std::min({config.k, config.max_neighbors, n - 1});
      for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, Stream::kTopology, {static_cast<std::uint64_t>(round), i}));
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < n; ++j)
          if (j != i) others.push_back(j);
        // Partial Fisher-Yates: the first `limit` slots are a uniform draw without replacement.
        for (std::size_t t = 0; t < limit; ++t) {
          const auto pick = t + static_cast<std::size_t>(rng.below(others.size() - t));
          std::swap(others[t], others[pick]);
        }
        others.resize(limit);
        std::sort(others.begin(), others.end());
        g.adjacency[i] = std::move(others);
      }
      break;
    }
  }
  return g;
}

// Checks the structural invariants; returns a list of violations.
inline std::vector<std::string> check_graph(const NeighborGraph& g, const TopologyConfig& config) {
  std::vector<std::string> issues;
  const std::size_t n = g.num_devices();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = g.adjacency[i];
    if (!is_static(config.strategy) && s.size() > config.max_neighbors)
      issues.push_back("device " + std::to_string(i) + " exceeds max_neighbors");
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (s[t] == i) issues.push_back("self-loop at device " + std::to_string(i));
      if (s[t] >= n) issues.push_back("device " + std::to_string(i) + " references unknown id");
      if (t > 0 && s[t - 1] >= s[t]) issues.push_back("adjacency of device " + std::to_string(i) + " not sorted/unique");
    }
  }
  return issues;
}

}  // namespace dpmn
