#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dpmn/errors.hpp"
#include "dpmn/rng.hpp"

namespace dpmn {

// Local data of one device: row-major n x p features plus labels. Labels are
// class indices stored as doubles for classification (num_classes > 0) and
// real targets for regression (num_classes == 0).
struct DatasetShard {
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  std::vector<double> features;
  std::vector<double> labels;
  std::int64_t owner = -1;
  // Row indices into the pool this shard was cut from (empty for generated data).
  std::vector<std::size_t> source_index;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  bool is_classification() const noexcept { return num_classes > 0; }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * feature_dim, feature_dim);
  }
  std::size_t label_class(std::size_t i) const { return static_cast<std::size_t>(labels[i]); }

  void append_row(std::span<const double> x, double y) {
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(y);
  }

  // Throws ConsistencyError if any shape, finiteness or label-range rule is broken.
  void validate() const {
    if (features.size() != labels.size() * feature_dim)
      throw ConsistencyError("shard of device " + std::to_string(owner) +
                             ": feature matrix size does not match n x p");
    for (double v : features) {
      if (!std::isfinite(v))
        throw ConsistencyError("shard of device " + std::to_string(owner) + ": non-finite feature");
    }
    for (double y : labels) {
      if (!std::isfinite(y))
        throw ConsistencyError("shard of device " + std::to_string(owner) + ": non-finite label");
      if (num_classes > 0 && (y < 0 || y >= static_cast<double>(num_classes) || y != std::floor(y)))
        throw ConsistencyError("shard of device " + std::to_string(owner) +
                               ": label outside [0, " + std::to_string(num_classes) + ")");
    }
  }
};

enum class TaskKind { regression, classification };
enum class ClusterAssignment { round_robin, contiguous };

// Clustered synthetic task. Devices in one cluster share a ground-truth
// parameter vector; clusters are correlated through a shared component.
struct SyntheticSpec {
  std::size_t num_devices = 8;
  std::size_t num_clusters = 2;
  ClusterAssignment assignment = ClusterAssignment::round_robin;
  TaskKind task = TaskKind::regression;
  std::size_t num_classes = 2;  // classification only
  std::size_t feature_dim = 10;
  std::size_t samples_per_device = 50;
  std::size_t test_samples_per_device = 100;
  double noise_scale = 0.1;
  double signal_scale = 1.0;
  // Fraction of ground-truth coordinates that are nonzero (per cluster, random support).
  double support_fraction = 1.0;
  // Weight of the component shared by all clusters; cross-cluster cosine is about this value.
  double cluster_correlation = 0.0;

  std::vector<std::string> validate() const {
    std::vector<std::string> issues;
    if (num_devices < 1) issues.emplace_back("synthetic.num_devices must be >= 1");
    if (num_clusters < 1) issues.emplace_back("synthetic.num_clusters must be >= 1");
    if (num_clusters > num_devices) issues.emplace_back("synthetic.num_clusters must be <= num_devices");
    if (feature_dim < 1) issues.emplace_back("synthetic.feature_dim must be >= 1");
    if (samples_per_device < 1) issues.emplace_back("synthetic.samples_per_device must be >= 1");
    if (task == TaskKind::classification && num_classes < 2)
      issues.emplace_back("synthetic.num_classes must be >= 2 for classification");
    if (!(noise_scale >= 0) || !std::isfinite(noise_scale))
      issues.emplace_back("synthetic.noise_scale must be finite and >= 0");
    if (!(signal_scale > 0) || !std::isfinite(signal_scale))
      issues.emplace_back("synthetic.signal_scale must be finite and > 0");
    if (!(support_fraction > 0 && support_fraction <= 1))
      issues.emplace_back("synthetic.support_fraction must be in (0, 1]");
    if (!(cluster_correlation >= 0 && cluster_correlation <= 1))
      issues.emplace_back("synthetic.cluster_correlation must be in [0, 1]");
    return issues;
  }

  // Length of one cluster's ground truth: p for regression, K*p for classification.
  std::size_t truth_dim() const noexcept {
    return task == TaskKind::regression ? feature_dim : num_classes * feature_dim;
  }
};

struct SyntheticTask {
  std::vector<DatasetShard> train;
  std::vector<DatasetShard> test;
  std::vector<std::size_t> cluster_of;
  // Per cluster. Regression: length p. Classification: K x p row-major.
  std::vector<std::vector<double>> ground_truth;
};

inline std::size_t cluster_for_device(const SyntheticSpec& spec, std::size_t device) {
  if (spec.assignment == ClusterAssignment::round_robin) return device % spec.num_clusters;
  // Contiguous blocks, sizes differing by at most one.
  return device * spec.num_clusters / spec.num_devices;
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double synthetic_label(const SyntheticSpec& spec, std::span<const double> truth,
                              std::span<const double> x, Rng& rng) {
  if (spec.task == TaskKind::regression) return dot(truth, x) + spec.noise_scale * rng.normal();
  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    const double score = dot(truth.subspan(c * spec.feature_dim, spec.feature_dim), x) +
                         spec.noise_scale * rng.normal();
    if (c == 0 || score > best_score) {
      best = c;
      best_score = score;
    }
  }
  return static_cast<double>(best);
}

}  // namespace detail

inline SyntheticTask generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (auto issues = spec.validate(); !issues.empty()) throw ConfigError(std::move(issues));

  const std::size_t q = spec.truth_dim();
  SyntheticTask task;

  Rng truth_rng(derive_seed(seed, Stream::kData, {0}));
  std::vector<double> shared(q);
  for (auto& v : shared) v = truth_rng.normal();
  const double a = std::sqrt(spec.cluster_correlation);
  const double b = std::sqrt(1.0 - spec.cluster_correlation);
  const auto support = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(spec.support_fraction * static_cast<double>(q))));
  for (std::size_t c = 0; c < spec.num_clusters; ++c) {
    std::vector<double> w(q);
    for (std::size_t k = 0; k < q; ++k) w[k] = spec.signal_scale * (a * shared[k] + b * truth_rng.normal());
    if (support < q) {
      std::vector<std::size_t> idx(q);
      for (std::size_t k = 0; k < q; ++k) idx[k] = k;
      truth_rng.shuffle(idx);
      for (std::size_t t = support; t < q; ++t) w[idx[t]] = 0.0;
    }
    task.ground_truth.push_back(std::move(w));
  }

  const std::size_t num_classes = spec.task == TaskKind::classification ? spec.num_classes : 0;
  std::vector<double> x(spec.feature_dim);
  for (std::size_t i = 0; i < spec.num_devices; ++i) {
    const std::size_t c = cluster_for_device(spec, i);
    task.cluster_of.push_back(c);
    Rng rng(derive_seed(seed, Stream::kData, {1, i}));
    for (int split = 0; split < 2; ++split) {
      DatasetShard shard;
      shard.feature_dim = spec.feature_dim;
      shard.num_classes = num_classes;
      shard.owner = static_cast<std::int64_t>(i);
      const std::size_t n = split == 0 ? spec.samples_per_device : spec.test_samples_per_device;
      shard.features.reserve(n * spec.feature_dim);
      shard.labels.reserve(n);
      for (std::size_t s = 0; s < n; ++s) {
        for (auto& v : x) v = rng.normal();
        shard.append_row(x, detail::synthetic_label(spec, task.ground_truth[c], x, rng));
      }
      (split == 0 ? task.train : task.test).push_back(std::move(shard));
    }
  }
  return task;
}

// Which classes each device owns. Classes are visited in a seeded order and
// dealt out in consecutive windows of `labels_per_device`, wrapping around.
inline std::vector<std::vector<std::size_t>> assign_classes(std::size_t num_classes,
                                                            std::size_t num_devices,
                                                            std::size_t labels_per_device,
                                                            std::uint64_t seed) {
  if (labels_per_device < 1 || labels_per_device > num_classes)
    throw PartitionError("labels_per_device must be in [1, " + std::to_string(num_classes) + "], got " +
                         std::to_string(labels_per_device));
  std::vector<std::size_t> order(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) order[c] = c;
  Rng rng(derive_seed(seed, Stream::kPartition, {0}));
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> owned(num_devices);
  for (std::size_t i = 0; i < num_devices; ++i) {
    for (std::size_t t = 0; t < labels_per_device; ++t)
      owned[i].push_back(order[(i * labels_per_device + t) % num_classes]);
    std::sort(owned[i].begin(), owned[i].end());
  }
  return owned;
}

// Splits each class's samples evenly among the devices that own it. No
// sample is given to two devices. `max_per_class` > 0 caps each device's
// take from one class.
inline std::vector<DatasetShard> partition_by_classes(const DatasetShard& pool,
                                                      const std::vector<std::vector<std::size_t>>& owned,
                                                      std::uint64_t seed, std::size_t max_per_class = 0) {
  if (pool.num_classes == 0) throw PartitionError("label-skew partition needs a classification pool");
  const std::size_t K = pool.num_classes;
  std::vector<std::vector<std::size_t>> by_class(K);
  for (std::size_t r = 0; r < pool.size(); ++r) by_class[pool.label_class(r)].push_back(r);

  std::vector<std::vector<std::size_t>> owners(K);
  for (std::size_t i = 0; i < owned.size(); ++i)
    for (auto c : owned[i]) owners[c].push_back(i);

  std::vector<std::vector<std::size_t>> rows(owned.size());
  for (std::size_t c = 0; c < K; ++c) {
    if (owners[c].empty()) continue;
    auto& members = by_class[c];
    Rng rng(derive_seed(seed, Stream::kPartition, {1, c}));
    rng.shuffle(members);
    const std::size_t share = members.size() / owners[c].size();
    const std::size_t extra = members.size() % owners[c].size();
    std::size_t cursor = 0;
    for (std::size_t r = 0; r < owners[c].size(); ++r) {
      std::size_t take = share + (r < extra ? 1 : 0);
      const std::size_t available = take;
      if (max_per_class > 0) take = std::min(take, max_per_class);
      if (take == 0)
        throw PartitionError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                             " samples for " + std::to_string(owners[c].size()) + " owning devices");
      auto& dst = rows[owners[c][r]];
      dst.insert(dst.end(), members.begin() + static_cast<std::ptrdiff_t>(cursor),
                 members.begin() + static_cast<std::ptrdiff_t>(cursor + take));
      cursor += available;
    }
  }

  std::vector<DatasetShard> shards(owned.size());
  for (std::size_t i = 0; i < owned.size(); ++i) {
    std::sort(rows[i].begin(), rows[i].end());
    auto& s = shards[i];
    s.feature_dim = pool.feature_dim;
    s.num_classes = K;
    s.owner = static_cast<std::int64_t>(i);
    s.features.reserve(rows[i].size() * pool.feature_dim);
    for (auto r : rows[i]) {
      s.append_row(pool.row(r), pool.labels[r]);
      s.source_index.push_back(pool.source_index.empty() ? r : pool.source_index[r]);
    }
  }
  return shards;
}

// Label-skew partition: every device receives samples from exactly
// `labels_per_device` classes.
inline std::vector<DatasetShard> partition_noniid(const DatasetShard& pool, std::size_t num_devices,
                                                  std::size_t labels_per_device, std::uint64_t seed,
                                                  std::size_t max_per_class = 0) {
  if (num_devices < 1) throw PartitionError("num_devices must be >= 1");
  const auto owned = assign_classes(pool.num_classes, num_devices, labels_per_device, seed);
  return partition_by_classes(pool, owned, seed, max_per_class);
}

}  // namespace dpmn
