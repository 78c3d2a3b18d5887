#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "dpmn/errors.hpp"

namespace dpmn {

// Dense model parameters x_i. Pruned coordinates are stored as explicit zeros.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t d, double fill = 0.0) : values_(d, fill) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}
  ParamVector(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }

  std::span<const double> view() const noexcept { return values_; }
  std::span<double> view() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }
  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

// Binary prune mask m_i. One byte per bit in memory; packed on the wire.
class PruneMask {
 public:
  PruneMask() = default;
  explicit PruneMask(std::size_t d, bool fill = true) : bits_(d, fill ? 1 : 0) {}
  PruneMask(std::initializer_list<int> bits) {
    bits_.reserve(bits.size());
    for (int b : bits) bits_.push_back(b != 0 ? 1 : 0);
  }
  explicit PruneMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto& b : bits_) b = b != 0 ? 1 : 0;
  }

  static PruneMask ones(std::size_t d) { return PruneMask(d, true); }
  static PruneMask zeros(std::size_t d) { return PruneMask(d, false); }

  std::size_t size() const noexcept { return bits_.size(); }
  bool operator[](std::size_t k) const { return bits_[k] != 0; }
  void set(std::size_t k, bool on) { bits_[k] = on ? 1 : 0; }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool all() const noexcept { return count() == bits_.size(); }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  friend bool operator==(const PruneMask&, const PruneMask&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

inline void require_same_size(std::size_t expected, std::size_t actual) {
  if (expected != actual) throw DimensionError(expected, actual);
}

// x ∘ m.
inline ParamVector apply_mask(const ParamVector& x, const PruneMask& m) {
  require_same_size(x.size(), m.size());
  ParamVector out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = m[k] ? x[k] : 0.0;
  return out;
}

// In-place variant used on the hot path of the round engine.
inline void apply_mask_inplace(ParamVector& x, const PruneMask& m) {
  require_same_size(x.size(), m.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!m[k]) x[k] = 0.0;
  }
}

// Elementwise AND: the shared support m_{i,j}.
inline PruneMask overlap(const PruneMask& a, const PruneMask& b) {
  require_same_size(a.size(), b.size());
  PruneMask out = PruneMask::zeros(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out.set(k, a[k] && b[k]);
  return out;
}

// 1 - ones/d. An empty mask counts as fully dense.
inline double sparsity(const PruneMask& m) noexcept {
  if (m.size() == 0) return 0.0;
  return 1.0 - static_cast<double>(m.count()) / static_cast<double>(m.size());
}

}  // namespace dpmn
