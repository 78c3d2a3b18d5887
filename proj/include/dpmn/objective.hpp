#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dpmn/errors.hpp"
#include "dpmn/loss.hpp"
#include "dpmn/param.hpp"

namespace dpmn {

// A neighbor's (masked) model as seen by the receiving device.
struct NeighborModel {
  std::int64_t id = -1;
  ParamVector x;
  PruneMask mask;
};

enum class RegularizerForm { none, plain, pruned };

inline std::string to_string(RegularizerForm f) {
  switch (f) {
    case RegularizerForm::none:
      return "none";
    case RegularizerForm::plain:
      return "plain";
    case RegularizerForm::pruned:
      return "pruned";
  }
  return "?";
}

struct RegularizerParams {
  double lambda = 0.1;
  RegularizerForm form = RegularizerForm::pruned;
};

// Coupling J(u) = 1 - e^{-u}.
inline double coupling(double u) noexcept { return -std::expm1(-u); }

// dJ/du.
inline double coupling_slope(double u) noexcept { return std::exp(-u); }

namespace detail {

inline std::vector<std::size_t> id_order(std::span<const NeighborModel> neighbors) {
  std::vector<std::size_t> order(neighbors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return neighbors[a].id < neighbors[b].id; });
  return order;
}

inline double squared_distance(const ParamVector& a, const ParamVector& b) {
  require_same_size(a.size(), b.size());
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

// ||m_a AND m_b ∘ (a - b)||^2 without materializing the overlap mask.
inline double overlap_squared_distance(const ParamVector& a, const PruneMask& ma, const ParamVector& b,
                                       const PruneMask& mb) {
  require_same_size(a.size(), ma.size());
  require_same_size(a.size(), b.size());
  require_same_size(a.size(), mb.size());
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (ma[k] && mb[k]) {
      const double diff = a[k] - b[k];
      s += diff * diff;
    }
  }
  return s;
}

}  // namespace detail

// h_i = (1/|S_i|) sum_j ||x_i - x_j||^2, summed in the order given. Empty set -> 0.
inline double plain_regularizer(const ParamVector& x, std::span<const ParamVector> neighbors) {
  if (neighbors.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& xj : neighbors) sum += detail::squared_distance(x, xj);
  return sum / static_cast<double>(neighbors.size());
}

// Same, summed in ascending neighbor id.
inline double plain_regularizer(const ParamVector& x, std::span<const NeighborModel> neighbors) {
  if (neighbors.empty()) return 0.0;
  double sum = 0.0;
  for (auto idx : detail::id_order(neighbors)) sum += detail::squared_distance(x, neighbors[idx].x);
  return sum / static_cast<double>(neighbors.size());
}

// h~_i = (1/|S_i|) sum_j J(||m_{i,j} ∘ (x~_i - x~_j)||^2), summed in ascending
// neighbor id. Value lies in [0, 1); empty set -> 0.
inline double pruned_regularizer(const ParamVector& x, const PruneMask& mask,
                                 std::span<const NeighborModel> neighbors) {
  require_same_size(x.size(), mask.size());
  if (neighbors.empty()) return 0.0;
  double sum = 0.0;
  for (auto idx : detail::id_order(neighbors)) {
    const auto& nb = neighbors[idx];
    sum += coupling(detail::overlap_squared_distance(x, mask, nb.x, nb.mask));
  }
  return sum / static_cast<double>(neighbors.size());
}

inline double regularizer(RegularizerForm form, const ParamVector& x, const PruneMask& mask,
                          std::span<const NeighborModel> neighbors) {
  switch (form) {
    case RegularizerForm::none:
      return 0.0;
    case RegularizerForm::plain:
      return plain_regularizer(x, neighbors);
    case RegularizerForm::pruned:
      return pruned_regularizer(x, mask, neighbors);
  }
  return 0.0;
}

// Adds the regularizer gradient (scaled by lambda) into grad.
inline void add_regularizer_gradient(RegularizerForm form, double lambda, const ParamVector& x,
                                     const PruneMask& mask, std::span<const NeighborModel> neighbors,
                                     std::span<double> grad) {
  if (form == RegularizerForm::none || neighbors.empty()) return;
  const double inv = 1.0 / static_cast<double>(neighbors.size());
  for (auto idx : detail::id_order(neighbors)) {
    const auto& nb = neighbors[idx];
    require_same_size(x.size(), nb.x.size());
    if (form == RegularizerForm::plain) {
      for (std::size_t k = 0; k < x.size(); ++k) grad[k] += lambda * inv * 2.0 * (x[k] - nb.x[k]);
    } else {
      const double u = detail::overlap_squared_distance(x, mask, nb.x, nb.mask);
      const double w = lambda * inv * 2.0 * coupling_slope(u);
      for (std::size_t k = 0; k < x.size(); ++k) {
        if (mask[k] && nb.mask[k]) grad[k] += w * (x[k] - nb.x[k]);
      }
    }
  }
}

struct ObjectiveValue {
  double loss = 0.0;         // f_i
  double regularizer = 0.0;  // h_i or h~_i
  double total = 0.0;        // R_i = f_i + lambda * h_i
};

// R_i evaluated at x ∘ mask.
inline ObjectiveValue local_objective(const LossModel& model, const ParamVector& x, const PruneMask& mask,
                                      const DatasetShard& data, const RegularizerParams& params,
                                      std::span<const NeighborModel> neighbors) {
  const ParamVector xm = apply_mask(x, mask);
  ObjectiveValue v;
  v.loss = local_loss(model, xm, data);
  v.regularizer = regularizer(params.form, xm, mask, neighbors);
  v.total = v.loss + params.lambda * v.regularizer;
  if (!std::isfinite(v.total)) throw NumericError(data.owner, "local objective");
  return v;
}

struct GradientResult {
  ObjectiveValue value;
  ParamVector gradient;  // d R_i(x ∘ m) / dx: zero wherever mask is zero
  ParamVector dense;     // gradient before the mask chain rule; feeds mask regrowth
};

inline GradientResult objective_gradient(const LossModel& model, const ParamVector& x, const PruneMask& mask,
                                         const DatasetShard& data, const RegularizerParams& params,
                                         std::span<const NeighborModel> neighbors,
                                         std::span<const std::size_t> rows = {}) {
  const ParamVector xm = apply_mask(x, mask);
  GradientResult r;
  r.dense = ParamVector(x.size());
  r.value.loss = loss_and_gradient(model, xm, data, r.dense.view(), rows);
  r.value.regularizer = regularizer(params.form, xm, mask, neighbors);
  r.value.total = r.value.loss + params.lambda * r.value.regularizer;
  if (!std::isfinite(r.value.total)) throw NumericError(data.owner, "local objective");
  add_regularizer_gradient(params.form, params.lambda, xm, mask, neighbors, r.dense.view());
  r.gradient = apply_mask(r.dense, mask);
  if (!r.gradient.all_finite()) throw NumericError(data.owner, "local gradient");
  return r;
}

inline ParamVector local_gradient(const LossModel& model, const ParamVector& x, const PruneMask& mask,
                                  const DatasetShard& data, const RegularizerParams& params,
                                  std::span<const NeighborModel> neighbors) {
  return objective_gradient(model, x, mask, data, params, neighbors).gradient;
}

struct GlobalObjective {
  double F = 0.0;
  double H = 0.0;
  double R = 0.0;
};

// F = mean f_i, H = mean h_i, R = F + lambda H.
inline GlobalObjective global_objective(std::span<const double> losses, std::span<const double> regs,
                                        double lambda) {
  if (losses.empty()) throw PreconditionError("global objective needs at least one device");
  require_same_size(losses.size(), regs.size());
  const double n = static_cast<double>(losses.size());
  GlobalObjective g;
  for (double f : losses) g.F += f;
  for (double h : regs) g.H += h;
  g.F /= n;
  g.H /= n;
  g.R = g.F + lambda * g.H;
  return g;
}

}  // namespace dpmn
