#pragma once

// Test-only reference code. Nothing here calls into the objective, loss,
// topology or simnet implementations; it is written out longhand so that it
// can serve as an independent check of them.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "dpmn/data.hpp"
#include "dpmn/loss.hpp"
#include "dpmn/objective.hpp"
#include "dpmn/param.hpp"

namespace dpmn::testing {

struct OracleNeighbor {
  std::vector<double> x;
  std::vector<int> mask;
};

inline std::vector<int> mask_bits(const PruneMask& m) {
  std::vector<int> out(m.size());
  for (std::size_t k = 0; k < m.size(); ++k) out[k] = m[k] ? 1 : 0;
  return out;
}

// f_i(x) with no shared code, in scalar type T.
template <typename T>
T oracle_loss(const LossModel& model, const std::vector<T>& x, const DatasetShard& data) {
  const std::size_t n = data.size(), p = model.feature_dim, K = model.num_classes, H = model.hidden;
  T total = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const double* a = data.features.data() + s * p;
    if (model.kind == LossKind::quadratic) {
      T pred = 0;
      for (std::size_t k = 0; k < p; ++k) pred += x[k] * T(a[k]);
      const T r = pred - T(data.labels[s]);
      total += T(0.5) * r * r;
      continue;
    }
    std::vector<T> z(K);
    if (model.kind == LossKind::logistic) {
      for (std::size_t c = 0; c < K; ++c) {
        T acc = x[K * p + c];
        for (std::size_t k = 0; k < p; ++k) acc += x[c * p + k] * T(a[k]);
        z[c] = acc;
      }
    } else {
      std::vector<T> h(H);
      for (std::size_t u = 0; u < H; ++u) {
        T acc = x[H * p + u];
        for (std::size_t k = 0; k < p; ++k) acc += x[u * p + k] * T(a[k]);
        h[u] = std::tanh(acc);
      }
      const std::size_t o2 = H * p + H;
      for (std::size_t c = 0; c < K; ++c) {
        T acc = x[o2 + K * H + c];
        for (std::size_t u = 0; u < H; ++u) acc += x[o2 + c * H + u] * h[u];
        z[c] = acc;
      }
    }
    T zmax = z[0];
    for (auto v : z) zmax = v > zmax ? v : zmax;
    T sum = 0;
    for (auto v : z) sum += std::exp(v - zmax);
    total += zmax + std::log(sum) - z[static_cast<std::size_t>(data.labels[s])];
  }
  return total / T(n);
}

inline double brute_plain_regularizer(const std::vector<double>& x, const std::vector<std::vector<double>>& nbrs) {
  if (nbrs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& xj : nbrs) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) d2 += (x[k] - xj[k]) * (x[k] - xj[k]);
    total += d2;
  }
  return total / static_cast<double>(nbrs.size());
}

template <typename T>
T brute_pruned_regularizer(const std::vector<T>& x, const std::vector<int>& mask,
                           const std::vector<OracleNeighbor>& nbrs) {
  if (nbrs.empty()) return T(0);
  T total = 0;
  for (const auto& nb : nbrs) {
    std::vector<int> both(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) both[k] = mask[k] * nb.mask[k];
    T u = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const T diff = T(both[k]) * (x[k] - T(nb.x[k]));
      u += diff * diff;
    }
    total += T(1) - std::exp(-u);
  }
  return total / T(nbrs.size());
}

template <typename T>
T brute_plain_regularizer_t(const std::vector<T>& x, const std::vector<OracleNeighbor>& nbrs) {
  if (nbrs.empty()) return T(0);
  T total = 0;
  for (const auto& nb : nbrs)
    for (std::size_t k = 0; k < x.size(); ++k) total += (x[k] - T(nb.x[k])) * (x[k] - T(nb.x[k]));
  return total / T(nbrs.size());
}

// R_i(x ∘ m) written out directly.
template <typename T>
T oracle_objective(const LossModel& model, const std::vector<T>& x, const std::vector<int>& mask,
                   const DatasetShard& data, double lambda, RegularizerForm form,
                   const std::vector<OracleNeighbor>& nbrs) {
  std::vector<T> xm(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) xm[k] = mask[k] ? x[k] : T(0);
  T reg = 0;
  if (form == RegularizerForm::plain) reg = brute_plain_regularizer_t(xm, nbrs);
  if (form == RegularizerForm::pruned) reg = brute_pruned_regularizer(xm, mask, nbrs);
  return oracle_loss(model, xm, data) + T(lambda) * reg;
}

// Central differences in long double with step h.
inline std::vector<double> finite_difference_gradient(const std::function<long double(const std::vector<long double>&)>& f,
                                                      const std::vector<double>& x, long double h = 1e-6L) {
  std::vector<long double> xl(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const long double keep = xl[k];
    xl[k] = keep + h;
    const long double up = f(xl);
    xl[k] = keep - h;
    const long double down = f(xl);
    xl[k] = keep;
    g[k] = static_cast<double>((up - down) / (2 * h));
  }
  return g;
}

// Plain gradient-descent step on f alone, in double, longhand (quadratic only).
inline std::vector<double> oracle_quadratic_gradient(const std::vector<double>& x, const DatasetShard& data) {
  const std::size_t p = data.feature_dim, n = data.size();
  std::vector<double> g(p, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    double pred = 0.0;
    for (std::size_t k = 0; k < p; ++k) pred += x[k] * data.features[s * p + k];
    const double r = pred - data.labels[s];
    for (std::size_t k = 0; k < p; ++k) g[k] += r * data.features[s * p + k] / static_cast<double>(n);
  }
  return g;
}

// ---- random instances ------------------------------------------------------

inline std::vector<double> random_vector(std::mt19937_64& gen, std::size_t d, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> v(d);
  for (auto& x : v) x = nd(gen);
  return v;
}

inline PruneMask random_mask(std::mt19937_64& gen, std::size_t d, double keep = 0.6) {
  std::bernoulli_distribution bd(keep);
  PruneMask m = PruneMask::zeros(d);
  for (std::size_t k = 0; k < d; ++k) m.set(k, bd(gen));
  return m;
}

inline DatasetShard random_shard(std::mt19937_64& gen, std::size_t n, std::size_t p, std::size_t classes,
                                 std::int64_t owner = 0) {
  DatasetShard s;
  s.feature_dim = p;
  s.num_classes = classes;
  s.owner = owner;
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> cls(0, classes > 0 ? classes - 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < p; ++k) s.features.push_back(nd(gen));
    s.labels.push_back(classes > 0 ? static_cast<double>(cls(gen)) : nd(gen));
  }
  return s;
}

struct RandomInstance {
  LossModel model;
  DatasetShard data;
  ParamVector x;
  PruneMask mask;
  std::vector<NeighborModel> neighbors;
  std::vector<OracleNeighbor> oracle_neighbors;
};

// d <= 64 across the three loss kinds.
inline RandomInstance random_instance(std::mt19937_64& gen, LossKind kind, std::size_t num_neighbors,
                                      double neighbor_spread = 0.3) {
  RandomInstance inst;
  inst.model.kind = kind;
  switch (kind) {
    case LossKind::quadratic:
      inst.model.feature_dim = 8 + gen() % 40;
      break;
    case LossKind::logistic:
      inst.model.feature_dim = 3 + gen() % 8;
      inst.model.num_classes = 2 + gen() % 3;
      break;
    case LossKind::mlp:
      inst.model.feature_dim = 2 + gen() % 4;
      inst.model.num_classes = 2 + gen() % 2;
      inst.model.hidden = 2 + gen() % 4;
      break;
  }
  const std::size_t d = inst.model.param_count();
  inst.data = random_shard(gen, 6 + gen() % 10, inst.model.feature_dim, inst.model.num_classes);
  inst.mask = random_mask(gen, d, 0.7);
  inst.x = apply_mask(ParamVector(random_vector(gen, d, 0.5)), inst.mask);
  for (std::size_t j = 0; j < num_neighbors; ++j) {
    NeighborModel nb;
    nb.id = static_cast<std::int64_t>(j + 1);
    nb.mask = random_mask(gen, d, 0.7);
    std::vector<double> xj(d);
    const auto noise = random_vector(gen, d, neighbor_spread);
    for (std::size_t k = 0; k < d; ++k) xj[k] = inst.x[k] + noise[k];
    nb.x = apply_mask(ParamVector(xj), nb.mask);
    inst.oracle_neighbors.push_back({nb.x.values(), mask_bits(nb.mask)});
    inst.neighbors.push_back(std::move(nb));
  }
  return inst;
}

}  // namespace dpmn::testing
