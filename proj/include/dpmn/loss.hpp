#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dpmn/data.hpp"
#include "dpmn/errors.hpp"
#include "dpmn/param.hpp"

namespace dpmn {

enum class LossKind { quadratic, logistic, mlp };

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::quadratic:
      return "quadratic";
    case LossKind::logistic:
      return "logistic";
    case LossKind::mlp:
      return "mlp";
  }
  return "?";
}

// Local loss f_i and its parameter layout.
//
//   quadratic  f = mean 0.5 (a.x - y)^2                  x = [w]            (p)
//   logistic   softmax cross-entropy on W a + b          x = [W | b]        (K p + K)
//   mlp        softmax(W2 tanh(W1 a + b1) + b2)          x = [W1|b1|W2|b2]  (H p + H + K H + K)
//
// Matrices are row-major, one row per output unit.
struct LossModel {
  LossKind kind = LossKind::quadratic;
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  std::size_t hidden = 0;

  std::size_t param_count() const noexcept {
    const auto p = feature_dim, K = num_classes, H = hidden;
    switch (kind) {
      case LossKind::quadratic:
        return p;
      case LossKind::logistic:
        return K * p + K;
      case LossKind::mlp:
        return H * p + H + K * H + K;
    }
    return 0;
  }

  std::vector<std::string> validate() const {
    std::vector<std::string> issues;
    if (feature_dim < 1) issues.emplace_back("model.feature_dim must be >= 1");
    if (kind != LossKind::quadratic && num_classes < 2)
      issues.emplace_back("model." + to_string(kind) + " needs a classification task with >= 2 classes");
    if (kind == LossKind::quadratic && num_classes != 0)
      issues.emplace_back("model.quadratic needs a regression task");
    if (kind == LossKind::mlp && hidden < 1) issues.emplace_back("model.hidden must be >= 1");
    return issues;
  }
};

// Builds the model matching a shard's shape.
inline LossModel make_loss_model(LossKind kind, const DatasetShard& shape, std::size_t hidden = 0) {
  LossModel m;
  m.kind = kind;
  m.feature_dim = shape.feature_dim;
  m.num_classes = shape.num_classes;
  m.hidden = kind == LossKind::mlp ? hidden : 0;
  return m;
}

namespace detail {

// Softmax cross-entropy for one sample. Writes dL/dz into dz (may be empty).
inline double softmax_xent(std::span<const double> z, std::size_t label, std::span<double> dz) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  const double lse = zmax + std::log(sum);
  if (!dz.empty()) {
    for (std::size_t c = 0; c < z.size(); ++c) dz[c] = std::exp(z[c] - lse);
    dz[label] -= 1.0;
  }
  return lse - z[label];
}

inline std::size_t argmax(std::span<const double> z) {
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

class LossEvaluator {
 public:
  LossEvaluator(const LossModel& model, std::span<const double> x, const DatasetShard& data)
      : m_(model), x_(x), data_(data) {
    if (x.size() != model.param_count()) throw DimensionError(model.param_count(), x.size());
    if (data.feature_dim != model.feature_dim) throw DimensionError(model.feature_dim, data.feature_dim);
    logits_.resize(model.num_classes);
    dlogits_.resize(model.num_classes);
    hidden_.resize(model.hidden);
    dhidden_.resize(model.hidden);
  }

  // Loss of sample r; accumulates scale * gradient into grad when non-empty.
  double sample(std::size_t r, std::span<double> grad, double scale) {
    const auto a = data_.row(r);
    const std::size_t p = m_.feature_dim;
    switch (m_.kind) {
      case LossKind::quadratic: {
        const double resid = dot(x_.first(p), a) - data_.labels[r];
        if (!grad.empty())
          for (std::size_t k = 0; k < p; ++k) grad[k] += scale * resid * a[k];
        return 0.5 * resid * resid;
      }
      case LossKind::logistic: {
        const std::size_t K = m_.num_classes;
        const auto W = x_.first(K * p);
        const auto b = x_.subspan(K * p, K);
        for (std::size_t c = 0; c < K; ++c) logits_[c] = dot(W.subspan(c * p, p), a) + b[c];
        const double loss = softmax_xent(logits_, data_.label_class(r),
                                         grad.empty() ? std::span<double>{} : std::span<double>(dlogits_));
        if (!grad.empty()) {
          for (std::size_t c = 0; c < K; ++c) {
            const double g = scale * dlogits_[c];
            for (std::size_t k = 0; k < p; ++k) grad[c * p + k] += g * a[k];
            grad[K * p + c] += g;
          }
        }
        return loss;
      }
      case LossKind::mlp: {
        const std::size_t K = m_.num_classes, H = m_.hidden;
        const auto W1 = x_.first(H * p);
        const auto b1 = x_.subspan(H * p, H);
        const auto W2 = x_.subspan(H * p + H, K * H);
        const auto b2 = x_.subspan(H * p + H + K * H, K);
        for (std::size_t h = 0; h < H; ++h) hidden_[h] = std::tanh(dot(W1.subspan(h * p, p), a) + b1[h]);
        for (std::size_t c = 0; c < K; ++c) logits_[c] = dot(W2.subspan(c * H, H), hidden_) + b2[c];
        const double loss = softmax_xent(logits_, data_.label_class(r),
                                         grad.empty() ? std::span<double>{} : std::span<double>(dlogits_));
        if (!grad.empty()) {
          const std::size_t oW2 = H * p + H, ob2 = oW2 + K * H;
          std::fill(dhidden_.begin(), dhidden_.end(), 0.0);
          for (std::size_t c = 0; c < K; ++c) {
            const double g = scale * dlogits_[c];
            for (std::size_t h = 0; h < H; ++h) {
              grad[oW2 + c * H + h] += g * hidden_[h];
              dhidden_[h] += g * W2[c * H + h];
            }
            grad[ob2 + c] += g;
          }
          for (std::size_t h = 0; h < H; ++h) {
            const double g = dhidden_[h] * (1.0 - hidden_[h] * hidden_[h]);
            for (std::size_t k = 0; k < p; ++k) grad[h * p + k] += g * a[k];
            grad[H * p + h] += g;
          }
        }
        return loss;
      }
    }
    return 0.0;
  }

  std::size_t predict_class(std::size_t r) {
    sample(r, {}, 0.0);
    return argmax(logits_);
  }

  double predict_value(std::size_t r) { return dot(x_.first(m_.feature_dim), data_.row(r)); }

 private:
  static double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  }

  const LossModel& m_;
  std::span<const double> x_;
  const DatasetShard& data_;
  std::vector<double> logits_, dlogits_, hidden_, dhidden_;
};

inline void require_rows(const DatasetShard& data, std::span<const std::size_t> /*rows*/) {
  if (data.empty())
    throw PreconditionError("local loss on an empty shard (device " + std::to_string(data.owner) + ")");
}

}  // namespace detail

// Mean loss over the shard, or over `rows` when given (a minibatch).
inline double local_loss(const LossModel& model, const ParamVector& x, const DatasetShard& data,
                         std::span<const std::size_t> rows = {}) {
  detail::require_rows(data, rows);
  detail::LossEvaluator eval(model, x.view(), data);
  double sum = 0.0;
  const std::size_t n = rows.empty() ? data.size() : rows.size();
  for (std::size_t s = 0; s < n; ++s) sum += eval.sample(rows.empty() ? s : rows[s], {}, 0.0);
  const double loss = sum / static_cast<double>(n);
  if (!std::isfinite(loss)) throw NumericError(data.owner, "local loss");
  return loss;
}

// Mean loss and its gradient (overwrites grad).
inline double loss_and_gradient(const LossModel& model, const ParamVector& x, const DatasetShard& data,
                                 std::span<double> grad, std::span<const std::size_t> rows = {}) {
  detail::require_rows(data, rows);
  require_same_size(x.size(), grad.size());
  std::fill(grad.begin(), grad.end(), 0.0);
  detail::LossEvaluator eval(model, x.view(), data);
  const std::size_t n = rows.empty() ? data.size() : rows.size();
  const double scale = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t s = 0; s < n; ++s) sum += eval.sample(rows.empty() ? s : rows[s], grad, scale);
  const double loss = sum * scale;
  if (!std::isfinite(loss)) throw NumericError(data.owner, "local loss");
  return loss;
}

// Classification: fraction of correct argmax predictions.
// Regression: coefficient of determination clamped to [0, 1].
inline double accuracy(const LossModel& model, const ParamVector& x, const DatasetShard& data) {
  if (data.empty()) return 0.0;
  detail::LossEvaluator eval(model, x.view(), data);
  if (model.kind != LossKind::quadratic) {
    std::size_t correct = 0;
    for (std::size_t r = 0; r < data.size(); ++r) correct += eval.predict_class(r) == data.label_class(r);
    return static_cast<double>(correct) / static_cast<double>(data.size());
  }
  double mean = 0.0;
  for (double y : data.labels) mean += y;
  mean /= static_cast<double>(data.size());
  double sse = 0.0, sst = 0.0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const double e = eval.predict_value(r) - data.labels[r];
    sse += e * e;
    sst += (data.labels[r] - mean) * (data.labels[r] - mean);
  }
  if (sst == 0.0) return sse == 0.0 ? 1.0 : 0.0;
  return std::clamp(1.0 - sse / sst, 0.0, 1.0);
}

}  // namespace dpmn
