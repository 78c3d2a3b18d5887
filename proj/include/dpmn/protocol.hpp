#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpmn/config.hpp"
#include "dpmn/data.hpp"
#include "dpmn/errors.hpp"
#include "dpmn/idx.hpp"
#include "dpmn/loss.hpp"
#include "dpmn/objective.hpp"
#include "dpmn/parallel.hpp"
#include "dpmn/param.hpp"
#include "dpmn/pruning.hpp"
#include "dpmn/rng.hpp"
#include "dpmn/simnet.hpp"
#include "dpmn/topology.hpp"
#include "dpmn/trace.hpp"

namespace dpmn {

// Per-device training and evaluation data for one experiment.
struct Substrate {
  std::vector<DatasetShard> train;
  std::vector<DatasetShard> test;  // may be empty per device: evaluate on train
  std::vector<std::size_t> cluster_of;
};

inline Substrate load_substrate(const ExperimentConfig& c) {
  Substrate s;
  if (c.data.source == DataSource::synthetic) {
    auto task = generate_synthetic(c.data.synthetic, c.seed);
    s.train = std::move(task.train);
    s.test = std::move(task.test);
    s.cluster_of = std::move(task.cluster_of);
    return s;
  }
  const auto& ix = c.data.idx;
  const auto pool = load_idx(ix.train_images, ix.train_labels);
  const auto owned = assign_classes(pool.num_classes, ix.num_devices, ix.labels_per_device, c.seed);
  s.train = partition_by_classes(pool, owned, c.seed, ix.max_per_class);
  if (!ix.test_images.empty()) {
    auto test_pool = load_idx(ix.test_images, ix.test_labels);
    test_pool.num_classes = pool.num_classes;
    s.test = partition_by_classes(test_pool, owned, derive_seed(c.seed, Stream::kPartition, {2}), 0);
  } else {
    s.test.resize(s.train.size());
  }
  return s;
}

struct DeviceState {
  std::size_t id = 0;
  ParamVector x;  // always equal to x ∘ mask
  PruneMask mask;
  ParamVector last_gradient;  // unmasked gradient of the last local step
  std::uint64_t steps = 0;
  double learning_rate = 0.1;
  std::vector<NeighborModel> inbox;  // models received in the previous exchange
};

// Everything run_round needs besides the device states.
struct RoundContext {
  const ExperimentConfig& config;
  ProtocolVariant variant;
  const LossModel& model;
  std::span<const DatasetShard> train;
  std::span<const DatasetShard> test;
  std::size_t workers = 1;
};

namespace detail {

inline std::vector<std::size_t> batch_rows(std::size_t n, std::size_t batch, std::uint64_t seed) {
  std::vector<std::size_t> rows(n);
  for (std::size_t r = 0; r < n; ++r) rows[r] = r;
  Rng rng(seed);
  for (std::size_t t = 0; t < batch; ++t) {
    const auto pick = t + static_cast<std::size_t>(rng.below(n - t));
    std::swap(rows[t], rows[pick]);
  }
  rows.resize(batch);
  std::sort(rows.begin(), rows.end());
  return rows;
}

inline RegularizerParams regularizer_params(const RoundContext& ctx) {
  return {ctx.config.lambda, ctx.variant.regularizer};
}

}  // namespace detail

// Minibatch rows for (device, round, local step); empty means full batch.
inline std::vector<std::size_t> minibatch(const ExperimentConfig& c, std::size_t n, std::size_t device,
                                          std::int64_t round, std::size_t step) {
  const std::size_t b = c.optimizer.batch_size;
  if (b == 0 || b >= n) return {};
  return detail::batch_rows(n, b,
                            derive_seed(c.seed, Stream::kBatch, {static_cast<std::uint64_t>(round), device, step}));
}

// Same seeded vector for every device, all coordinates retained.
inline std::vector<DeviceState> init_devices(const ExperimentConfig& c, std::size_t num_devices, std::size_t d) {
  Rng rng(derive_seed(c.seed, Stream::kInit));
  ParamVector x0(d);
  for (auto& v : x0) v = c.init_scale * rng.normal();
  std::vector<DeviceState> devices(num_devices);
  for (std::size_t i = 0; i < num_devices; ++i) {
    devices[i].id = i;
    devices[i].x = x0;
    devices[i].mask = PruneMask::ones(d);
    devices[i].last_gradient = ParamVector(d);
    devices[i].learning_rate = c.optimizer.learning_rate;
  }
  return devices;
}

// Metrics of the current state, graph and traffic supplied by the caller.
inline RoundTrace observe(const std::vector<DeviceState>& devices, const RoundContext& ctx, std::int64_t round) {
  const std::size_t n = devices.size();
  RoundTrace t;
  t.round = round;
  t.lambda = ctx.config.lambda;
  t.loss.resize(n);
  t.accuracy.resize(n);
  std::vector<double> regs(n);
  const auto params = detail::regularizer_params(ctx);
  parallel_for(n, ctx.workers, [&](std::size_t i) {
    const auto& dev = devices[i];
    try {
      t.loss[i] = local_loss(ctx.model, dev.x, ctx.train[i]);
    } catch (const NumericError& e) {
      throw DivergenceError(static_cast<std::int64_t>(i), round, e.what());
    }
    regs[i] = regularizer(params.form, dev.x, dev.mask, dev.inbox);
    const auto& eval = ctx.test.empty() || ctx.test[i].empty() ? ctx.train[i] : ctx.test[i];
    t.accuracy[i] = accuracy(ctx.model, dev.x, eval);
  });
  const auto g = global_objective(t.loss, regs, ctx.config.lambda);
  t.F = g.F;
  t.H = g.H;
  t.R = g.R;
  if (!std::isfinite(t.R)) throw DivergenceError(-1, round, "global objective is not finite");
  double acc = 0.0, sp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += t.accuracy[i];
    sp += sparsity(devices[i].mask);
  }
  t.mean_accuracy = acc / static_cast<double>(n);
  t.mean_sparsity = sp / static_cast<double>(n);
  t.bytes_sent.assign(n, 0);
  t.bytes_received.assign(n, 0);
  t.value_bytes_sent.assign(n, 0);
  return t;
}

// Step (1): E local gradient steps on R_i against last round's inbox.
inline void local_update(std::vector<DeviceState>& devices, const RoundContext& ctx, std::int64_t round) {
  const auto params = detail::regularizer_params(ctx);
  parallel_for(devices.size(), ctx.workers, [&](std::size_t i) {
    auto& dev = devices[i];
    const auto& shard = ctx.train[i];
    for (std::size_t e = 0; e < ctx.config.optimizer.local_steps; ++e) {
      const auto rows = minibatch(ctx.config, shard.size(), i, round, e);
      GradientResult g;
      try {
        g = objective_gradient(ctx.model, dev.x, dev.mask, shard, params, dev.inbox, rows);
      } catch (const NumericError& err) {
        throw DivergenceError(static_cast<std::int64_t>(i), round, err.what());
      }
      for (std::size_t k = 0; k < dev.x.size(); ++k) dev.x[k] -= dev.learning_rate * g.gradient[k];
      if (!dev.x.all_finite()) throw DivergenceError(static_cast<std::int64_t>(i), round, "parameters not finite");
      dev.last_gradient = std::move(g.dense);
      ++dev.steps;
    }
  });
}

// Step (2): refresh masks from post-update magnitudes.
inline void update_masks(std::vector<DeviceState>& devices, const RoundContext& ctx, std::int64_t round) {
  if (!ctx.variant.pruning) return;
  parallel_for(devices.size(), ctx.workers, [&](std::size_t i) {
    auto& dev = devices[i];
    dev.mask = compute_mask(dev.x, ctx.config.pruning, round, dev.mask, dev.last_gradient.view());
    apply_mask_inplace(dev.x, dev.mask);
  });
}

inline NeighborGraph select_neighbors(const std::vector<DeviceState>& devices, const RoundContext& ctx,
                                      std::int64_t round) {
  std::vector<ParamVector> xs;
  std::vector<PruneMask> ms;
  xs.reserve(devices.size());
  ms.reserve(devices.size());
  for (const auto& d : devices) {
    xs.push_back(d.x);
    ms.push_back(d.mask);
  }
  auto topo = ctx.config.topology;
  topo.strategy = ctx.variant.strategy;
  return build_neighbors(xs, ms, topo, ctx.config.seed, round, ctx.workers);
}

// One synchronous round: local steps, prune, select, exchange, observe.
// `graph` carries the previous graph in and the current one out, so that
// topology.period > 1 can reuse it.
inline RoundTrace run_round(std::vector<DeviceState>& devices, const RoundContext& ctx, std::int64_t round,
                            NeighborGraph& graph, BandwidthLedger& ledger) {
  if (round < 0) throw PreconditionError("round must be >= 0");
  local_update(devices, ctx, round);

  const bool rebuild = graph.num_devices() != devices.size() ||
                       round % static_cast<std::int64_t>(ctx.config.topology.period) == 0;
  if (ctx.config.step_order == StepOrder::prune_then_select) {
    update_masks(devices, ctx, round);
    if (rebuild) graph = select_neighbors(devices, ctx, round);
  } else {
    if (rebuild) graph = select_neighbors(devices, ctx, round);
    update_masks(devices, ctx, round);
  }
  graph.round = round;

  std::vector<ParamVector> xs;
  std::vector<PruneMask> ms;
  for (const auto& d : devices) {
    xs.push_back(d.x);
    ms.push_back(d.mask);
  }
  auto ex = exchange(graph, xs, ms, round);
  for (std::size_t i = 0; i < devices.size(); ++i) devices[i].inbox = std::move(ex.inboxes[i]);
  ledger.record(ex.delta);

  auto t = observe(devices, ctx, round);
  for (std::size_t i = 0; i < devices.size(); ++i) {
    t.bytes_sent[i] = ex.delta.devices[i].sent;
    t.bytes_received[i] = ex.delta.devices[i].received;
    t.value_bytes_sent[i] = ex.delta.devices[i].value_bytes_sent;
  }
  t.edges = graph.edges();
  return t;
}

// A full run held in memory; the harness layers file output on top.
class Simulation {
 public:
  Simulation(ExperimentConfig config, Substrate substrate, std::size_t workers = 1)
      : config_(std::move(config)), substrate_(std::move(substrate)), workers_(workers) {
    if (auto issues = validate(config_); !issues.empty()) throw ConfigError(std::move(issues));
    if (substrate_.train.empty()) throw PreconditionError("no devices");
    for (const auto& s : substrate_.train) {
      s.validate();
      if (s.empty()) throw PreconditionError("device " + std::to_string(s.owner) + " has no training data");
    }
    variant_ = resolve_variant(config_);
    model_ = make_loss_model(config_.model.kind, substrate_.train.front(), config_.model.hidden);
    if (auto issues = model_.validate(); !issues.empty()) throw ConfigError(std::move(issues));
    devices_ = init_devices(config_, substrate_.train.size(), model_.param_count());
    ledger_ = BandwidthLedger(devices_.size());
  }

  explicit Simulation(const ExperimentConfig& config, std::size_t workers = 1)
      : Simulation(config, load_substrate(config), workers) {}

  RoundTrace step() {
    auto t = run_round(devices_, context(), next_round_, graph_, ledger_);
    ++next_round_;
    return t;
  }

  RoundTrace observe_now() const { return observe(devices_, context(), next_round_ - 1); }

  const std::vector<DeviceState>& devices() const noexcept { return devices_; }
  std::vector<DeviceState>& devices() noexcept { return devices_; }
  const BandwidthLedger& ledger() const noexcept { return ledger_; }
  const LossModel& model() const noexcept { return model_; }
  const ProtocolVariant& variant() const noexcept { return variant_; }
  const ExperimentConfig& config() const noexcept { return config_; }
  const Substrate& substrate() const noexcept { return substrate_; }
  std::int64_t next_round() const noexcept { return next_round_; }

 private:
  RoundContext context() const {
    return RoundContext{config_, variant_, model_, substrate_.train, substrate_.test, workers_};
  }

  ExperimentConfig config_;
  Substrate substrate_;
  std::size_t workers_;
  ProtocolVariant variant_;
  LossModel model_;
  std::vector<DeviceState> devices_;
  NeighborGraph graph_;
  BandwidthLedger ledger_;
  std::int64_t next_round_ = 0;
};

struct ExperimentResult {
  std::vector<RoundTrace> traces;
  RunSummary summary;
};

inline RunSummary summarize(const Simulation& sim, const std::vector<RoundTrace>& traces) {
  RunSummary s;
  const auto& c = sim.config();
  s.variant = to_string(c.variant);
  s.seed = c.seed;
  s.num_devices = sim.devices().size();
  s.rounds = traces.size();
  const RoundTrace last = traces.empty() ? sim.observe_now() : traces.back();
  s.final_mean_accuracy = last.mean_accuracy;
  double loss = 0.0;
  for (double l : last.loss) loss += l;
  s.final_mean_loss = loss / static_cast<double>(last.loss.size());
  s.final_F = last.F;
  s.final_H = last.H;
  s.final_R = last.R;
  s.final_accuracy = last.accuracy;
  s.final_loss = last.loss;
  s.total_bytes = sim.ledger().total_bytes();
  s.total_value_bytes = sim.ledger().total_value_bytes();
  for (const auto& t : traces) {
    s.series_R.push_back(t.R);
    s.series_accuracy.push_back(t.mean_accuracy);
    s.series_bytes.push_back(t.total_sent());
  }
  for (const auto& d : sim.devices()) s.final_models.push_back(d.x.values());
  return s;
}

inline ExperimentResult run_experiment(Simulation& sim) {
  ExperimentResult r;
  r.traces.reserve(sim.config().rounds);
  for (std::size_t t = 0; t < sim.config().rounds; ++t) r.traces.push_back(sim.step());
  r.summary = summarize(sim, r.traces);
  return r;
}

inline ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t workers = 1) {
  Simulation sim(config, workers);
  return run_experiment(sim);
}

}  // namespace dpmn
