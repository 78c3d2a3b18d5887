#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpmn/data.hpp"
#include "dpmn/errors.hpp"
#include "dpmn/loss.hpp"
#include "dpmn/objective.hpp"
#include "dpmn/pruning.hpp"
#include "dpmn/topology.hpp"

namespace dpmn {

enum class Variant { DPMN, DFL, DPMP, DPCG, DPMN_r };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::DPMN:
      return "DPMN";
    case Variant::DFL:
      return "DFL";
    case Variant::DPMP:
      return "DPMP";
    case Variant::DPCG:
      return "DPCG";
    case Variant::DPMN_r:
      return "DPMN-r";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  for (auto v : {Variant::DPMN, Variant::DFL, Variant::DPMP, Variant::DPCG, Variant::DPMN_r})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

inline std::optional<LossKind> parse_loss_kind(std::string_view s) {
  for (auto k : {LossKind::quadratic, LossKind::logistic, LossKind::mlp})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline std::optional<RegularizerForm> parse_regularizer(std::string_view s) {
  for (auto f : {RegularizerForm::none, RegularizerForm::plain, RegularizerForm::pruned})
    if (to_string(f) == s) return f;
  return std::nullopt;
}

inline std::optional<TopologyStrategy> parse_strategy(std::string_view s) {
  for (auto t : {TopologyStrategy::cosine_threshold, TopologyStrategy::euclidean_nearest, TopologyStrategy::random_k,
                 TopologyStrategy::static_full, TopologyStrategy::static_ring})
    if (to_string(t) == s) return t;
  return std::nullopt;
}

// Whether masks are recomputed before or after the neighbor graph is built.
enum class StepOrder { prune_then_select, select_then_prune };

inline std::string to_string(StepOrder o) {
  return o == StepOrder::prune_then_select ? "prune-then-select" : "select-then-prune";
}

struct ModelConfig {
  LossKind kind = LossKind::quadratic;
  std::size_t hidden = 16;
};

struct OptimizerConfig {
  double learning_rate = 0.1;
  std::size_t local_steps = 1;
  std::size_t batch_size = 0;  // 0: full batch
};

struct IdxSource {
  std::string train_images;
  std::string train_labels;
  std::string test_images;  // optional; empty -> evaluate on the training shard
  std::string test_labels;
  std::size_t num_devices = 10;
  std::size_t labels_per_device = 2;
  std::size_t max_per_class = 0;  // 0: no cap
};

enum class DataSource { synthetic, idx };

struct DataConfig {
  DataSource source = DataSource::synthetic;
  SyntheticSpec synthetic;
  IdxSource idx;
};

struct OutputConfig {
  std::string dir = "runs/default";
  bool emit_models = false;
};

struct ExperimentConfig {
  Variant variant = Variant::DPMN;
  std::size_t rounds = 100;
  std::uint64_t seed = 1;
  double lambda = 0.1;
  double init_scale = 0.01;
  StepOrder step_order = StepOrder::prune_then_select;
  // Overrides of the variant's defaults; unset means "use the variant's binding".
  std::optional<bool> pruning_enabled;
  std::optional<RegularizerForm> regularizer;
  std::optional<TopologyStrategy> strategy;

  ModelConfig model;
  OptimizerConfig optimizer;
  PruneSchedule pruning;
  TopologyConfig topology;  // topology.strategy is resolved from the variant unless overridden
  DataConfig data;
  OutputConfig output;

  std::size_t num_devices() const noexcept {
    return data.source == DataSource::synthetic ? data.synthetic.num_devices : data.idx.num_devices;
  }
  void set_num_devices(std::size_t n) {
    if (data.source == DataSource::synthetic)
      data.synthetic.num_devices = n;
    else
      data.idx.num_devices = n;
  }
};

// The strategy bundle a protocol name stands for.
struct ProtocolVariant {
  Variant name = Variant::DPMN;
  bool pruning = true;
  RegularizerForm regularizer = RegularizerForm::pruned;
  TopologyStrategy strategy = TopologyStrategy::cosine_threshold;
};

inline ProtocolVariant default_binding(Variant v) {
  switch (v) {
    case Variant::DPMN:
      return {v, true, RegularizerForm::pruned, TopologyStrategy::cosine_threshold};
    case Variant::DFL:
      return {v, false, RegularizerForm::plain, TopologyStrategy::static_full};
    case Variant::DPMP:
      return {v, true, RegularizerForm::pruned, TopologyStrategy::static_ring};
    case Variant::DPCG:
      return {v, false, RegularizerForm::plain, TopologyStrategy::euclidean_nearest};
    case Variant::DPMN_r:
      return {v, true, RegularizerForm::pruned, TopologyStrategy::random_k};
  }
  return {};
}

inline ProtocolVariant resolve_variant(const ExperimentConfig& c) {
  auto b = default_binding(c.variant);
  if (c.pruning_enabled) b.pruning = *c.pruning_enabled;
  if (c.regularizer) b.regularizer = *c.regularizer;
  if (c.strategy) b.strategy = *c.strategy;
  return b;
}

// Every problem with the config, or an empty list.
inline std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> issues;
  auto add = [&](std::vector<std::string> more) { issues.insert(issues.end(), more.begin(), more.end()); };
  const std::size_t n = c.num_devices();
  if (n < 1) issues.emplace_back("num_devices must be >= 1");
  if (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)) issues.emplace_back("lambda must be finite and >= 0");
  if (!(c.init_scale >= 0.0) || !std::isfinite(c.init_scale)) issues.emplace_back("init_scale must be finite and >= 0");
  if (!(c.optimizer.learning_rate > 0.0) || !std::isfinite(c.optimizer.learning_rate))
    issues.emplace_back("optimizer.learning_rate must be finite and > 0");
  if (c.optimizer.local_steps < 1) issues.emplace_back("optimizer.local_steps must be >= 1");
  if (c.model.kind == LossKind::mlp && c.model.hidden < 1) issues.emplace_back("model.hidden must be >= 1");
  add(c.pruning.validate());
  auto topo = c.topology;
  topo.strategy = resolve_variant(c).strategy;
  add(topo.validate(n));

  if (c.data.source == DataSource::synthetic) {
    add(c.data.synthetic.validate());
    const bool regression = c.data.synthetic.task == TaskKind::regression;
    if (regression && c.model.kind != LossKind::quadratic)
      issues.emplace_back("model.kind " + to_string(c.model.kind) + " needs a classification task");
    if (!regression && c.model.kind == LossKind::quadratic)
      issues.emplace_back("model.kind quadratic needs a regression task");
  } else {
    const auto& s = c.data.idx;
    if (c.model.kind == LossKind::quadratic) issues.emplace_back("model.kind quadratic cannot train on IDX data");
    auto check_file = [&](const std::string& field, const std::string& path, bool required) {
      if (path.empty()) {
        if (required) issues.push_back("data.idx." + field + " is required");
        return;
      }
      if (!std::filesystem::exists(path)) issues.push_back("data.idx." + field + ": file not found: " + path);
    };
    check_file("train_images", s.train_images, true);
    check_file("train_labels", s.train_labels, true);
    check_file("test_images", s.test_images, false);
    check_file("test_labels", s.test_labels, false);
    if (s.test_images.empty() != s.test_labels.empty())
      issues.emplace_back("data.idx.test_images and data.idx.test_labels must be given together");
    if (s.labels_per_device < 1) issues.emplace_back("data.idx.labels_per_device must be >= 1");
  }
  return issues;
}

// ---- JSON ----------------------------------------------------------------

using json = nlohmann::ordered_json;

namespace detail {

// Reads typed fields out of JSON objects, collecting every problem instead
// of stopping at the first.
class ConfigReader {
 public:
  explicit ConfigReader(std::vector<std::string>& issues) : issues_(issues) {}

  const json* object(const json& parent, const std::string& key, const std::string& path,
                     std::initializer_list<const char*> allowed) {
    if (!parent.contains(key)) return nullptr;
    const auto& obj = parent.at(key);
    if (!obj.is_object()) {
      issues_.push_back(path + " must be an object");
      return nullptr;
    }
    check_keys(obj, path, allowed);
    return &obj;
  }

  void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; }))
        issues_.push_back(path + (path.empty() ? "" : ".") + it.key() + ": unknown field");
    }
  }

  void number(const json* obj, const char* key, const std::string& path, double& out) {
    if (!obj || !obj->contains(key)) return;
    const auto& v = obj->at(key);
    if (!v.is_number()) {
      issues_.push_back(field(path, key) + " must be a number");
      return;
    }
    out = v.get<double>();
  }

  template <typename Int>
  void integer(const json* obj, const char* key, const std::string& path, Int& out) {
    if (!obj || !obj->contains(key)) return;
    const auto& v = obj->at(key);
    if (!v.is_number_integer() || (std::is_unsigned_v<Int> && v.get<std::int64_t>() < 0 && !v.is_number_unsigned())) {
      issues_.push_back(field(path, key) + " must be a " +
                        (std::is_unsigned_v<Int> ? "non-negative integer" : "integer"));
      return;
    }
    out = v.is_number_unsigned() ? static_cast<Int>(v.get<std::uint64_t>()) : static_cast<Int>(v.get<std::int64_t>());
  }

  void boolean(const json* obj, const char* key, const std::string& path, bool& out) {
    if (!obj || !obj->contains(key)) return;
    const auto& v = obj->at(key);
    if (!v.is_boolean()) {
      issues_.push_back(field(path, key) + " must be true or false");
      return;
    }
    out = v.get<bool>();
  }

  void string(const json* obj, const char* key, const std::string& path, std::string& out) {
    if (!obj || !obj->contains(key)) return;
    const auto& v = obj->at(key);
    if (!v.is_string()) {
      issues_.push_back(field(path, key) + " must be a string");
      return;
    }
    out = v.get<std::string>();
  }

  template <typename Enum, typename Parse>
  void enumeration(const json* obj, const char* key, const std::string& path, Enum& out, Parse parse,
                   const char* choices) {
    if (!obj || !obj->contains(key)) return;
    std::string s;
    string(obj, key, path, s);
    if (s.empty() && !obj->at(key).is_string()) return;
    if (auto e = parse(s))
      out = *e;
    else
      issues_.push_back(field(path, key) + ": unknown value '" + s + "' (expected one of " + choices + ")");
  }

  static std::string field(const std::string& path, const char* key) {
    return path.empty() ? std::string(key) : path + "." + key;
  }

 private:
  std::vector<std::string>& issues_;
};

}  // namespace detail

// Parses and validates; throws ConfigError listing every problem found.
inline ExperimentConfig config_from_json(const json& j) {
  std::vector<std::string> issues;
  ExperimentConfig c;
  if (!j.is_object()) throw ConfigError({"config root must be an object"});
  detail::ConfigReader r(issues);
  r.check_keys(j, "",
               {"variant", "rounds", "seed", "lambda", "init_scale", "step_order", "regularizer", "model", "optimizer",
                "pruning", "topology", "data", "output"});
  const json* root = &j;
  if (!j.contains("seed")) issues.emplace_back("seed is required (no implicit entropy)");
  r.enumeration(root, "variant", "", c.variant, parse_variant, "DPMN, DFL, DPMP, DPCG, DPMN-r");
  r.integer(root, "rounds", "", c.rounds);
  r.integer(root, "seed", "", c.seed);
  r.number(root, "lambda", "", c.lambda);
  r.number(root, "init_scale", "", c.init_scale);
  r.enumeration(
      root, "step_order", "", c.step_order,
      [](std::string_view s) -> std::optional<StepOrder> {
        if (s == "prune-then-select") return StepOrder::prune_then_select;
        if (s == "select-then-prune") return StepOrder::select_then_prune;
        return std::nullopt;
      },
      "prune-then-select, select-then-prune");
  if (j.contains("regularizer")) {
    RegularizerForm f{};
    r.enumeration(root, "regularizer", "", f, parse_regularizer, "none, plain, pruned");
    if (j.at("regularizer").is_string() && parse_regularizer(j.at("regularizer").get<std::string>())) c.regularizer = f;
  }

  if (const auto* m = r.object(j, "model", "model", {"kind", "hidden"})) {
    r.enumeration(m, "kind", "model", c.model.kind, parse_loss_kind, "quadratic, logistic, mlp");
    r.integer(m, "hidden", "model", c.model.hidden);
  }
  if (const auto* o = r.object(j, "optimizer", "optimizer", {"learning_rate", "local_steps", "batch_size"})) {
    r.number(o, "learning_rate", "optimizer", c.optimizer.learning_rate);
    r.integer(o, "local_steps", "optimizer", c.optimizer.local_steps);
    r.integer(o, "batch_size", "optimizer", c.optimizer.batch_size);
  }
  if (const auto* p = r.object(j, "pruning", "pruning",
                               {"enabled", "target_sparsity", "start_round", "ramp_rounds", "regrow_fraction"})) {
    if (p->contains("enabled")) {
      bool on = false;
      r.boolean(p, "enabled", "pruning", on);
      if (p->at("enabled").is_boolean()) c.pruning_enabled = on;
    }
    r.number(p, "target_sparsity", "pruning", c.pruning.target_sparsity);
    r.integer(p, "start_round", "pruning", c.pruning.start_round);
    r.integer(p, "ramp_rounds", "pruning", c.pruning.ramp_rounds);
    r.number(p, "regrow_fraction", "pruning", c.pruning.regrow_fraction);
  }
  if (const auto* t = r.object(j, "topology", "topology", {"strategy", "delta", "k", "max_neighbors", "period"})) {
    if (t->contains("strategy")) {
      TopologyStrategy s{};
      r.enumeration(t, "strategy", "topology", s, parse_strategy,
                    "cosine-threshold, euclidean-nearest, random-k, static-full, static-ring");
      if (t->at("strategy").is_string() && parse_strategy(t->at("strategy").get<std::string>())) c.strategy = s;
    }
    r.number(t, "delta", "topology", c.topology.delta);
    r.integer(t, "k", "topology", c.topology.k);
    r.integer(t, "max_neighbors", "topology", c.topology.max_neighbors);
    r.integer(t, "period", "topology", c.topology.period);
  }
  if (const auto* d = r.object(j, "data", "data", {"source", "synthetic", "idx"})) {
    r.enumeration(
        d, "source", "data", c.data.source,
        [](std::string_view s) -> std::optional<DataSource> {
          if (s == "synthetic") return DataSource::synthetic;
          if (s == "idx") return DataSource::idx;
          return std::nullopt;
        },
        "synthetic, idx");
    if (const auto* s = r.object(*d, "synthetic", "data.synthetic",
                                 {"num_devices", "num_clusters", "assignment", "task", "num_classes", "feature_dim",
                                  "samples_per_device", "test_samples_per_device", "noise_scale", "signal_scale",
                                  "support_fraction", "cluster_correlation"})) {
      auto& sp = c.data.synthetic;
      const std::string path = "data.synthetic";
      r.integer(s, "num_devices", path, sp.num_devices);
      r.integer(s, "num_clusters", path, sp.num_clusters);
      r.enumeration(
          s, "assignment", path, sp.assignment,
          [](std::string_view v) -> std::optional<ClusterAssignment> {
            if (v == "round-robin") return ClusterAssignment::round_robin;
            if (v == "contiguous") return ClusterAssignment::contiguous;
            return std::nullopt;
          },
          "round-robin, contiguous");
      r.enumeration(
          s, "task", path, sp.task,
          [](std::string_view v) -> std::optional<TaskKind> {
            if (v == "regression") return TaskKind::regression;
            if (v == "classification") return TaskKind::classification;
            return std::nullopt;
          },
          "regression, classification");
      r.integer(s, "num_classes", path, sp.num_classes);
      r.integer(s, "feature_dim", path, sp.feature_dim);
      r.integer(s, "samples_per_device", path, sp.samples_per_device);
      r.integer(s, "test_samples_per_device", path, sp.test_samples_per_device);
      r.number(s, "noise_scale", path, sp.noise_scale);
      r.number(s, "signal_scale", path, sp.signal_scale);
      r.number(s, "support_fraction", path, sp.support_fraction);
      r.number(s, "cluster_correlation", path, sp.cluster_correlation);
    }
    if (const auto* s = r.object(*d, "idx", "data.idx",
                                 {"train_images", "train_labels", "test_images", "test_labels", "num_devices",
                                  "labels_per_device", "max_per_class"})) {
      auto& ix = c.data.idx;
      const std::string path = "data.idx";
      r.string(s, "train_images", path, ix.train_images);
      r.string(s, "train_labels", path, ix.train_labels);
      r.string(s, "test_images", path, ix.test_images);
      r.string(s, "test_labels", path, ix.test_labels);
      r.integer(s, "num_devices", path, ix.num_devices);
      r.integer(s, "labels_per_device", path, ix.labels_per_device);
      r.integer(s, "max_per_class", path, ix.max_per_class);
    }
  }
  if (const auto* o = r.object(j, "output", "output", {"dir", "emit_models"})) {
    r.string(o, "dir", "output", c.output.dir);
    r.boolean(o, "emit_models", "output", c.output.emit_models);
  }

  // Fields that failed to parse keep their defaults, so semantic checks
  // still run and every problem is reported in one pass.
  auto more = validate(c);
  issues.insert(issues.end(), more.begin(), more.end());
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return c;
}

// Fully resolved form: every field explicit, variant bindings spelled out.
inline json config_to_json(const ExperimentConfig& c) {
  const auto v = resolve_variant(c);
  json j;
  j["variant"] = to_string(c.variant);
  j["rounds"] = c.rounds;
  j["seed"] = c.seed;
  j["lambda"] = c.lambda;
  j["init_scale"] = c.init_scale;
  j["step_order"] = to_string(c.step_order);
  j["regularizer"] = to_string(v.regularizer);
  j["model"] = {{"kind", to_string(c.model.kind)}, {"hidden", c.model.hidden}};
  j["optimizer"] = {{"learning_rate", c.optimizer.learning_rate},
                    {"local_steps", c.optimizer.local_steps},
                    {"batch_size", c.optimizer.batch_size}};
  j["pruning"] = {{"enabled", v.pruning},
                  {"target_sparsity", c.pruning.target_sparsity},
                  {"start_round", c.pruning.start_round},
                  {"ramp_rounds", c.pruning.ramp_rounds},
                  {"regrow_fraction", c.pruning.regrow_fraction}};
  j["topology"] = {{"strategy", to_string(v.strategy)},
                   {"delta", c.topology.delta},
                   {"k", c.topology.k},
                   {"max_neighbors", c.topology.max_neighbors},
                   {"period", c.topology.period}};
  json data;
  if (c.data.source == DataSource::synthetic) {
    const auto& s = c.data.synthetic;
    data["source"] = "synthetic";
    data["synthetic"] = {
        {"num_devices", s.num_devices},
        {"num_clusters", s.num_clusters},
        {"assignment", s.assignment == ClusterAssignment::round_robin ? "round-robin" : "contiguous"},
        {"task", s.task == TaskKind::regression ? "regression" : "classification"},
        {"num_classes", s.num_classes},
        {"feature_dim", s.feature_dim},
        {"samples_per_device", s.samples_per_device},
        {"test_samples_per_device", s.test_samples_per_device},
        {"noise_scale", s.noise_scale},
        {"signal_scale", s.signal_scale},
        {"support_fraction", s.support_fraction},
        {"cluster_correlation", s.cluster_correlation}};
  } else {
    const auto& s = c.data.idx;
    data["source"] = "idx";
    data["idx"] = {{"train_images", s.train_images},         {"train_labels", s.train_labels},
                   {"test_images", s.test_images},           {"test_labels", s.test_labels},
                   {"num_devices", s.num_devices},           {"labels_per_device", s.labels_per_device},
                   {"max_per_class", s.max_per_class}};
  }
  j["data"] = std::move(data);
  j["output"] = {{"dir", c.output.dir}, {"emit_models", c.output.emit_models}};
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot read config file: " + path});
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError({path + ": " + e.what()});
  }
  return config_from_json(j);
}

}  // namespace dpmn
