#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "dpmn/config.hpp"
#include "dpmn/errors.hpp"
#include "dpmn/parallel.hpp"
#include "dpmn/protocol.hpp"
#include "dpmn/trace.hpp"

namespace dpmn {

inline constexpr const char* kTraceFile = "trace.jsonl";
inline constexpr const char* kSummaryFile = "summary.json";
inline constexpr const char* kResolvedConfigFile = "config.resolved.json";

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

// Fixed-notation-free double formatting that round-trips.
inline std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

}  // namespace detail

// Runs one experiment and writes trace, summary and resolved config into `dir`.
inline ExperimentResult run_to_dir(const ExperimentConfig& config, const std::filesystem::path& dir,
                                   std::size_t workers = 1) {
  auto result = run_experiment(config, workers);
  std::filesystem::create_directories(dir);
  detail::write_text(dir / kTraceFile, emit_trace(result.traces));
  detail::write_text(dir / kSummaryFile, to_json(result.summary, config.output.emit_models).dump(2) + "\n");
  auto resolved = config;
  resolved.output.dir = dir.string();
  detail::write_text(dir / kResolvedConfigFile, config_to_json(resolved).dump(2) + "\n");
  return result;
}

inline const std::vector<std::string>& sweepable_axes() {
  static const std::vector<std::string> axes{"delta", "N", "target_sparsity", "variant", "lambda"};
  return axes;
}

// Copy of `base` with one field set from its textual value.
inline ExperimentConfig apply_axis(const ExperimentConfig& base, const std::string& axis, const std::string& value) {
  ExperimentConfig c = base;
  auto number = [&](double& out) {
    std::size_t used = 0;
    try {
      out = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty())
      throw ConfigError({"sweep value '" + value + "' for axis " + axis + " is not a number"});
  };
  if (axis == "delta") {
    number(c.topology.delta);
  } else if (axis == "lambda") {
    number(c.lambda);
  } else if (axis == "target_sparsity") {
    number(c.pruning.target_sparsity);
  } else if (axis == "N") {
    double n = 0;
    number(n);
    if (n < 1 || n != static_cast<double>(static_cast<std::size_t>(n)))
      throw ConfigError({"sweep value '" + value + "' for axis N is not a positive integer"});
    c.set_num_devices(static_cast<std::size_t>(n));
  } else if (axis == "variant") {
    auto v = parse_variant(value);
    if (!v) throw ConfigError({"sweep value '" + value + "' is not a protocol variant"});
    c.variant = *v;
  } else {
    std::string list;
    for (const auto& a : sweepable_axes()) list += (list.empty() ? "" : ", ") + a;
    throw ConfigError({"unknown sweep axis '" + axis + "' (sweepable: " + list + ")"});
  }
  if (auto issues = validate(c); !issues.empty()) throw ConfigError(std::move(issues));
  return c;
}

struct SweepRow {
  std::string value;
  std::uint64_t seed = 0;
  double final_accuracy = 0.0;
  double final_loss = 0.0;
  std::uint64_t total_bytes = 0;
  double final_R = 0.0;
};

struct SweepResult {
  std::string axis;
  std::vector<SweepRow> rows;
  std::string seed_policy;
};

inline std::string cell_name(const std::string& axis, const std::string& value, std::uint64_t seed) {
  return "cell_" + axis + "_" + value + "_seed" + std::to_string(seed);
}

// One run per (value, seed). Cells are independent: running them in
// parallel does not change any cell's output. When `out_dir` is non-empty
// each cell's artifacts go to their own subdirectory.
inline SweepResult run_sweep(const ExperimentConfig& base, const std::string& axis,
                             const std::vector<std::string>& values, std::vector<std::uint64_t> seeds = {},
                             const std::filesystem::path& out_dir = {}, std::size_t parallel = 1) {
  if (values.empty()) throw ConfigError({"sweep needs at least one value"});
  if (seeds.empty()) seeds.push_back(base.seed);

  std::vector<ExperimentConfig> cells;
  std::vector<std::string> issues;
  for (const auto& v : values) {
    for (auto s : seeds) {
      try {
        auto c = apply_axis(base, axis, v);
        c.seed = s;
        cells.push_back(std::move(c));
      } catch (const ConfigError& e) {
        issues.insert(issues.end(), e.issues().begin(), e.issues().end());
      }
    }
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));

  SweepResult result;
  result.axis = axis;
  result.rows.resize(cells.size());
  if (seeds.size() == 1) {
    result.seed_policy = "same seed " + std::to_string(seeds.front()) + " for every cell";
  } else {
    std::string list;
    for (auto s : seeds) list += (list.empty() ? "" : ",") + std::to_string(s);
    result.seed_policy = "seed list " + list + " for every value";
  }
  parallel_for(cells.size(), parallel, [&](std::size_t idx) {
    const auto& c = cells[idx];
    const auto& value = values[idx / seeds.size()];
    const auto r = out_dir.empty() ? run_experiment(c) : run_to_dir(c, out_dir / cell_name(axis, value, c.seed));
    auto& row = result.rows[idx];
    row.value = value;
    row.seed = c.seed;
    row.final_accuracy = r.summary.final_mean_accuracy;
    row.final_loss = r.summary.final_mean_loss;
    row.total_bytes = r.summary.total_bytes;
    row.final_R = r.summary.final_R;
  });
  return result;
}

inline std::string format_sweep(const SweepResult& r) {
  std::string out = "# seed policy: " + r.seed_policy + "\n";
  out += r.axis + "\tseed\tfinal_accuracy\tfinal_loss\ttotal_bytes\tfinal_R\n";
  for (const auto& row : r.rows) {
    out += row.value + "\t" + std::to_string(row.seed) + "\t" + detail::fmt(row.final_accuracy) + "\t" +
           detail::fmt(row.final_loss) + "\t" + std::to_string(row.total_bytes) + "\t" + detail::fmt(row.final_R) +
           "\n";
  }
  return out;
}

struct CompareRow {
  std::int64_t round = 0;
  double delta_accuracy = 0.0;
  std::int64_t delta_bytes = 0;
  double delta_R = 0.0;
};

struct CompareReport {
  std::vector<CompareRow> rows;
  std::uint64_t total_bytes_a = 0;
  std::uint64_t total_bytes_b = 0;
  // 1 - total_bytes_a / total_bytes_b; 0 when b sent nothing.
  double bandwidth_saving = 0.0;
};

// Per-round a - b.
inline CompareReport compare_traces(const std::vector<RoundTrace>& a, const std::vector<RoundTrace>& b) {
  if (a.size() != b.size())
    throw SchemaError("traces differ in round count: " + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()));
  CompareReport rep;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].round != b[t].round)
      throw SchemaError("round index mismatch at record " + std::to_string(t) + ": " + std::to_string(a[t].round) +
                        " vs " + std::to_string(b[t].round));
    if (a[t].num_devices() != b[t].num_devices())
      throw SchemaError("device count mismatch at round " + std::to_string(a[t].round));
    CompareRow row;
    row.round = a[t].round;
    row.delta_accuracy = a[t].mean_accuracy - b[t].mean_accuracy;
    row.delta_bytes = static_cast<std::int64_t>(a[t].total_sent()) - static_cast<std::int64_t>(b[t].total_sent());
    row.delta_R = a[t].R - b[t].R;
    rep.rows.push_back(row);
    rep.total_bytes_a += a[t].total_sent();
    rep.total_bytes_b += b[t].total_sent();
  }
  if (rep.total_bytes_b > 0)
    rep.bandwidth_saving =
        1.0 - static_cast<double>(rep.total_bytes_a) / static_cast<double>(rep.total_bytes_b);
  return rep;
}

inline std::string format_compare(const CompareReport& r) {
  std::string out = "round\tdelta_accuracy\tdelta_bytes\tdelta_R\n";
  for (const auto& row : r.rows) {
    out += std::to_string(row.round) + "\t" + detail::fmt(row.delta_accuracy) + "\t" +
           std::to_string(row.delta_bytes) + "\t" + detail::fmt(row.delta_R) + "\n";
  }
  out += "# total_bytes_a " + std::to_string(r.total_bytes_a) + "\n";
  out += "# total_bytes_b " + std::to_string(r.total_bytes_b) + "\n";
  out += "# bandwidth_saving " + detail::fmt(r.bandwidth_saving) + "\n";
  return out;
}

}  // namespace dpmn
