#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dpmn/errors.hpp"

namespace dpmn {

// One protocol round as observed after the exchange.
struct RoundTrace {
  std::int64_t round = 0;
  double lambda = 0.0;
  double F = 0.0;
  double H = 0.0;
  double R = 0.0;
  double mean_accuracy = 0.0;
  double mean_sparsity = 0.0;
  std::vector<double> accuracy;  // per device, evaluation shard
  std::vector<double> loss;      // per device, f_i on the training shard
  std::vector<std::uint64_t> bytes_sent;
  std::vector<std::uint64_t> bytes_received;
  std::vector<std::uint64_t> value_bytes_sent;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (i, j): i pulled from j

  std::size_t num_devices() const noexcept { return loss.size(); }

  std::uint64_t total_sent() const noexcept {
    std::uint64_t s = 0;
    for (auto b : bytes_sent) s += b;
    return s;
  }
  std::uint64_t total_received() const noexcept {
    std::uint64_t s = 0;
    for (auto b : bytes_received) s += b;
    return s;
  }
  std::uint64_t total_value_bytes() const noexcept {
    std::uint64_t s = 0;
    for (auto b : value_bytes_sent) s += b;
    return s;
  }

  friend bool operator==(const RoundTrace&, const RoundTrace&) = default;
};

struct RunSummary {
  std::string variant;
  std::uint64_t seed = 0;
  std::size_t num_devices = 0;
  std::size_t rounds = 0;
  double final_mean_accuracy = 0.0;
  double final_mean_loss = 0.0;
  double final_F = 0.0;
  double final_H = 0.0;
  double final_R = 0.0;
  std::uint64_t total_bytes = 0;
  std::uint64_t total_value_bytes = 0;
  std::vector<double> series_R;
  std::vector<double> series_accuracy;
  std::vector<std::uint64_t> series_bytes;
  std::vector<double> final_accuracy;  // per device
  std::vector<double> final_loss;      // per device
  std::vector<std::vector<double>> final_models;
};

using trace_json = nlohmann::ordered_json;

inline trace_json to_json(const RoundTrace& t) {
  trace_json j;
  j["round"] = t.round;
  j["lambda"] = t.lambda;
  j["F"] = t.F;
  j["H"] = t.H;
  j["R"] = t.R;
  j["mean_accuracy"] = t.mean_accuracy;
  j["mean_sparsity"] = t.mean_sparsity;
  j["accuracy"] = t.accuracy;
  j["loss"] = t.loss;
  j["bytes_sent"] = t.bytes_sent;
  j["bytes_received"] = t.bytes_received;
  j["value_bytes_sent"] = t.value_bytes_sent;
  auto edges = trace_json::array();
  for (const auto& [i, k] : t.edges) edges.push_back({i, k});
  j["edges"] = std::move(edges);
  return j;
}

inline RoundTrace trace_from_json(const trace_json& j) {
  try {
    RoundTrace t;
    t.round = j.at("round").get<std::int64_t>();
    t.lambda = j.at("lambda").get<double>();
    t.F = j.at("F").get<double>();
    t.H = j.at("H").get<double>();
    t.R = j.at("R").get<double>();
    t.mean_accuracy = j.at("mean_accuracy").get<double>();
    t.mean_sparsity = j.at("mean_sparsity").get<double>();
    t.accuracy = j.at("accuracy").get<std::vector<double>>();
    t.loss = j.at("loss").get<std::vector<double>>();
    t.bytes_sent = j.at("bytes_sent").get<std::vector<std::uint64_t>>();
    t.bytes_received = j.at("bytes_received").get<std::vector<std::uint64_t>>();
    t.value_bytes_sent = j.at("value_bytes_sent").get<std::vector<std::uint64_t>>();
    for (const auto& e : j.at("edges")) t.edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    const std::size_t n = t.loss.size();
    if (t.accuracy.size() != n || t.bytes_sent.size() != n || t.bytes_received.size() != n ||
        t.value_bytes_sent.size() != n)
      throw SchemaError("round " + std::to_string(t.round) + ": per-device arrays differ in length");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed trace record: ") + e.what());
  }
}

// One record per line.
inline std::string emit_trace(const std::vector<RoundTrace>& traces) {
  std::string out;
  for (const auto& t : traces) {
    out += to_json(t).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<RoundTrace> parse_trace(const std::string& text) {
  std::vector<RoundTrace> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    trace_json j;
    try {
      j = trace_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(trace_from_json(j));
  }
  return out;
}

inline std::vector<RoundTrace> read_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open trace file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_trace(ss.str());
}

inline trace_json to_json(const RunSummary& s, bool with_models) {
  trace_json j;
  j["variant"] = s.variant;
  j["seed"] = s.seed;
  j["num_devices"] = s.num_devices;
  j["rounds"] = s.rounds;
  j["final_mean_accuracy"] = s.final_mean_accuracy;
  j["final_mean_loss"] = s.final_mean_loss;
  j["final_F"] = s.final_F;
  j["final_H"] = s.final_H;
  j["final_R"] = s.final_R;
  j["total_bytes"] = s.total_bytes;
  j["total_value_bytes"] = s.total_value_bytes;
  j["final_accuracy"] = s.final_accuracy;
  j["final_loss"] = s.final_loss;
  j["series"] = {{"R", s.series_R}, {"mean_accuracy", s.series_accuracy}, {"bytes", s.series_bytes}};
  if (with_models) j["final_models"] = s.final_models;
  return j;
}

}  // namespace dpmn
