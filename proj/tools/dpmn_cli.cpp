// Command-line front end: run, sweep, compare, validate.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dpmn/dpmn.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

dpmn::ExperimentConfig load(const std::string& path, const std::optional<std::uint64_t>& seed,
                            const std::string& out) {
  auto c = dpmn::load_config(path);
  if (seed) c.seed = *seed;
  if (!out.empty()) c.output.dir = out;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized personalized federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t parallel = 1;

  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides output.dir)");
  run->add_option("--seed", seed, "Seed (overrides config)");
  run->add_option("--parallel", parallel, "Worker threads for device updates")->check(CLI::PositiveNumber);

  std::string axis;
  std::string values;
  std::string seeds;
  auto* sweep = app.add_subcommand("sweep", "Run one experiment per axis value and tabulate");
  sweep->add_option("--config", config_path, "Base config (JSON)")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out_dir, "Output directory (overrides output.dir)");
  sweep->add_option("--seed", seed, "Seed (overrides config)");
  sweep->add_option("--axis", axis, "delta | N | target_sparsity | variant | lambda")->required();
  sweep->add_option("--values", values, "Comma-separated axis values")->required();
  sweep->add_option("--seeds", seeds, "Comma-separated seed list, run for every value");
  sweep->add_option("--parallel", parallel, "Cells run concurrently")->check(CLI::PositiveNumber);

  std::string trace_a, trace_b, compare_out;
  auto* compare = app.add_subcommand("compare", "Per-round deltas between two traces");
  compare->add_option("trace_a", trace_a, "Trace file A")->required();
  compare->add_option("trace_b", trace_b, "Trace file B (baseline)")->required();
  compare->add_option("--out", compare_out, "Write the report here instead of stdout");

  auto* validate = app.add_subcommand("validate", "Check a config and list every problem");
  validate->add_option("--config", config_path, "Experiment config (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const auto c = load(config_path, seed, out_dir);
      const auto r = dpmn::run_to_dir(c, c.output.dir, parallel);
      std::cout << "rounds " << r.summary.rounds << "  final accuracy " << r.summary.final_mean_accuracy
                << "  total bytes " << r.summary.total_bytes << "  -> " << c.output.dir << "\n";
      return 0;
    }
    if (*sweep) {
      const auto c = load(config_path, seed, out_dir);
      std::vector<std::uint64_t> seed_list;
      for (const auto& s : split_csv(seeds)) seed_list.push_back(std::stoull(s));
      const auto r = dpmn::run_sweep(c, axis, split_csv(values), seed_list, c.output.dir, parallel);
      const auto table = dpmn::format_sweep(r);
      std::filesystem::create_directories(c.output.dir);
      std::ofstream(std::filesystem::path(c.output.dir) / "sweep.tsv", std::ios::binary) << table;
      std::cout << table;
      return 0;
    }
    if (*compare) {
      const auto report = dpmn::compare_traces(dpmn::read_trace_file(trace_a), dpmn::read_trace_file(trace_b));
      const auto text = dpmn::format_compare(report);
      if (compare_out.empty())
        std::cout << text;
      else
        std::ofstream(compare_out, std::ios::binary) << text;
      return 0;
    }
    if (*validate) {
      dpmn::load_config(config_path);
      std::cout << config_path << ": ok\n";
      return 0;
    }
  } catch (const dpmn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
