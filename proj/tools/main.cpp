// SPDX-License-Identifier: Apache-2.0
// Command-line front end: run, sweep and eval.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cil/checkpoint.hpp"
#include "cil/config.hpp"
#include "cil/error.hpp"
#include "cil/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

cil::ExperimentConfig load_with_overrides(const std::string& path, const std::vector<std::string>& overrides) {
  auto config = cil::load_config(path);
  for (const auto& o : overrides) cil::apply_override(config, o);
  cil::validate(config);
  return config;
}

std::vector<std::string> split_values(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// results.csv -> results_seed3.csv when a run covers several seeds.
std::string seed_path(const std::string& path, std::uint64_t seed, bool many) {
  if (!many) return path;
  std::filesystem::path p(path);
  auto name = p.stem().string() + "_seed" + std::to_string(seed) + p.extension().string();
  return (p.parent_path() / name).string();
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides, const std::string& resume,
            const std::string& checkpoint_dir) {
  const auto config = load_with_overrides(config_path, overrides);
  const bool many = config.seeds.size() > 1;
  for (auto seed : config.seeds) {
    cil::RunOptions options;
    if (!resume.empty()) options.resume_from = resume;
    options.checkpoint_dir = checkpoint_dir.empty() ? config.checkpoint_dir : checkpoint_dir;
    if (many && !options.checkpoint_dir.empty()) {
      options.checkpoint_dir = (std::filesystem::path(options.checkpoint_dir) / ("seed" + std::to_string(seed))).string();
    }
    const auto result = cil::run_experiment(config, seed, options);
    if (config.results_path.empty()) {
      std::cout << cil::format_results(result);
    } else {
      cil::emit_results(result, seed_path(config.results_path, seed, many));
    }
    std::fprintf(stderr, "seed %llu: avg_inc_acc %.4f avg_inc_forgetting %.4f (%.1fs)\n",
                 static_cast<unsigned long long>(seed), result.avg_inc_acc, result.avg_inc_forgetting,
                 result.wall_seconds);
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& overrides, const std::string& axis_name,
              const std::string& values, std::size_t jobs) {
  const auto config = load_with_overrides(config_path, overrides);
  const auto axis = cil::parse_axis(axis_name);
  const auto points = cil::sweep(config, axis, split_values(values), jobs);
  const auto table = cil::format_sweep(points, axis);
  if (config.results_path.empty()) {
    std::cout << table;
  } else {
    std::ofstream out(config.results_path, std::ios::binary | std::ios::trunc);
    if (!(out << table)) throw cil::Error("cannot write '" + config.results_path + "'");
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_path, bool header) {
  cil::LoadOptions opts;
  opts.format = std::filesystem::path(data_path).extension() == ".csv" ? cil::DataFormat::csv
                                                                          : cil::DataFormat::raw_f32;
  opts.has_header = header;
  const auto data = cil::load_dataset(data_path, opts);
  const auto r = cil::evaluate_checkpoint(checkpoint, data);
  std::printf("samples,correct,accuracy\n%zu,%zu,%.4f\n", r.samples, r.correct, r.accuracy);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class-incremental training runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;

  auto* run = app.add_subcommand("run", "Run every configured seed and write the results CSV");
  std::string resume;
  std::string checkpoint_dir;
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--set", overrides, "Override a config key (key=value)");
  run->add_option("--resume", resume, "Continue from a checkpoint");
  run->add_option("--checkpoint-dir", checkpoint_dir, "Write step_<t>.ckpt after every step");

  auto* sw = app.add_subcommand("sweep", "Run one axis over several values and seeds");
  std::string axis;
  std::string values;
  std::size_t jobs = 1;
  sw->add_option("--config", config_path, "Config file")->required();
  sw->add_option("--set", overrides, "Override a config key (key=value)");
  sw->add_option("--axis", axis, "R, T, K or scheme")->required();
  sw->add_option("--values", values, "Comma-separated values")->required();
  sw->add_option("--jobs", jobs, "Concurrent runs");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a labelled dataset");
  std::string checkpoint;
  std::string data_path;
  bool header = false;
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  ev->add_option("--data", data_path, "Dataset (.csv or DDS1 raw)")->required();
  ev->add_flag("--header", header, "CSV has a header line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Error& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, overrides, resume, checkpoint_dir);
    if (*sw) return cmd_sweep(config_path, overrides, axis, values, jobs);
    return cmd_eval(checkpoint, data_path, header);
  } catch (const cil::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
