// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cil/config.hpp"
#include "cil/dataset.hpp"
#include "cil/metrics.hpp"

namespace cil {

struct RunResult {
  std::uint64_t seed = 0;
  AccuracyMatrix matrix;
  std::vector<double> overall;     // one per evaluated step
  double avg_inc_acc = 0.0;
  std::vector<double> forgetting;  // F_t for one-based t = 2..T+1
  double avg_inc_forgetting = 0.0;
  double wall_seconds = 0.0;
  std::string config_echo;
};

/// Read access to a held-out split, reported through a callback so tests can
/// check when the runner touches it.
class TrackedDataset {
 public:
  TrackedDataset(Dataset data, std::function<void()> on_access)
      : data_(std::move(data)), on_access_(std::move(on_access)) {}

  const Dataset& get() const {
    if (on_access_) on_access_();
    return data_;
  }

 private:
  Dataset data_;
  std::function<void()> on_access_;
};

struct RunHooks {
  std::function<void(std::size_t step)> on_train_begin;
  std::function<void(std::size_t step)> on_train_end;
  std::function<void()> on_test_access;
};

struct RunOptions {
  RunHooks hooks;
  /// Continue from a checkpoint written by an earlier run of the same config.
  std::optional<std::string> resume_from;
  /// Stop once this (zero-based) step has been evaluated and checkpointed.
  std::optional<std::size_t> stop_after;
  /// When non-empty, a checkpoint step_<t>.ckpt is written after every step.
  std::string checkpoint_dir;
};

/// Train and test splits in original class ids.
struct ExperimentData {
  Dataset train;
  Dataset test;
};

ExperimentData load_experiment_data(const ExperimentConfig& config, std::uint64_t seed);

/// Step 0 trains on the first split with cross-entropy; each later step
/// snapshots the model, mixes in exemplars, optionally builds the neighbour
/// cache, trains, derives the head direction (fitting alpha and beta when a
/// balanced subset exists), evaluates every group and refreshes the store.
RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options = {});

/// CSV with columns step,group,accuracy. Each step contributes one row per
/// group and an `all` row with the pooled accuracy; summary rows follow:
/// `avg_inc_acc,,v`, `forgetting,<step>,F` (F_t with t = step + 1) and
/// `avg_inc_forgetting,,v`. Values use four decimals.
std::string format_results(const RunResult& result);
void emit_results(const RunResult& result, const std::string& path);

/// Reads avg_inc_acc back from format_results output.
double parse_avg_inc_acc(const std::string& csv);

enum class SweepAxis { R, T, K, scheme };
SweepAxis parse_axis(const std::string& name);

struct SweepPoint {
  std::string value;
  std::vector<RunResult> runs;  // one per seed
  double mean_acc = 0.0;
  double std_acc = 0.0;
  double mean_forgetting = 0.0;
  double std_forgetting = 0.0;
};

/// One run per value x seed; `jobs` > 1 runs them concurrently with
/// identical results.
std::vector<SweepPoint> sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                              std::size_t jobs = 1);

std::string format_sweep(const std::vector<SweepPoint>& points, SweepAxis axis);

/// Evaluates a checkpoint on a labelled dataset in original class ids;
/// classes the checkpoint has not learned are ignored.
struct CheckpointEval {
  std::size_t samples = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
};
CheckpointEval evaluate_checkpoint(const std::string& checkpoint_path, const Dataset& data);

}  // namespace cil
