// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cil/dataset.hpp"
#include "cil/dce.hpp"
#include "cil/mer.hpp"
#include "cil/replay.hpp"
#include "cil/train.hpp"

namespace cil {

struct DataConfig {
  std::string source = "synthetic";  // synthetic | file
  std::size_t classes = 10;
  std::size_t dim = 32;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 100;
  double spread = 0.5;
  // Files are read when source = file; labels are original class ids.
  std::string train_path;
  std::string test_path;
  DataFormat format = DataFormat::csv;
  bool header = false;
};

struct ExperimentConfig {
  DataConfig data;

  std::size_t steps = 5;                  // T
  std::size_t replay_per_class = 0;       // R
  std::vector<std::size_t> split_sizes;   // explicit sizes override T when set
  SelectionStrategy selection = SelectionStrategy::herding;
  std::vector<std::uint64_t> seeds = {0};

  std::vector<std::size_t> hidden = {64, 32};
  double scale = 4.0;
  bool learn_scale = true;

  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t epochs = 30;
  std::size_t base_epochs = 30;  // step 0
  std::size_t batch_size = 32;

  DistillToggles distill;

  bool dce_enabled = false;
  WeightScheme scheme;  // k = 0 until resolved; see resolved_k()
  bool dce_k_auto = true;
  bool dce_new_only = false;  // cache only this step's new data; exemplars then train with plain CE

  bool mer_enabled = false;
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  FinetuneSettings finetune;

  std::string results_path;
  std::string checkpoint_dir;

  /// Neighbour count: explicit dce.k, else 10 up to 200 classes and 1 above.
  std::size_t resolved_k() const;
};

/// INI-style text: `key = value` lines, `[section]` headers, `;`/`#`
/// comments. Keys are addressed as section.key (root keys bare).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Applies one `key=value` override using the same key names.
void apply_override(ExperimentConfig& config, const std::string& assignment);

/// Throws ConfigError naming the offending setting.
void validate(const ExperimentConfig& config);

/// Canonical key=value rendering (echoed into results).
std::string to_text(const ExperimentConfig& config);

}  // namespace cil
