// SPDX-License-Identifier: Apache-2.0
#include "cil/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "cil/checkpoint.hpp"
#include "cil/dce.hpp"
#include "cil/error.hpp"
#include "cil/optim.hpp"
#include "cil/protocol.hpp"
#include "cil/replay.hpp"
#include "cil/train.hpp"

namespace cil {

namespace {

// Stream tags for per-step generators; each step derives its streams from
// (seed, step) alone so a resumed run draws exactly what the original did.
enum StreamTag : std::uint64_t {
  kInitStream = 1,
  kStepStreamBase = 100,
  kShuffle = 1,
  kNeighbours = 2,
  kNewClasses = 3,
  kSelection = 4,
  kBalanced = 5,
};

IncrementalProtocol build_protocol(const ExperimentConfig& config, std::uint64_t seed) {
  auto order = order_classes(config.data.classes, seed);
  auto protocol = config.split_sizes.empty() ? make_splits(std::move(order), config.steps)
                                             : make_splits(std::move(order), config.split_sizes);
  protocol.replay_per_class = config.replay_per_class;
  protocol.seed = seed;
  return protocol;
}

void train_epochs(const Dataset& training, std::size_t epochs, std::size_t batch_size, Network& model,
                  OptimizerState& optimizer, const TrainContext& context, Rng& shuffle_rng) {
  std::vector<const Sample*> order;
  order.reserve(training.size());
  for (const auto& s : training.samples) order.push_back(&s);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t end = std::min(order.size(), begin + batch_size);
      const std::span<const Sample* const> batch(order.data() + begin, end - begin);
      if (context.cache != nullptr) {
        dce_train_step(batch, model, optimizer, context);
      } else {
        train_step(batch, model, optimizer, context);
      }
    }
    for (auto p : std::as_const(model).parameters()) {
      if (!std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); })) {
        throw Error("training diverged in epoch " + std::to_string(epoch + 1));
      }
    }
  }
}

RunResult summarize(const RunProgress& progress, const ExperimentConfig& config, std::uint64_t seed,
                    double seconds) {
  RunResult r;
  r.seed = seed;
  r.matrix = progress.matrix;
  r.overall = progress.overall;
  r.avg_inc_acc = r.overall.empty() ? 0.0 : average_incremental_accuracy(r.overall);
  for (std::size_t t = 2; t <= r.matrix.steps(); ++t) r.forgetting.push_back(forgetting(r.matrix, t));
  r.avg_inc_forgetting = r.matrix.steps() >= 2 ? average_incremental_forgetting(r.matrix) : 0.0;
  r.wall_seconds = seconds;
  r.config_echo = to_text(config);
  return r;
}

std::string step_error(std::size_t step, const std::string& what) {
  return "step " + std::to_string(step) + ": " + what;
}

}  // namespace

ExperimentData load_experiment_data(const ExperimentConfig& config, std::uint64_t seed) {
  ExperimentData out;
  if (config.data.source == "file") {
    LoadOptions opts;
    opts.format = config.data.format;
    opts.has_header = config.data.header;
    opts.class_count = config.data.classes;
    out.train = load_dataset(config.data.train_path, opts);
    out.test = load_dataset(config.data.test_path, opts);
    return out;
  }
  SyntheticSpec spec;
  spec.classes = config.data.classes;
  spec.dim = config.data.dim;
  spec.per_class = config.data.train_per_class + config.data.test_per_class;
  spec.spread = config.data.spread;
  spec.seed = seed;
  const auto all = gen_synthetic(spec);
  out.train.class_count = out.test.class_count = spec.classes;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const bool is_train = (i % spec.per_class) < config.data.train_per_class;
    (is_train ? out.train : out.test).samples.push_back(all.samples[i]);
  }
  return out;
}

RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  validate(config);
  const auto protocol = build_protocol(config, seed);
  auto data = load_experiment_data(config, seed);
  if (data.train.dim() != data.test.dim()) throw ConfigError("train and test dimensions differ");
  const auto train_pos = to_positions(data.train, protocol);
  const auto test_pos = to_positions(data.test, protocol);

  std::vector<Dataset> train_groups;
  std::vector<TrackedDataset> test_groups;
  for (std::size_t g = 0; g < protocol.groups(); ++g) {
    train_groups.push_back(select_group(train_pos, protocol, g));
    test_groups.emplace_back(select_group(test_pos, protocol, g), options.hooks.on_test_access);
  }

  const Rng root(seed);
  Network model;
  ExemplarStore store(config.replay_per_class);
  HeadState head;
  RunProgress progress;
  progress.seed = seed;
  progress.class_order = protocol.class_order;
  std::size_t first_step = 0;

  if (options.resume_from) {
    auto ckpt = load_checkpoint(*options.resume_from);
    if (ckpt.progress.seed != seed || ckpt.progress.class_order != protocol.class_order) {
      throw StateError("checkpoint was written by a different seed or class order");
    }
    if (ckpt.store.budget() != config.replay_per_class) throw StateError("checkpoint replay budget differs");
    model = std::move(ckpt.network);
    store = std::move(ckpt.store);
    head = std::move(ckpt.head);
    progress = std::move(ckpt.progress);
    first_step = progress.completed_step + 1;
  } else {
    NetworkSpec spec;
    spec.input_dim = train_pos.dim();
    spec.hidden = config.hidden;
    spec.classes = protocol.split_sizes[0];
    spec.scale = config.scale;
    Rng init = root.fork(kInitStream);
    model = make_network(spec, init);
    quantize(model);
  }
  head.momentum = config.momentum;

  for (std::size_t step = first_step; step <= protocol.steps(); ++step) {
    try {
      const Rng step_rng = root.fork(kStepStreamBase + step);
      Rng shuffle_rng = step_rng.fork(kShuffle);
      Rng neighbour_rng = step_rng.fork(kNeighbours);
      Rng class_rng = step_rng.fork(kNewClasses);
      Rng selection_rng = step_rng.fork(kSelection);
      Rng balanced_rng = step_rng.fork(kBalanced);

      if (options.hooks.on_train_begin) options.hooks.on_train_begin(step);
      if (step == 0) {
        auto optimizer = make_optimizer(model, config.learning_rate, config.momentum);
        TrainContext ctx;
        ctx.learn_scale = config.learn_scale;
        train_epochs(train_groups[0], config.base_epochs, config.batch_size, model, optimizer, ctx, shuffle_rng);
      } else {
        const ModelSnapshot snapshot(model, step - 1);
        model.classifier.add_classes(protocol.split_sizes[step], class_rng);
        const auto training = build_training_set(train_groups[step], store);
        std::unordered_map<std::uint32_t, const Sample*> by_id;
        for (const auto& s : training.samples) by_id.emplace(s.id, &s);
        std::optional<NeighborCache> cache;
        if (config.dce_enabled) cache = build_cache(config.dce_new_only ? train_groups[step] : training, snapshot);

        auto optimizer = make_optimizer(model, config.learning_rate, config.momentum);
        head.trace.clear();
        head.iterations = 0;
        TrainContext ctx;
        ctx.snapshot = &snapshot;
        ctx.cache = cache ? &*cache : nullptr;
        ctx.samples_by_id = &by_id;
        ctx.scheme = {config.scheme.kind, config.resolved_k()};
        ctx.distill = config.distill;
        ctx.head = config.mer_enabled ? &head : nullptr;
        ctx.rng = &neighbour_rng;
        ctx.learn_scale = config.learn_scale;
        train_epochs(training, config.epochs, config.batch_size, model, optimizer, ctx, shuffle_rng);

        if (config.mer_enabled) {
          finalize_head(head);
          head.alpha = config.alpha;
          head.beta = config.beta;
          Dataset subset;
          if (config.replay_per_class > 0) {
            subset = balanced_subset(train_groups[step], store.samples(), config.replay_per_class, balanced_rng);
          }
          learn_alpha_beta(model, subset, head, config.finetune, config.replay_per_class);
        }
      }
      if (options.hooks.on_train_end) options.hooks.on_train_end(step);

      quantize(model);
      quantize(head);

      std::vector<Dataset> visible;
      for (std::size_t g = 0; g <= step; ++g) visible.push_back(test_groups[g].get());
      const auto row = evaluate(model, visible, config.mer_enabled ? &head : nullptr);
      progress.matrix.append_row(row.group_accuracy);
      progress.overall.push_back(row.overall);

      update_store(store, train_groups[step], model, config.selection, selection_rng);
      advance_head(head);
      progress.completed_step = static_cast<std::uint32_t>(step);

      if (!options.checkpoint_dir.empty()) {
        std::filesystem::create_directories(options.checkpoint_dir);
        const auto path = std::filesystem::path(options.checkpoint_dir) / ("step_" + std::to_string(step) + ".ckpt");
        save_checkpoint(path.string(), Checkpoint{model, store, head, progress});
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw Error(step_error(step, e.what()));
    }
    if (options.stop_after && *options.stop_after == step) break;
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return summarize(progress, config, seed, seconds);
}

std::string format_results(const RunResult& result) {
  if (result.matrix.steps() == 0) throw ValidationError("run has no evaluated steps");
  std::string out = "step,group,accuracy\n";
  char buf[96];
  for (std::size_t t = 0; t < result.matrix.steps(); ++t) {
    for (std::size_t g = 0; g <= t; ++g) {
      std::snprintf(buf, sizeof(buf), "%zu,%zu,%.4f\n", t, g, result.matrix.at(t, g));
      out += buf;
    }
    std::snprintf(buf, sizeof(buf), "%zu,all,%.4f\n", t, result.overall.at(t));
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "avg_inc_acc,,%.4f\n", result.avg_inc_acc);
  out += buf;
  for (std::size_t i = 0; i < result.forgetting.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "forgetting,%zu,%.4f\n", i + 1, result.forgetting[i]);
    out += buf;
  }
  if (!result.forgetting.empty()) {
    std::snprintf(buf, sizeof(buf), "avg_inc_forgetting,,%.4f\n", result.avg_inc_forgetting);
    out += buf;
  }
  return out;
}

void emit_results(const RunResult& result, const std::string& path) {
  const auto text = format_results(result);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error("write to '" + path + "' failed");
}

double parse_avg_inc_acc(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  const std::string key = "avg_inc_acc,,";
  while (std::getline(in, line)) {
    if (line.rfind(key, 0) == 0) return std::stod(line.substr(key.size()));
  }
  throw ParseError("results have no avg_inc_acc row");
}

SweepAxis parse_axis(const std::string& name) {
  if (name == "R") return SweepAxis::R;
  if (name == "T") return SweepAxis::T;
  if (name == "K") return SweepAxis::K;
  if (name == "scheme") return SweepAxis::scheme;
  throw ConfigError("unknown sweep axis '" + name + "' (expected R, T, K or scheme)");
}

namespace {

const char* axis_key(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::R: return "protocol.R";
    case SweepAxis::T: return "protocol.T";
    case SweepAxis::K: return "dce.k";
    case SweepAxis::scheme: return "dce.scheme";
  }
  return "";
}

const char* axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::R: return "R";
    case SweepAxis::T: return "T";
    case SweepAxis::K: return "K";
    case SweepAxis::scheme: return "scheme";
  }
  return "";
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace

std::vector<SweepPoint> sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<std::string>& values,
                              std::size_t jobs) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<ExperimentConfig> configs;
  for (const auto& v : values) {
    auto c = base;
    apply_override(c, std::string(axis_key(axis)) + "=" + v);
    validate(c);
    configs.push_back(std::move(c));
  }
  struct Job {
    std::size_t point;
    std::uint64_t seed;
  };
  std::vector<Job> work;
  for (std::size_t p = 0; p < configs.size(); ++p) {
    for (auto seed : configs[p].seeds) work.push_back({p, seed});
  }
  std::vector<RunResult> results(work.size());
  const std::size_t width = std::max<std::size_t>(1, jobs);
  for (std::size_t begin = 0; begin < work.size(); begin += width) {
    std::vector<std::future<RunResult>> running;
    const std::size_t end = std::min(work.size(), begin + width);
    for (std::size_t i = begin; i < end; ++i) {
      const auto& job = work[i];
      running.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred,
                                   [&configs, job] { return run_experiment(configs[job.point], job.seed); }));
    }
    for (std::size_t i = begin; i < end; ++i) results[i] = running[i - begin].get();
  }
  std::vector<SweepPoint> points(configs.size());
  for (std::size_t p = 0; p < configs.size(); ++p) points[p].value = values[p];
  for (std::size_t i = 0; i < work.size(); ++i) points[work[i].point].runs.push_back(std::move(results[i]));
  for (auto& point : points) {
    std::vector<double> acc;
    std::vector<double> fgt;
    for (const auto& r : point.runs) {
      acc.push_back(r.avg_inc_acc);
      fgt.push_back(r.avg_inc_forgetting);
    }
    std::tie(point.mean_acc, point.std_acc) = mean_std(acc);
    std::tie(point.mean_forgetting, point.std_forgetting) = mean_std(fgt);
  }
  return points;
}

std::string format_sweep(const std::vector<SweepPoint>& points, SweepAxis axis) {
  std::string out = "axis,value,seeds,mean_acc,std_acc,mean_forgetting,std_forgetting\n";
  char buf[160];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%.4f,%.4f,%.4f,%.4f\n", axis_name(axis), p.value.c_str(),
                  p.runs.size(), p.mean_acc, p.std_acc, p.mean_forgetting, p.std_forgetting);
    out += buf;
  }
  return out;
}

CheckpointEval evaluate_checkpoint(const std::string& checkpoint_path, const Dataset& data) {
  const auto ckpt = load_checkpoint(checkpoint_path);
  const auto& order = ckpt.progress.class_order;
  std::vector<std::uint32_t> position(order.size());
  for (std::size_t p = 0; p < order.size(); ++p) position[order[p]] = static_cast<std::uint32_t>(p);
  const HeadState* mer = ckpt.head.head ? &ckpt.head : nullptr;
  CheckpointEval out;
  for (const auto& s : data.samples) {
    if (s.label >= position.size()) throw ValidationError("label beyond the checkpoint's class set");
    const auto target = position[s.label];
    if (target >= ckpt.network.classifier.classes()) continue;
    ++out.samples;
    out.correct += predict(ckpt.network, s.input, mer) == target ? 1 : 0;
  }
  if (out.samples == 0) throw ValidationError("no samples of classes the checkpoint has learned");
  out.accuracy = static_cast<double>(out.correct) / static_cast<double>(out.samples);
  return out;
}

}  // namespace cil
