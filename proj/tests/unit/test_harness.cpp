// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "cil/checkpoint.hpp"
#include "cil/config.hpp"
#include "cil/error.hpp"
#include "cil/experiment.hpp"

using namespace cil;

namespace {

const char* kSmall = R"(seeds = 3
feat_distill = true

[data]
classes = 10
dim = 8
train_per_class = 20
test_per_class = 20
spread = 0.3

[protocol]
T = 5
R = 2

[model]
hidden = 12
scale = 8.0

[optim]
epochs = 2
base_epochs = 3
batch_size = 16

[dce]
enabled = true
k = 2

[mer]
enabled = true
finetune_epochs = 3
)";

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("cil_unit_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<std::uint8_t> bytes_of(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string csv_value(const std::string& csv, const std::string& key) {
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + ",", 0) == 0) return line.substr(line.find_last_of(',') + 1);
  }
  return {};
}

}  // namespace

TEST_CASE("config parsing and overrides") {
  const auto c = parse_config(kSmall);
  CHECK(c.steps == 5);
  CHECK(c.replay_per_class == 2);
  CHECK(c.seeds == std::vector<std::uint64_t>{3});
  CHECK(c.hidden == std::vector<std::size_t>{12});
  CHECK(c.dce_enabled);
  CHECK(c.resolved_k() == 2);
  CHECK_NOTHROW(validate(c));

  auto d = c;
  apply_override(d, "protocol.R=7");
  apply_override(d, "dce.scheme=bottom_k");
  CHECK(d.replay_per_class == 7);
  CHECK(d.scheme.kind == WeightKind::bottom_k);
  CHECK_FALSE(d.dce_new_only);
  apply_override(d, "dce.neighbours=new");
  CHECK(d.dce_new_only);
  CHECK_THROWS_AS(apply_override(d, "dce.neighbours=old"), ConfigError);
  CHECK(parse_config(to_text(d)).replay_per_class == 7);
  CHECK(to_text(parse_config(to_text(d))) == to_text(d));

  CHECK_THROWS_AS(apply_override(d, "no_equals_sign"), ConfigError);
  CHECK_THROWS_AS(apply_override(d, "model.depth=3"), ConfigError);
  CHECK_THROWS_AS(apply_override(d, "protocol.R=many"), ConfigError);
  CHECK_THROWS_AS(apply_override(d, "dce.scheme=nearest"), ConfigError);
  CHECK_THROWS_AS(parse_config("[data]\nclasses = = 3\n[["), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/cil.ini"), ConfigError);
}

TEST_CASE("config validation") {
  const auto c = parse_config(kSmall);
  auto bad = c;
  apply_override(bad, "mer.beta=1.5");
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = c;
  apply_override(bad, "T=4");  // 5 incremental classes do not split into 4 steps
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = c;
  apply_override(bad, "dce.k=5000");
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = c;
  apply_override(bad, "optim.momentum=1.0");
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = c;
  apply_override(bad, "model.hidden=0");
  CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("checkpoint round trip is byte exact") {
  const auto dir = scratch("ckpt");
  RunOptions opts;
  opts.checkpoint_dir = dir.string();
  run_experiment(parse_config(kSmall), 3, opts);
  const auto path = dir / "step_5.ckpt";
  REQUIRE(std::filesystem::exists(path));
  const auto raw = bytes_of(path);
  CHECK(std::string(raw.begin(), raw.begin() + 4) == "DDE1");
  const auto ck = decode_checkpoint(raw);
  CHECK(encode_checkpoint(ck) == raw);
  CHECK(ck.progress.completed_step == 5);
  CHECK(ck.progress.seed == 3);
  CHECK(ck.store.size() == 10 * 2);

  for (std::size_t cut : {std::size_t{3}, std::size_t{10}, raw.size() / 2, raw.size() - 1}) {
    std::vector<std::uint8_t> truncated(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(decode_checkpoint(truncated), FormatError);
  }
  auto garbled = raw;
  garbled[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(garbled), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("results csv") {
  const auto r = run_experiment(parse_config(kSmall), 3);
  CHECK(r.matrix.steps() == 6);
  CHECK(r.overall.size() == 6);
  CHECK(r.forgetting.size() == 5);
  const auto csv = format_results(r);

  std::size_t blocks = 0;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find(",all,") != std::string::npos) ++blocks;
  }
  CHECK(blocks == 6);
  CHECK(parse_avg_inc_acc(csv) == doctest::Approx(r.avg_inc_acc).epsilon(1e-4));
  CHECK(std::stod(csv_value(csv, "avg_inc_forgetting")) == doctest::Approx(r.avg_inc_forgetting).epsilon(1e-4));
  CHECK(std::stod(csv_value(csv, "forgetting,1")) == doctest::Approx(r.forgetting[0]).epsilon(1e-4));
  CHECK_THROWS_AS(format_results(RunResult{}), ValidationError);
}

TEST_CASE("runs are deterministic and resumable") {
  const auto c = parse_config(kSmall);
  const auto a = run_experiment(c, 3);
  const auto b = run_experiment(c, 3);
  CHECK(a.matrix == b.matrix);
  CHECK(format_results(a) == format_results(b));

  const auto dir = scratch("resume");
  RunOptions first;
  first.checkpoint_dir = dir.string();
  first.stop_after = 2;
  run_experiment(c, 3, first);
  REQUIRE(std::filesystem::exists(dir / "step_2.ckpt"));
  CHECK_FALSE(std::filesystem::exists(dir / "step_3.ckpt"));
  RunOptions second;
  second.checkpoint_dir = dir.string();
  second.resume_from = (dir / "step_2.ckpt").string();
  const auto resumed = run_experiment(c, 3, second);
  CHECK(resumed.matrix == a.matrix);

  CHECK_THROWS_AS(run_experiment(c, 4, second), StateError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("test data is never read while training") {
  bool training = false;
  std::size_t reads = 0;
  std::size_t leaks = 0;
  RunOptions opts;
  opts.hooks.on_train_begin = [&](std::size_t) { training = true; };
  opts.hooks.on_train_end = [&](std::size_t) { training = false; };
  opts.hooks.on_test_access = [&] {
    ++reads;
    if (training) ++leaks;
  };
  run_experiment(parse_config(kSmall), 3, opts);
  CHECK(reads > 0);
  CHECK(leaks == 0);
}

TEST_CASE("step failures name the step") {
  auto c = parse_config(kSmall);
  apply_override(c, "optim.lr=1e308");
  std::string message;
  try {
    run_experiment(c, 3);
  } catch (const Error& e) {
    message = e.what();
  }
  CHECK(message.rfind("step 0: ", 0) == 0);
  CHECK(message.find("diverged") != std::string::npos);
}

TEST_CASE("sweep") {
  auto c = parse_config(kSmall);
  c.seeds = {0, 1};
  CHECK_THROWS_AS(sweep(c, SweepAxis::R, {}), ConfigError);
  CHECK_THROWS_AS(parse_axis("lr"), ConfigError);
  CHECK(parse_axis("R") == SweepAxis::R);
  const auto pts = sweep(c, SweepAxis::R, {"0", "2"}, 2);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].runs.size() == 2);
  CHECK(pts[1].runs[0].matrix == run_experiment(c, 0).matrix);
  const auto text = format_sweep(pts, SweepAxis::R);
  CHECK(text.rfind("axis,value,seeds,mean_acc,std_acc,mean_forgetting,std_forgetting", 0) == 0);
}

TEST_CASE("checkpoint evaluation") {
  const auto dir = scratch("eval");
  RunOptions opts;
  opts.checkpoint_dir = dir.string();
  const auto c = parse_config(kSmall);
  run_experiment(c, 3, opts);
  const auto data = load_experiment_data(c, 3);
  const auto e = evaluate_checkpoint((dir / "step_5.ckpt").string(), data.test);
  CHECK(e.samples == data.test.size());
  CHECK(e.accuracy == doctest::Approx(double(e.correct) / double(e.samples)));
  CHECK_THROWS_AS(evaluate_checkpoint((dir / "missing.ckpt").string(), data.test), Error);
  std::filesystem::remove_all(dir);
}
