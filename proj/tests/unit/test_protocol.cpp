// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "cil/dataset.hpp"
#include "cil/error.hpp"
#include "cil/protocol.hpp"
#include "cil/rng.hpp"
#include "cil/tensor.hpp"

using namespace cil;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("cil_test_" + name);
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("rng is reproducible and forks are independent") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  const Rng root(7);
  auto f1 = root.fork(1);
  auto f1b = root.fork(1);
  auto f2 = root.fork(2);
  const auto x = f1.next();
  CHECK(x == f1b.next());
  CHECK(x != f2.next());
}

TEST_CASE("rng ranges") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(rng.below(7) < 7);
  }
  double sum = 0.0;
  double sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("order_classes") {
  CHECK_THROWS_AS(order_classes(1, 0), ConfigError);
  CHECK(order_classes(10, 5) == order_classes(10, 5));
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto order = order_classes(17, seed);
    std::sort(order.begin(), order.end());
    std::vector<std::uint32_t> expected(17);
    std::iota(expected.begin(), expected.end(), 0u);
    CHECK(order == expected);
  }
}

TEST_CASE("order_classes golden permutation for seed 0") {
  // Recorded from the pinned generator; any change here breaks
  // cross-implementation reproducibility.
  const std::vector<std::uint32_t> golden{7, 8, 3, 1, 5, 4, 2, 0, 9, 6};
  CHECK(order_classes(10, 0) == golden);
}

TEST_CASE("make_splits") {
  const auto order = order_classes(10, 1);
  const auto p = make_splits(order, 5);
  CHECK(p.split_sizes == std::vector<std::size_t>{5, 1, 1, 1, 1, 1});
  CHECK(make_splits(order_classes(100, 1), 5).split_sizes == std::vector<std::size_t>{50, 10, 10, 10, 10, 10});
  try {
    make_splits(order, 3);
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("T") != std::string::npos);
  }
  CHECK_THROWS_AS(make_splits(order_classes(9, 0), 1), ConfigError);
  CHECK_THROWS_AS(make_splits(order, std::vector<std::size_t>{4, 4}), ConfigError);
  CHECK(make_splits(order, std::vector<std::size_t>{2, 4, 4}).steps() == 2);
}

TEST_CASE("splits partition the class set") {
  for (std::size_t n : {4, 8, 12, 20, 40}) {
    for (std::size_t t = 1; t <= n / 2; ++t) {
      if ((n / 2) % t != 0) continue;
      const auto p = make_splits(order_classes(n, n + t), t);
      std::vector<int> seen(n, 0);
      for (std::size_t g = 0; g < p.groups(); ++g) {
        for (std::size_t pos = p.group_begin(g); pos < p.group_end(g); ++pos) {
          ++seen[p.class_order[pos]];
          CHECK(p.group_of(pos) == g);
        }
      }
      CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    }
  }
}

TEST_CASE("to_positions and select_group") {
  SyntheticSpec spec;
  spec.classes = 4;
  spec.dim = 3;
  spec.per_class = 5;
  const auto data = gen_synthetic(spec);
  const auto p = make_splits(order_classes(4, 2), 2);
  const auto pos = to_positions(data, p);
  const auto inverse = p.positions();
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(pos.samples[i].label == inverse[data.samples[i].label]);
  const auto g0 = select_group(pos, p, 0);
  CHECK(g0.size() == 10);
  for (const auto& s : g0.samples) CHECK(s.label < 2);
}

TEST_CASE("synthetic data") {
  SyntheticSpec spec;
  spec.classes = 10;
  spec.dim = 32;
  spec.per_class = 100;
  spec.seed = 1;
  const auto a = gen_synthetic(spec);
  CHECK(a == gen_synthetic(spec));
  CHECK(a.size() == 1000);
  const auto means = synthetic_means(spec);
  for (std::size_t i = 0; i < means.size(); ++i) {
    CHECK(l2_norm(means[i]) == doctest::Approx(1.0).epsilon(1e-6));
    for (std::size_t j = 0; j < i; ++j) CHECK(cosine(means[i], means[j]) < 0.9);
  }

  spec.spread = 0.0;
  spec.per_class = 4;
  const auto flat = gen_synthetic(spec);
  const auto flat_means = synthetic_means(spec);
  for (const auto& s : flat.samples) {
    for (std::size_t d = 0; d < spec.dim; ++d) {
      CHECK(s.input[d] == doctest::Approx(flat_means[s.label][d]).epsilon(1e-7));
    }
  }
}

TEST_CASE("synthetic classes are separable at small spread") {
  SyntheticSpec spec;
  spec.classes = 2;
  spec.dim = 8;
  spec.per_class = 200;
  spec.spread = 0.05;
  const auto data = gen_synthetic(spec);
  const auto means = synthetic_means(spec);
  // Linear rule: sign of (x . (m1 - m0)) - threshold at the midpoint.
  Vector dir(spec.dim);
  double mid = 0.0;
  for (std::size_t d = 0; d < spec.dim; ++d) {
    dir[d] = means[1][d] - means[0][d];
    mid += 0.5 * (means[1][d] + means[0][d]) * dir[d];
  }
  std::size_t correct = 0;
  for (const auto& s : data.samples) correct += ((dot(s.input, dir) > mid) == (s.label == 1)) ? 1 : 0;
  CHECK(correct == data.size());
}

TEST_CASE("csv loading") {
  const auto path = temp_file("three.csv");
  write_text(path, "0.5,1.5,0\n-1,2,1\n3,4.25,1\n");
  const auto d = load_dataset(path, {});
  CHECK(d.size() == 3);
  CHECK(d.dim() == 2);
  CHECK(d.class_count == 2);
  CHECK(d.samples[2].input == Vector{3, 4.25});

  write_text(path, "");
  try {
    load_dataset(path, {});
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("no samples") != std::string::npos);
  }

  write_text(path, "1,2,0\n1,x,1\n");
  try {
    load_dataset(path, {});
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }

  write_text(path, "1,2,0\n1,2,5\n");
  LoadOptions declared;
  declared.class_count = 3;
  CHECK_THROWS_AS(load_dataset(path, declared), ValidationError);

  write_text(path, "a,b,label\n1,2,0\n");
  LoadOptions header;
  header.has_header = true;
  CHECK(load_dataset(path, header).size() == 1);
  std::filesystem::remove(path);
}

TEST_CASE("dataset round trips bitwise") {
  SyntheticSpec spec;
  spec.classes = 3;
  spec.dim = 5;
  spec.per_class = 7;
  spec.seed = 11;
  const auto data = gen_synthetic(spec);
  for (auto format : {DataFormat::csv, DataFormat::raw_f32}) {
    const auto path = temp_file(format == DataFormat::csv ? "rt.csv" : "rt.dds");
    save_dataset(path, data, format, true);
    LoadOptions opts;
    opts.format = format;
    opts.has_header = true;
    opts.class_count = 3;
    CHECK(load_dataset(path, opts) == data);
    std::filesystem::remove(path);
  }
}

TEST_CASE("raw format rejects bad magic and truncation") {
  const auto path = temp_file("bad.dds");
  write_text(path, "XXXX");
  LoadOptions opts;
  opts.format = DataFormat::raw_f32;
  CHECK_THROWS(load_dataset(path, opts));
  SyntheticSpec spec;
  spec.classes = 2;
  spec.dim = 2;
  spec.per_class = 2;
  save_dataset(path, gen_synthetic(spec), DataFormat::raw_f32);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  CHECK_THROWS(load_dataset(path, opts));
  std::filesystem::remove(path);
}

TEST_CASE("label histogram") {
  Dataset d;
  d.class_count = 3;
  d.samples = {{0, {1.0}, 2}, {1, {1.0}, 0}, {2, {1.0}, 2}};
  CHECK(label_histogram(d) == std::vector<std::size_t>{1, 0, 2});
}
