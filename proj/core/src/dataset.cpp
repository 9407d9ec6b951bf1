// SPDX-License-Identifier: Apache-2.0
#include "cil/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>

#include "cil/binary_io.hpp"
#include "cil/error.hpp"
#include "cil/rng.hpp"

namespace cil {

void Dataset::validate() const {
  if (samples.empty()) throw ValidationError("no samples");
  std::unordered_set<std::uint32_t> ids;
  const auto d = dim();
  for (const auto& s : samples) {
    if (s.label >= class_count) {
      throw ValidationError("label " + std::to_string(s.label) + " is not below the class count " +
                            std::to_string(class_count));
    }
    if (s.input.size() != d) throw ValidationError("sample " + std::to_string(s.id) + " has inconsistent dimension");
    if (!ids.insert(s.id).second) throw ValidationError("duplicate sample id " + std::to_string(s.id));
  }
}

std::vector<Vector> synthetic_means(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (spec.dim < 2) throw ConfigError("synthetic data needs dimension >= 2");
  Rng rng = Rng(spec.seed).fork(0x6d65616e);  // "mean"
  std::vector<Vector> means;
  while (means.size() < spec.classes) {
    Vector m(spec.dim);
    for (auto& v : m) v = rng.normal();
    m = normalized(m);
    round_to_float(m);
    bool collides = false;
    for (const auto& other : means) collides = collides || cosine(m, other) >= 0.9;
    if (!collides) means.push_back(std::move(m));
  }
  return means;
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  const auto means = synthetic_means(spec);
  Rng rng = Rng(spec.seed).fork(0x6e6f697365);  // "noise"
  Dataset out;
  out.class_count = spec.classes;
  std::uint32_t id = 0;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      Sample s;
      s.id = id++;
      s.label = static_cast<std::uint32_t>(c);
      s.input = means[c];
      for (auto& v : s.input) v += spec.spread * rng.normal();
      round_to_float(s.input);
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

Dataset load_csv(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  Dataset out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  bool header_pending = options.has_header;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    std::vector<std::string_view> fields;
    std::string_view rest = body;
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(trim(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    auto fail = [&](const std::string& what) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + what);
    };
    if (fields.size() < 2) fail("need at least one feature and a label");
    if (columns == 0) columns = fields.size();
    if (fields.size() != columns) fail("expected " + std::to_string(columns) + " columns");
    Sample s;
    s.id = static_cast<std::uint32_t>(out.samples.size());
    for (std::size_t i = 0; i + 1 < fields.size(); ++i) {
      double v = 0.0;
      const auto f = fields[i];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size()) fail("malformed value '" + std::string(f) + "'");
      s.input.push_back(v);
    }
    const auto lf = fields.back();
    const auto [ptr, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), s.label);
    if (ec != std::errc() || ptr != lf.data() + lf.size()) fail("malformed label '" + std::string(lf) + "'");
    out.samples.push_back(std::move(s));
  }
  return out;
}

Dataset load_raw(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path.string());
  io::Reader r(bytes);
  try {
    r.expect_tag("DDS1");
    const auto n = r.u32();
    const auto dim = r.u32();
    Dataset out;
    out.samples.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      Sample s;
      s.id = i;
      s.input.resize(dim);
      for (auto& v : s.input) v = r.f32();
      s.label = r.u32();
      out.samples.push_back(std::move(s));
    }
    if (!r.at_end()) throw FormatError("trailing bytes after last record");
    return out;
  } catch (const FormatError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  Dataset out = options.format == DataFormat::csv ? load_csv(path, options) : load_raw(path);
  if (out.empty()) throw ValidationError("no samples");
  if (options.class_count > 0) {
    out.class_count = options.class_count;
  } else {
    std::uint32_t top = 0;
    for (const auto& s : out.samples) top = std::max(top, s.label);
    out.class_count = top + 1;
  }
  out.validate();
  return out;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data, DataFormat format, bool header) {
  if (format == DataFormat::raw_f32) {
    io::Writer w;
    w.tag("DDS1");
    w.u32(static_cast<std::uint32_t>(data.size()));
    w.u32(static_cast<std::uint32_t>(data.dim()));
    for (const auto& s : data.samples) {
      for (double v : s.input) w.f32(v);
      w.u32(s.label);
    }
    io::write_file(path.string(), w.data());
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  if (header) {
    for (std::size_t i = 0; i < data.dim(); ++i) out << 'x' << i << ',';
    out << "label\n";
  }
  char buf[64];
  for (const auto& s : data.samples) {
    for (double v : s.input) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out.write(buf, res.ptr - buf);
      out << ',';
    }
    out << s.label << '\n';
  }
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

std::vector<std::size_t> label_histogram(const Dataset& data) {
  std::vector<std::size_t> hist(data.class_count, 0);
  for (const auto& s : data.samples) {
    if (s.label >= hist.size()) hist.resize(s.label + 1, 0);
    ++hist[s.label];
  }
  return hist;
}

}  // namespace cil
