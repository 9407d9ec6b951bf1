// SPDX-License-Identifier: Apache-2.0
#include "cil/checkpoint.hpp"

#include "cil/binary_io.hpp"
#include "cil/error.hpp"

namespace cil {

namespace {

void put_floats(io::Writer& w, std::span<const double> values) {
  for (double v : values) w.f32(v);
}

Vector get_floats(io::Reader& r, std::size_t n) {
  Vector out(n);
  for (auto& v : out) v = r.f32();
  return out;
}

void encode_network(io::Writer& w, const Network& net) {
  w.tag("DDE1");
  w.u32(static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& layer : net.layers) {
    w.u32(static_cast<std::uint32_t>(layer.outputs()));
    w.u32(static_cast<std::uint32_t>(layer.inputs()));
    put_floats(w, layer.weight.data());
    put_floats(w, layer.bias.data());
  }
  w.u32(static_cast<std::uint32_t>(net.classifier.classes()));
  w.u32(static_cast<std::uint32_t>(net.classifier.dim()));
  put_floats(w, net.classifier.weights.data());
  w.f32(net.classifier.scale);
}

Network decode_network(io::Reader& r) {
  r.expect_tag("DDE1");
  Network net;
  const auto layers = r.u32();
  if (layers == 0) throw FormatError("network has no layers");
  for (std::uint32_t l = 0; l < layers; ++l) {
    const auto rows = r.u32();
    const auto cols = r.u32();
    if (rows == 0 || cols == 0) throw FormatError("layer with zero extent");
    if (static_cast<std::uint64_t>(rows) * cols * 4 > r.remaining()) throw FormatError("unexpected end of data");
    auto w = get_floats(r, static_cast<std::size_t>(rows) * cols);
    auto b = get_floats(r, rows);
    net.layers.push_back({Tensor({rows, cols}, std::move(w)), Tensor({rows}, std::move(b))});
    if (l > 0 && net.layers[l].inputs() != net.layers[l - 1].outputs()) {
      throw FormatError("layer widths do not chain");
    }
  }
  const auto classes = r.u32();
  const auto dim = r.u32();
  if (classes == 0 || dim != net.feature_dim()) throw FormatError("classifier does not match the feature width");
  if (static_cast<std::uint64_t>(classes) * dim * 4 > r.remaining()) throw FormatError("unexpected end of data");
  net.classifier.weights = Tensor({classes, dim}, get_floats(r, static_cast<std::size_t>(classes) * dim));
  net.classifier.scale = r.f32();
  return net;
}

void encode_store(io::Writer& w, const ExemplarStore& store) {
  w.tag("EXMP");
  w.u32(static_cast<std::uint32_t>(store.budget()));
  std::uint32_t dim = 0;
  for (const auto& [label, samples] : store.classes()) dim = static_cast<std::uint32_t>(samples.front().input.size());
  w.u32(dim);
  w.u32(static_cast<std::uint32_t>(store.classes().size()));
  for (const auto& [label, samples] : store.classes()) {
    w.u32(label);
    w.u32(static_cast<std::uint32_t>(samples.size()));
    for (const auto& s : samples) {
      w.u32(s.id);
      put_floats(w, s.input);
    }
  }
}

ExemplarStore decode_store(io::Reader& r) {
  r.expect_tag("EXMP");
  ExemplarStore store(r.u32());
  const auto dim = r.u32();
  const auto buckets = r.u32();
  for (std::uint32_t b = 0; b < buckets; ++b) {
    const auto label = r.u32();
    const auto count = r.u32();
    if (count > store.budget()) throw FormatError("exemplar bucket exceeds its budget");
    std::vector<Sample> samples;
    for (std::uint32_t i = 0; i < count; ++i) {
      Sample s;
      s.id = r.u32();
      s.label = label;
      s.input = get_floats(r, dim);
      samples.push_back(std::move(s));
    }
    store.set_class(label, std::move(samples));
  }
  return store;
}

void encode_head(io::Writer& w, const HeadState& head) {
  w.tag("HEAD");
  std::uint32_t dim = 0;
  if (head.previous_head) dim = static_cast<std::uint32_t>(head.previous_head->size());
  if (head.head) dim = static_cast<std::uint32_t>(head.head->size());
  w.u32(dim);
  w.u8(static_cast<std::uint8_t>((head.previous_head ? 1 : 0) | (head.head ? 2 : 0)));
  if (head.previous_head) put_floats(w, *head.previous_head);
  if (head.head) put_floats(w, *head.head);
  w.f32(head.alpha);
  w.f32(head.beta);
}

HeadState decode_head(io::Reader& r, double momentum) {
  r.expect_tag("HEAD");
  HeadState head;
  head.momentum = momentum;
  const auto dim = r.u32();
  const auto flags = r.u8();
  if (flags > 3) throw FormatError("unknown head flags");
  if (flags & 1) head.previous_head = get_floats(r, dim);
  if (flags & 2) head.head = get_floats(r, dim);
  head.alpha = r.f32();
  head.beta = r.f32();
  return head;
}

void encode_progress(io::Writer& w, const RunProgress& p) {
  w.tag("PROG");
  w.u32(p.completed_step);
  w.u64(p.seed);
  w.u32(static_cast<std::uint32_t>(p.class_order.size()));
  for (auto c : p.class_order) w.u32(c);
  w.u32(static_cast<std::uint32_t>(p.matrix.steps()));
  for (const auto& row : p.matrix.rows()) {
    for (double a : row) w.f64(a);
  }
  for (double a : p.overall) w.f64(a);
}

RunProgress decode_progress(io::Reader& r) {
  r.expect_tag("PROG");
  RunProgress p;
  p.completed_step = r.u32();
  p.seed = r.u64();
  const auto classes = r.u32();
  if (static_cast<std::uint64_t>(classes) * 4 > r.remaining()) throw FormatError("unexpected end of data");
  for (std::uint32_t i = 0; i < classes; ++i) p.class_order.push_back(r.u32());
  const auto rows = r.u32();
  if (rows > 1u << 16) throw FormatError("implausible number of evaluated steps");
  try {
    for (std::uint32_t t = 0; t < rows; ++t) {
      std::vector<double> row(t + 1);
      for (auto& a : row) a = r.f64();
      p.matrix.append_row(std::move(row));
    }
  } catch (const ValidationError& e) {
    throw FormatError(std::string("accuracy matrix: ") + e.what());
  }
  for (std::uint32_t t = 0; t < rows; ++t) p.overall.push_back(r.f64());
  return p;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  io::Writer w;
  encode_network(w, c.network);
  encode_store(w, c.store);
  encode_head(w, c.head);
  encode_progress(w, c.progress);
  return w.release();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  io::Reader r(bytes);
  Checkpoint c;
  try {
    c.network = decode_network(r);
    c.store = decode_store(r);
    c.head = decode_head(r, 0.9);
    c.progress = decode_progress(r);
  } catch (const InternalError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  if (!r.at_end()) throw FormatError("checkpoint has trailing bytes");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  io::write_file(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(io::read_file(path)); }

void quantize(Network& network) {
  for (auto p : network.parameters()) round_to_float(p);
}

void quantize(HeadState& head) {
  if (head.previous_head) round_to_float(*head.previous_head);
  if (head.step_head) round_to_float(*head.step_head);
  if (head.head) round_to_float(*head.head);
  head.alpha = static_cast<double>(static_cast<float>(head.alpha));
  head.beta = static_cast<double>(static_cast<float>(head.beta));
}

}  // namespace cil
