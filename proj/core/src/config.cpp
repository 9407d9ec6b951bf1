// SPDX-License-Identifier: Apache-2.0
#include "cil/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <sstream>

#include "cil/error.hpp"
#include "cil/protocol.hpp"

namespace cil {

namespace pt = boost::property_tree;

std::size_t ExperimentConfig::resolved_k() const {
  if (!dce_k_auto) return scheme.k;
  return data.classes <= 200 ? 10 : 1;
}

namespace {

std::string trimmed(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const auto text = trimmed(raw);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("setting '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const auto v = trimmed(raw);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("setting '" + key + "': expected a boolean, got '" + v + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& raw) {
  std::vector<T> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!trimmed(item).empty()) out.push_back(parse_number<T>(key, item));
  }
  return out;
}

void set(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trimmed(raw);
  auto size = [&] { return parse_number<std::size_t>(key, v); };
  auto real = [&] { return parse_number<double>(key, v); };
  auto flag = [&] { return parse_bool(key, v); };

  if (key == "data.source") {
    if (v != "synthetic" && v != "file") throw ConfigError("data.source must be synthetic or file");
    c.data.source = v;
  } else if (key == "data.classes") {
    c.data.classes = size();
  } else if (key == "data.dim") {
    c.data.dim = size();
  } else if (key == "data.train_per_class") {
    c.data.train_per_class = size();
  } else if (key == "data.test_per_class") {
    c.data.test_per_class = size();
  } else if (key == "data.spread") {
    c.data.spread = real();
  } else if (key == "data.train_path") {
    c.data.train_path = v;
  } else if (key == "data.test_path") {
    c.data.test_path = v;
  } else if (key == "data.format") {
    if (v == "csv") {
      c.data.format = DataFormat::csv;
    } else if (v == "raw-f32" || v == "raw") {
      c.data.format = DataFormat::raw_f32;
    } else {
      throw ConfigError("data.format must be csv or raw-f32");
    }
  } else if (key == "data.header") {
    c.data.header = flag();
  } else if (key == "protocol.T" || key == "T") {
    c.steps = size();
  } else if (key == "protocol.R" || key == "R") {
    c.replay_per_class = size();
  } else if (key == "protocol.split_sizes") {
    c.split_sizes = parse_list<std::size_t>(key, v);
  } else if (key == "protocol.selection") {
    if (v == "herding") {
      c.selection = SelectionStrategy::herding;
    } else if (v == "random") {
      c.selection = SelectionStrategy::random;
    } else {
      throw ConfigError("protocol.selection must be herding or random");
    }
  } else if (key == "seeds" || key == "protocol.seeds") {
    c.seeds = parse_list<std::uint64_t>(key, v);
  } else if (key == "model.hidden") {
    c.hidden = parse_list<std::size_t>(key, v);
  } else if (key == "model.scale") {
    c.scale = real();
  } else if (key == "model.learn_scale") {
    c.learn_scale = flag();
  } else if (key == "optim.lr") {
    c.learning_rate = real();
  } else if (key == "optim.momentum") {
    c.momentum = real();
  } else if (key == "optim.epochs") {
    c.epochs = size();
  } else if (key == "optim.base_epochs") {
    c.base_epochs = size();
  } else if (key == "optim.batch_size") {
    c.batch_size = size();
  } else if (key == "feat_distill") {
    c.distill.feature = flag();
  } else if (key == "label_distill") {
    c.distill.label = flag();
  } else if (key == "lambda_feat") {
    c.distill.lambda_feat = real();
  } else if (key == "lambda_label") {
    c.distill.lambda_label = real();
  } else if (key == "kd_temperature") {
    c.distill.temperature = real();
  } else if (key == "dce.enabled") {
    c.dce_enabled = flag();
  } else if (key == "dce.k") {
    if (v == "auto") {
      c.dce_k_auto = true;
    } else {
      c.scheme.k = size();
      c.dce_k_auto = false;
    }
  } else if (key == "dce.scheme") {
    c.scheme.kind = parse_weight_kind(v);
  } else if (key == "dce.neighbours") {
    if (v == "all") {
      c.dce_new_only = false;
    } else if (v == "new") {
      c.dce_new_only = true;
    } else {
      throw ConfigError("dce.neighbours must be all or new");
    }
  } else if (key == "mer.enabled") {
    c.mer_enabled = flag();
  } else if (key == "mer.alpha") {
    c.alpha = real();
  } else if (key == "mer.beta") {
    c.beta = real();
  } else if (key == "mer.finetune_epochs") {
    c.finetune.epochs = size();
  } else if (key == "mer.finetune_lr") {
    c.finetune.learning_rate = real();
  } else if (key == "output.results") {
    c.results_path = v;
  } else if (key == "output.checkpoint_dir") {
    c.checkpoint_dir = v;
  } else {
    throw ConfigError("unknown setting '" + key + "'");
  }
}

void walk(ExperimentConfig& c, const pt::ptree& tree, const std::string& prefix) {
  for (const auto& [name, child] : tree) {
    const std::string key = prefix.empty() ? name : prefix + "." + name;
    if (child.empty()) {
      set(c, key, child.data());
    } else {
      walk(c, child, key);
    }
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  // The INI reader only knows ';' comments.
  std::stringstream cleaned;
  std::stringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trimmed(line);
    if (!t.empty() && t.front() == '#') continue;
    cleaned << line << '\n';
  }
  pt::ptree tree;
  try {
    pt::read_ini(cleaned, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  walk(c, tree, "");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(config, trimmed(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void validate(const ExperimentConfig& c) {
  if (c.data.classes < 2) throw ConfigError("data.classes must be at least 2");
  if (c.data.source == "synthetic") {
    if (c.data.dim < 2) throw ConfigError("data.dim must be at least 2");
    if (c.data.train_per_class == 0 || c.data.test_per_class == 0) {
      throw ConfigError("data.train_per_class and data.test_per_class must be positive");
    }
    if (c.data.spread < 0.0) throw ConfigError("data.spread must be nonnegative");
  } else if (c.data.train_path.empty() || c.data.test_path.empty()) {
    throw ConfigError("data.source = file needs data.train_path and data.test_path");
  }
  std::vector<std::uint32_t> identity(c.data.classes);
  for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = static_cast<std::uint32_t>(i);
  const auto protocol = c.split_sizes.empty() ? make_splits(identity, c.steps) : make_splits(identity, c.split_sizes);
  if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
  if (c.hidden.empty()) throw ConfigError("model.hidden needs at least one layer");
  for (auto h : c.hidden) {
    if (h == 0) throw ConfigError("model.hidden widths must be positive");
  }
  if (!(c.scale > 0.0)) throw ConfigError("model.scale must be positive");
  if (!(c.learning_rate > 0.0)) throw ConfigError("optim.lr must be positive");
  if (c.momentum < 0.0 || c.momentum >= 1.0) throw ConfigError("optim.momentum must lie in [0, 1)");
  if (c.batch_size == 0) throw ConfigError("optim.batch_size must be positive");
  if (!(c.distill.temperature > 0.0)) throw ConfigError("kd_temperature must be positive");
  if (c.distill.lambda_feat < 0.0 || c.distill.lambda_label < 0.0) throw ConfigError("distillation weights must be >= 0");
  if (c.beta < 0.0 || c.beta > 1.0) throw ConfigError("mer.beta must lie in [0, 1]");
  if (c.alpha < 0.0) throw ConfigError("mer.alpha must be nonnegative");
  if (c.dce_enabled && c.data.source == "synthetic") {
    // Smallest incremental training set: one split's samples plus the store
    // of the initial classes.
    std::size_t smallest = 0;
    for (std::size_t g = 1; g < protocol.groups(); ++g) {
      const std::size_t n = protocol.split_sizes[g] * c.data.train_per_class;
      smallest = smallest == 0 ? n : std::min(smallest, n);
    }
    if (!c.dce_new_only) smallest += protocol.split_sizes[0] * std::min(c.replay_per_class, c.data.train_per_class);
    if (c.resolved_k() >= smallest) {
      throw ConfigError("dce.k=" + std::to_string(c.resolved_k()) + " needs more than " + std::to_string(smallest) +
                        " samples per step");
    }
  }
}

std::string to_text(const ExperimentConfig& c) {
  std::ostringstream o;
  auto list = [](const auto& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) s += (i ? "," : "") + std::to_string(values[i]);
    return s;
  };
  o.precision(17);
  o << "data.source=" << c.data.source << '\n'
    << "data.classes=" << c.data.classes << '\n'
    << "data.dim=" << c.data.dim << '\n'
    << "data.train_per_class=" << c.data.train_per_class << '\n'
    << "data.test_per_class=" << c.data.test_per_class << '\n'
    << "data.spread=" << c.data.spread << '\n'
    << "protocol.T=" << c.steps << '\n'
    << "protocol.R=" << c.replay_per_class << '\n'
    << "protocol.split_sizes=" << list(c.split_sizes) << '\n'
    << "protocol.selection=" << (c.selection == SelectionStrategy::herding ? "herding" : "random") << '\n'
    << "seeds=" << list(c.seeds) << '\n'
    << "model.hidden=" << list(c.hidden) << '\n'
    << "model.scale=" << c.scale << '\n'
    << "model.learn_scale=" << (c.learn_scale ? "true" : "false") << '\n'
    << "optim.lr=" << c.learning_rate << '\n'
    << "optim.momentum=" << c.momentum << '\n'
    << "optim.epochs=" << c.epochs << '\n'
    << "optim.base_epochs=" << c.base_epochs << '\n'
    << "optim.batch_size=" << c.batch_size << '\n'
    << "feat_distill=" << (c.distill.feature ? "true" : "false") << '\n'
    << "label_distill=" << (c.distill.label ? "true" : "false") << '\n'
    << "lambda_feat=" << c.distill.lambda_feat << '\n'
    << "lambda_label=" << c.distill.lambda_label << '\n'
    << "kd_temperature=" << c.distill.temperature << '\n'
    << "dce.enabled=" << (c.dce_enabled ? "true" : "false") << '\n'
    << "dce.k=" << c.resolved_k() << '\n'
    << "dce.scheme=" << to_string(c.scheme.kind) << '\n'
    << "dce.neighbours=" << (c.dce_new_only ? "new" : "all") << '\n'
    << "mer.enabled=" << (c.mer_enabled ? "true" : "false") << '\n'
    << "mer.alpha=" << c.alpha << '\n'
    << "mer.beta=" << c.beta << '\n'
    << "mer.finetune_epochs=" << c.finetune.epochs << '\n'
    << "mer.finetune_lr=" << c.finetune.learning_rate << '\n';
  return o.str();
}

}  // namespace cil
