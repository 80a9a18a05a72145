#include "tsr/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace tsr {

std::string to_string(MatchingMode m) { return m == MatchingMode::prior_enhanced ? "prior_enhanced" : "original_detr"; }

MatchingMode parse_matching_mode(const std::string& s) {
  if (s == "prior_enhanced") return MatchingMode::prior_enhanced;
  if (s == "original_detr") return MatchingMode::original_detr;
  throw ConfigError("unknown matching mode '" + s + "'");
}

int TrainConfig::epochs_for_stage(int stage) const {
  if (stage < 1 || stage > 3) throw ConfigError("stage must be 1, 2 or 3");
  if (!stage_epochs.empty()) return stage_epochs.at(static_cast<std::size_t>(stage - 1));
  return epochs_per_stage;
}

std::vector<int> growth_schedule(int layers) {
  std::vector<int> out;
  for (int l = 1; l <= layers; ++l) out.push_back(l == 1 ? 1 : (l == 2 ? 3 : out.back() + 4));
  return out;
}

bool growth_consistent(int points_per_line, int layers) {
  if (layers < 1) return false;
  return growth_schedule(layers).back() == points_per_line;
}

void RunConfig::validate() const {
  if (!growth_consistent(model.points_per_line, model.layers)) {
    throw ConfigError("inconsistent growth schedule: K=" + std::to_string(model.points_per_line) +
                      " cannot be reached with L=" + std::to_string(model.layers) + " layers (1, 3, then +4 per layer)");
  }
  if (model.d_model % model.heads != 0) throw ConfigError("d_model must be divisible by heads");
  if (model.d_model % 4 != 0) throw ConfigError("d_model must be divisible by 4 for the positional encoding");
  if (train.lr <= 0.0) throw ConfigError("lr must be positive");
  if (train.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (train.train_scales.empty()) throw ConfigError("train_scales must not be empty");
  if (!train.stage_epochs.empty() && train.stage_epochs.size() != 3) throw ConfigError("stage_epochs needs 3 values");
  if (loss.ref_alpha <= 0.0 || loss.ref_beta <= 0.0) throw ConfigError("ref_alpha and ref_beta must be positive");
  if (loss.ref_weight < 0.0) throw ConfigError("ref_weight must be >= 0");
}

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "paper") {
    c.model.backbone_width = 64;
    c.model.p2_channels = 64;
    c.model.highres_channels = 256;
    c.model.d_model = 256;
    c.model.heads = 16;
    c.model.ffn_dim = 1024;
    c.model.cell_dim = 512;
    c.train.epochs_per_stage = 20;
    c.train.lr = 1e-4;
    c.train.batch_size = 16;
    c.train.train_scales = {416, 512, 608, 704, 800};
    c.train.infer_long_side = 1024;
  } else if (name == "desk") {
    c.train.epochs_per_stage = 30;
    c.train.lr = 1e-3;
    c.train.batch_size = 4;
    c.train.grad_clip = 5.0;
    c.train.weight_decay = 1e-4;
    c.train.train_scales = {128};
    c.train.infer_long_side = 128;
  } else if (name == "light") {
    c = preset_config("desk");
    c.preset = "light";
    c.model.points_per_line = 11;
    c.model.layers = 4;
    c.model.d_model = 128;
    c.model.heads = 8;
    c.model.ffn_dim = 512;
  } else {
    throw ConfigError("unknown preset '" + name + "' (paper, desk, light)");
  }
  c.generator.points_per_line = c.model.points_per_line;
  return c;
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<int> parse_int_list(const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!trim(item).empty()) out.push_back(std::stoi(trim(item)));
  }
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string fmt(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field int_field(T RunConfig::*group, int T::*member) {
  return {[=](RunConfig& c, const std::string& v) { (c.*group).*member = std::stoi(v); },
          [=](const RunConfig& c) { return std::to_string((c.*group).*member); }};
}

template <typename T>
Field double_field(T RunConfig::*group, double T::*member) {
  return {[=](RunConfig& c, const std::string& v) { (c.*group).*member = std::stod(v); },
          [=](const RunConfig& c) { return fmt((c.*group).*member); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"model.backbone_width", int_field(&RunConfig::model, &ModelConfig::backbone_width)},
      {"model.p2_channels", int_field(&RunConfig::model, &ModelConfig::p2_channels)},
      {"model.highres_channels", int_field(&RunConfig::model, &ModelConfig::highres_channels)},
      {"model.d_model", int_field(&RunConfig::model, &ModelConfig::d_model)},
      {"model.heads", int_field(&RunConfig::model, &ModelConfig::heads)},
      {"model.ffn_dim", int_field(&RunConfig::model, &ModelConfig::ffn_dim)},
      {"model.points_per_line", int_field(&RunConfig::model, &ModelConfig::points_per_line)},
      {"model.layers", int_field(&RunConfig::model, &ModelConfig::layers)},
      {"model.sampling_points", int_field(&RunConfig::model, &ModelConfig::sampling_points)},
      {"model.class_threshold", double_field(&RunConfig::model, &ModelConfig::class_threshold)},
      {"model.nms_window", int_field(&RunConfig::model, &ModelConfig::nms_window)},
      {"model.top_k", int_field(&RunConfig::model, &ModelConfig::top_k)},
      {"model.ref_threshold", double_field(&RunConfig::model, &ModelConfig::ref_threshold)},
      {"model.cell_dim", int_field(&RunConfig::model, &ModelConfig::cell_dim)},
      {"model.roi_size", int_field(&RunConfig::model, &ModelConfig::roi_size)},
      {"model.enhance_blocks", int_field(&RunConfig::model, &ModelConfig::enhance_blocks)},
      {"model.merge_threshold", double_field(&RunConfig::model, &ModelConfig::merge_threshold)},
      {"loss.ref_alpha", double_field(&RunConfig::loss, &LossConfig::ref_alpha)},
      {"loss.ref_beta", double_field(&RunConfig::loss, &LossConfig::ref_beta)},
      {"loss.ref_weight", double_field(&RunConfig::loss, &LossConfig::ref_weight)},
      {"loss.focal_gamma", double_field(&RunConfig::loss, &LossConfig::focal_gamma)},
      {"loss.focal_alpha", double_field(&RunConfig::loss, &LossConfig::focal_alpha)},
      {"loss.matching", {[](RunConfig& c, const std::string& v) { c.loss.matching = parse_matching_mode(v); },
                         [](const RunConfig& c) { return to_string(c.loss.matching); }}},
      {"loss.ohem_positive", int_field(&RunConfig::loss, &LossConfig::ohem_positive)},
      {"loss.ohem_negative", int_field(&RunConfig::loss, &LossConfig::ohem_negative)},
      {"train.epochs_per_stage", int_field(&RunConfig::train, &TrainConfig::epochs_per_stage)},
      {"train.stage_epochs", {[](RunConfig& c, const std::string& v) { c.train.stage_epochs = parse_int_list(v); },
                              [](const RunConfig& c) { return join(c.train.stage_epochs); }}},
      {"train.lr", double_field(&RunConfig::train, &TrainConfig::lr)},
      {"train.beta1", double_field(&RunConfig::train, &TrainConfig::beta1)},
      {"train.beta2", double_field(&RunConfig::train, &TrainConfig::beta2)},
      {"train.eps", double_field(&RunConfig::train, &TrainConfig::eps)},
      {"train.weight_decay", double_field(&RunConfig::train, &TrainConfig::weight_decay)},
      {"train.poly_power", double_field(&RunConfig::train, &TrainConfig::poly_power)},
      {"train.batch_size", int_field(&RunConfig::train, &TrainConfig::batch_size)},
      {"train.grad_clip", double_field(&RunConfig::train, &TrainConfig::grad_clip)},
      {"train.train_scales", {[](RunConfig& c, const std::string& v) { c.train.train_scales = parse_int_list(v); },
                              [](const RunConfig& c) { return join(c.train.train_scales); }}},
      {"train.infer_long_side", int_field(&RunConfig::train, &TrainConfig::infer_long_side)},
      {"train.seed", {[](RunConfig& c, const std::string& v) { c.train.seed = std::stoull(v); },
                      [](const RunConfig& c) { return std::to_string(c.train.seed); }}},
      {"data.width", int_field(&RunConfig::generator, &GeneratorOptions::width)},
      {"data.height", int_field(&RunConfig::generator, &GeneratorOptions::height)},
      {"data.fixed_separator_width", double_field(&RunConfig::generator, &GeneratorOptions::fixed_separator_width)},
  };
  return table;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::string preset = "desk";
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "preset")
      preset = value;
    else
      entries.emplace_back(key, value);
  }
  RunConfig cfg = preset_config(preset);
  for (const auto& [key, value] : entries) {
    const auto& table = fields();
    auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->second.set(cfg, value);
    } catch (const std::logic_error&) {
      throw ConfigError("bad value for '" + key + "': " + value);
    }
  }
  cfg.generator.points_per_line = cfg.model.points_per_line;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out = "preset = " + cfg.preset + "\n";
  for (const auto& [key, f] : fields()) out += key + " = " + f.get(cfg) + "\n";
  return out;
}

void apply_environment(RunConfig& cfg) {
  if (const char* s = std::getenv("TSRLAB_SEED")) cfg.train.seed = std::stoull(s);
}

}  // namespace tsr
