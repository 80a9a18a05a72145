#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsr/synthetic.hpp"

namespace tsr {

enum class MatchingMode { prior_enhanced, original_detr };

std::string to_string(MatchingMode m);
MatchingMode parse_matching_mode(const std::string& s);

struct ModelConfig {
  int backbone_width = 16;        // channels of the first residual stage; doubled per stage
  int p2_channels = 32;           // C
  int highres_channels = 64;      // C'
  int d_model = 64;               // D
  int heads = 4;
  int ffn_dim = 256;
  int points_per_line = 15;       // K
  int layers = 5;                 // L
  int sampling_points = 4;        // deformable samples per head
  double class_threshold = 0.5;
  int nms_window = 7;
  int top_k = 100;
  double ref_threshold = 0.05;
  int cell_dim = 128;             // merger feature width
  int roi_size = 7;
  int enhance_blocks = 3;
  double merge_threshold = 0.5;
};

struct LossConfig {
  double ref_alpha = 2.0;
  double ref_beta = 4.0;
  double ref_weight = 0.2;        // lambda
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  MatchingMode matching = MatchingMode::prior_enhanced;
  int ohem_positive = 64;
  int ohem_negative = 64;
};

struct TrainConfig {
  int epochs_per_stage = 20;
  std::vector<int> stage_epochs;  // optional per-stage override, size 3
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
  double poly_power = 0.9;
  int batch_size = 16;
  double grad_clip = 0.0;         // 0 disables
  std::vector<int> train_scales{416, 512, 608, 704, 800};  // shorter side
  int infer_long_side = 1024;
  std::uint64_t seed = 0;

  int epochs_for_stage(int stage) const;
};

struct RunConfig {
  std::string preset = "desk";
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
  GeneratorOptions generator;

  /// Throws ConfigError naming (K, L) when the growth schedule cannot reach K.
  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig preset_config(const std::string& name);

/// Per-layer point counts 1, 3, 7, 11, ... for L layers.
std::vector<int> growth_schedule(int layers);
bool growth_consistent(int points_per_line, int layers);

/// `key = value` lines, `#` comments. A `preset` key, if present, is applied first.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& cfg);
/// Applies TSRLAB_SEED when set.
void apply_environment(RunConfig& cfg);

}  // namespace tsr
