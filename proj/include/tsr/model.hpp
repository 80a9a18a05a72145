#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "tsr/config.hpp"
#include "tsr/decoder.hpp"
#include "tsr/features.hpp"
#include "tsr/image.hpp"
#include "tsr/merger.hpp"

namespace tsr {

struct BranchOutput {
  torch::Tensor e;               // SCNN output [1, C, A/4, L/32]
  torch::Tensor e_prime;         // [1, C', A, L/8]
  torch::Tensor e_double_prime;  // [1, C', A, L/8]
  torch::Tensor ref_logits;      // [A]
  int ref_along = 0;             // x_tau (rows) / y_tau (columns) in pixels
  std::vector<int> ref_index;    // selected reference pixels, descending score
  std::vector<double> refs;      // normalized positions (i + 0.5) / A
  std::optional<DecoderOutput> lines;
};

/// One axis: SCNN, the two high-resolution heads, reference head and decoder.
class AxisBranchImpl : public torch::nn::Module {
 public:
  AxisBranchImpl(const ModelConfig& cfg);
  /// p2 in branch orientation (transposed for columns). Runs the decoder when `decode` is set.
  BranchOutput forward(const torch::Tensor& p2, bool decode);

  ScnnBranch scnn{nullptr};
  HighResHead ref_proj{nullptr}, attn_proj{nullptr};
  ReferenceHead ref_head{nullptr};
  LineDecoder decoder{nullptr};

 private:
  ModelConfig cfg_;
};
TORCH_MODULE(AxisBranch);

class TsrModelImpl : public torch::nn::Module {
 public:
  explicit TsrModelImpl(const ModelConfig& cfg, bool bias = true);

  torch::Tensor features(const torch::Tensor& image) { return backbone(image); }
  /// Branch for one axis from the shared P2.
  BranchOutput branch(Axis axis, const torch::Tensor& p2, bool decode);

  const ModelConfig& config() const { return cfg_; }

  Backbone backbone{nullptr};
  AxisBranch rows{nullptr}, cols{nullptr};
  CellMerger merger{nullptr};

 private:
  ModelConfig cfg_;
};
TORCH_MODULE(TsrModel);

/// Ink map 1 - pixel / 255 as [1, 1, H, W], zero-padded on the right/bottom to multiples of 32.
torch::Tensor image_tensor(const GrayImage& image, torch::TensorOptions opts = torch::kFloat);
int padded_extent(int n);

struct TablePrediction {
  SeparatorSet rows{Axis::row, {}};
  SeparatorSet cols{Axis::column, {}};
  TableGrid grid;                      // final cells after merging
  std::vector<CellPair> pairs;         // adjacency pairs of the basic grid
  std::vector<double> merge_scores;    // aligned with pairs
};

/// Full pipeline on an image already at model scale. Separators, grid and merges live in the
/// coordinates of the unpadded image.
TablePrediction predict_at_scale(TsrModel& model, const GrayImage& image);

/// Rescales the longer side to `long_side`, predicts, maps everything back to the input scale.
TablePrediction infer_table(TsrModel& model, const GrayImage& image, int long_side);

/// Separators of one axis at model scale from a decoded branch, sorted and pruned.
SeparatorSet branch_separators(const BranchOutput& out, Axis axis, ImageSize model_size, ImageSize content_size,
                               double threshold);

}  // namespace tsr
