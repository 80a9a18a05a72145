#pragma once

#include <array>
#include <vector>

#include <torch/torch.h>

#include "tsr/config.hpp"
#include "tsr/geometry.hpp"

namespace tsr {

/// Axis-aligned box in image pixels.
struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

Box bounding_box(const Quad& q);

/// RoI align on a stride-`stride` map [1, C, h, w]: `bins` x `bins` bins, 2x2 bilinear samples per
/// bin, border padding. Boxes narrower than one feature pixel are widened about their center.
/// Returns [n, C, bins, bins].
torch::Tensor roi_align(const torch::Tensor& features, const std::vector<Box>& boxes, double stride, int bins);

constexpr int kSpatialFeatures = 18;

/// Pair geometry from the two cell boxes normalized by the image size: centers (4), sizes (4),
/// center offset (2), log size ratios (2), IoU, intersection over the smaller area, union box
/// size (2), axis one-hot (2).
std::array<double, kSpatialFeatures> spatial_features(const Box& a, const Box& b, ImageSize size, bool horizontal);

/// Row max, column max and 3x3 conv branches, concatenated, 1x1 conv, ReLU.
class EnhanceBlockImpl : public torch::nn::Module {
 public:
  explicit EnhanceBlockImpl(int channels);
  /// x: [1, C, N, M]
  torch::Tensor forward(const torch::Tensor& x);
  /// The three branch outputs before fusion.
  std::array<torch::Tensor, 3> branches(const torch::Tensor& x);

  torch::nn::Conv2d conv{nullptr}, fuse{nullptr};
};
TORCH_MODULE(EnhanceBlock);

class CellMergerImpl : public torch::nn::Module {
 public:
  CellMergerImpl(int p2_channels, int cell_dim, int roi_size, int blocks);
  /// Basic-cell features from the shrunk boxes: [1, cd, N, M].
  torch::Tensor cell_features(const torch::Tensor& p2, const TableGrid& grid);
  torch::Tensor enhance(const torch::Tensor& f);
  /// Merge probabilities for `pairs` (left/top cell first): [P].
  torch::Tensor forward(const torch::Tensor& p2, const TableGrid& grid, const std::vector<CellPair>& pairs);
  /// Classifier on given enhanced features.
  torch::Tensor classify(const torch::Tensor& enhanced, const TableGrid& grid, const std::vector<CellPair>& pairs);

  torch::nn::Sequential roi_mlp{nullptr};
  torch::nn::ModuleList blocks{nullptr};
  torch::nn::Sequential pair_mlp{nullptr};

 private:
  int roi_size_;
};
TORCH_MODULE(CellMerger);

}  // namespace tsr
