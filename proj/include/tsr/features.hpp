#pragma once

#include <torch/torch.h>

#include "tsr/config.hpp"

namespace tsr {

/// Pre-activation-free residual block: conv-GN-ReLU-conv-GN plus shortcut, then ReLU.
class ResBlockImpl : public torch::nn::Module {
 public:
  ResBlockImpl(int in_ch, int out_ch, int stride, bool bias);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, proj{nullptr};
  torch::nn::GroupNorm gn1{nullptr}, gn2{nullptr}, gn_proj{nullptr};
};
TORCH_MODULE(ResBlock);

/// Stride-2 stem x2, four residual stages at strides 4..32, top-down FPN down to P2.
class BackboneImpl : public torch::nn::Module {
 public:
  BackboneImpl(int width, int p2_channels, bool bias = true);
  /// image: [1, 1, H, W] with H, W divisible by 32. Returns P2: [1, C, H/4, W/4].
  torch::Tensor forward(const torch::Tensor& image);

 private:
  torch::nn::Sequential stem{nullptr};
  ResBlock c2{nullptr}, c3{nullptr}, c4{nullptr}, c5{nullptr};
  torch::nn::Conv2d lat2{nullptr}, lat3{nullptr}, lat4{nullptr}, lat5{nullptr}, out{nullptr};
};
TORCH_MODULE(Backbone);

/// Spatial-CNN context branch in row orientation: [1, C, h, w] -> [1, C, h, w/8].
/// The column branch is the same module fed with a transposed P2.
class ScnnBranchImpl : public torch::nn::Module {
 public:
  explicit ScnnBranchImpl(int channels, int kernel = 9);
  torch::Tensor forward(const torch::Tensor& p2);
  /// Two cascaded passes over the last dimension: first increasing, then decreasing index.
  torch::Tensor propagate(const torch::Tensor& x);

  torch::nn::Conv1d forward_conv{nullptr}, backward_conv{nullptr};

 private:
  torch::nn::Conv2d head{nullptr};
  torch::nn::ModuleList down{nullptr};
};
TORCH_MODULE(ScnnBranch);

/// 1x1 conv then bilinear x4 upsampling: [1, C, h, w] -> [1, C', 4h, 4w].
class HighResHeadImpl : public torch::nn::Module {
 public:
  HighResHeadImpl(int in_ch, int out_ch);
  torch::Tensor forward(const torch::Tensor& e);

  torch::nn::Conv2d proj{nullptr};
};
TORCH_MODULE(HighResHead);

/// Per-pixel reference score logits from one column of E'.
class ReferenceHeadImpl : public torch::nn::Module {
 public:
  explicit ReferenceHeadImpl(int channels, double prior = 0.01);
  /// e_prime: [1, C', A, L/8]; along_index: image coordinate of the score column.
  /// Returns logits [A].
  torch::Tensor forward(const torch::Tensor& e_prime, int along_index);

  torch::nn::Linear score{nullptr};
};
TORCH_MODULE(ReferenceHead);

/// Column of E' that holds image coordinate `along_index` (stride 8). Throws std::out_of_range.
int reference_column(int along_index, int map_width);

}  // namespace tsr
