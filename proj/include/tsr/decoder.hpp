#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "tsr/config.hpp"
#include "tsr/geometry.hpp"

namespace tsr {

/// Sine encoding of normalized (along, across) positions.
/// pos: [..., 2] -> [..., dim]; first half encodes `across`, second half `along`,
/// each with interleaved sin/cos at frequencies 2*pi / 10000^(2i/half).
torch::Tensor sine_encoding(const torch::Tensor& pos, int dim);

/// sigma(delta + logit(clamp(p, eps, 1 - eps)))
torch::Tensor refine_position(const torch::Tensor& p, const torch::Tensor& delta, double eps = 1e-4);

/// New end values for the two-sided extension after a later layer:
/// end + t * (end - previous), clamped to [0, 1].
torch::Tensor extrapolate_end(const torch::Tensor& end, const torch::Tensor& previous, const torch::Tensor& t);

/// Plain multi-head attention over [B, L, D] with a counter of pairwise scores (B * L * L per call).
class CountingAttentionImpl : public torch::nn::Module {
 public:
  CountingAttentionImpl(int dim, int heads);
  torch::Tensor forward(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v);

  std::int64_t score_count = 0;

 private:
  int heads_;
  torch::nn::Linear wq{nullptr}, wk{nullptr}, wv{nullptr}, wo{nullptr};
};
TORCH_MODULE(CountingAttention);

/// Single-level deformable attention on the high-resolution map.
class DeformableAttentionImpl : public torch::nn::Module {
 public:
  DeformableAttentionImpl(int dim, int heads, int points, int value_channels);
  /// query: [N, D]; ref: [N, 2] normalized (along, across); value_map: [1, C', A, Lw].
  torch::Tensor forward(const torch::Tensor& query, const torch::Tensor& ref, const torch::Tensor& value_map);
  /// Value projection of the map split into heads: [heads, D/heads, A, Lw].
  torch::Tensor project_value(const torch::Tensor& value_map);

  torch::nn::Linear offsets{nullptr}, weights{nullptr}, out{nullptr};
  torch::nn::Conv2d value{nullptr};

 private:
  int heads_;
  int points_;
};
TORCH_MODULE(DeformableAttention);

class DecoderLayerImpl : public torch::nn::Module {
 public:
  DecoderLayerImpl(int dim, int heads, int ffn_dim, int points, int value_channels);
  /// q, pe: [Nq, Np, D]; ref: [Nq, Np, 2].
  torch::Tensor forward(const torch::Tensor& q, const torch::Tensor& pe, const torch::Tensor& ref,
                        const torch::Tensor& value_map);

  CountingAttention intra{nullptr}, inter{nullptr};
  DeformableAttention cross{nullptr};

 private:
  torch::nn::LayerNorm n1{nullptr}, n2{nullptr}, n3{nullptr}, n4{nullptr};
  torch::nn::Linear ff1{nullptr}, ff2{nullptr};
};
TORCH_MODULE(DecoderLayer);

/// Per-layer predictions on the points present at that layer.
struct LayerPrediction {
  int start = 0;            // index of the first present point among the K fixed positions
  torch::Tensor logits;     // [Nq, Np]
  torch::Tensor center;     // [Nq, Np] normalized across coordinate
  torch::Tensor top;
  torch::Tensor bottom;

  int points() const { return static_cast<int>(logits.size(1)); }
};

struct DecoderOutput {
  std::vector<LayerPrediction> layers;
  int queries = 0;

  const LayerPrediction& final_layer() const { return layers.back(); }
  /// Sigmoid class score at the mid point of the final layer: [Nq].
  torch::Tensor scores() const;
};

class LineDecoderImpl : public torch::nn::Module {
 public:
  LineDecoderImpl(const ModelConfig& cfg, int value_channels);
  /// value_map: E'' [1, C', A, Lw]; refs: normalized across positions of the references.
  DecoderOutput forward(const torch::Tensor& value_map, const std::vector<double>& refs);

  std::int64_t score_count() const;
  void reset_score_count();

  torch::nn::ModuleList layers{nullptr};
  torch::nn::ModuleList classifiers{nullptr};
  torch::nn::ModuleList regressors{nullptr};
  torch::Tensor content;  // [D], shared by all queries
  torch::Tensor t;        // extension ratio, scalar
  // stop gradients through positions carried to the next layer; off only for gradient checks
  bool detach_positions = true;

 private:
  int dim_;
  int points_per_line_;
  int layers_;
};
TORCH_MODULE(LineDecoder);

/// Final-layer lines with score >= threshold as pixel polylines at the K fixed positions.
/// Top/bottom are ordered around the center.
std::vector<Separator> decode_separators(const DecoderOutput& out, Axis axis, ImageSize size, double threshold);

}  // namespace tsr
