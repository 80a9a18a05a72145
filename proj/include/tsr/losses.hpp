#pragma once

#include <utility>
#include <vector>

#include <torch/torch.h>

#include "tsr/config.hpp"
#include "tsr/decoder.hpp"

namespace tsr {

/// Reference focal variant over one score column, summed and divided by n_r (0 when n_r == 0).
/// Pixels whose target is exactly 1 use the positive branch.
torch::Tensor reference_loss(const torch::Tensor& logits, const torch::Tensor& target, double n_r, double alpha,
                             double beta);

/// Sigmoid focal loss summed over all elements; labels are 0/1.
torch::Tensor focal_loss_sum(const torch::Tensor& logits, const torch::Tensor& labels, double gamma, double alpha);

/// GT lines at the K fixed positions, normalized by the across extent: [N_gt, K] each.
struct LineTargets {
  torch::Tensor center;
  torch::Tensor top;
  torch::Tensor bottom;

  int64_t count() const { return center.defined() ? center.size(0) : 0; }
};

LineTargets line_targets(const SeparatorSet& gt, ImageSize size, int points_per_line,
                         torch::TensorOptions opts = torch::kFloat);

struct LineLoss {
  torch::Tensor cls;
  torch::Tensor reg;
  torch::Tensor total() const { return cls + reg; }
};

/// Summed over decoder layers. Per layer: focal loss over every query (all points of a matched
/// line positive) plus L1 on center/top/bottom of matched lines at the points present, both
/// divided by max(1, N_gt) * N_p.
LineLoss line_loss(const DecoderOutput& out, const LineTargets& gt, const std::vector<std::pair<int, int>>& pairs,
                   double gamma, double alpha);

/// Mean binary cross-entropy with probabilities clamped to [eps, 1 - eps]; 0 for an empty set.
torch::Tensor merge_loss(const torch::Tensor& probs, const torch::Tensor& labels, double eps = 1e-7);

/// Loss components of one sample; undefined tensors count as zero.
struct LossTerms {
  torch::Tensor ref_row, ref_col, line_row, line_col, merge;
};

/// lambda * (ref_row + ref_col) + line_row + line_col + merge
torch::Tensor total_loss(const LossTerms& t, double lambda);

}  // namespace tsr
