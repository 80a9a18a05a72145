#include "tsr/losses.hpp"

#include <algorithm>

namespace tsr {

torch::Tensor reference_loss(const torch::Tensor& logits, const torch::Tensor& target, double n_r, double alpha,
                             double beta) {
  if (n_r <= 0.0) return logits.sum() * 0.0;
  auto p = torch::sigmoid(logits);
  auto log_p = torch::log_sigmoid(logits);
  auto log_not_p = torch::log_sigmoid(-logits);
  auto pos = torch::pow(1.0 - p, alpha) * log_p;
  auto neg = torch::pow(1.0 - target, beta) * torch::pow(p, alpha) * log_not_p;
  auto per_pixel = torch::where(target == 1.0, pos, neg);
  return -per_pixel.sum() / n_r;
}

torch::Tensor focal_loss_sum(const torch::Tensor& logits, const torch::Tensor& labels, double gamma, double alpha) {
  auto p = torch::sigmoid(logits);
  auto ce = torch::binary_cross_entropy_with_logits(logits, labels, {}, {}, at::Reduction::None);
  auto p_t = p * labels + (1.0 - p) * (1.0 - labels);
  auto a_t = alpha * labels + (1.0 - alpha) * (1.0 - labels);
  return (a_t * torch::pow(1.0 - p_t, gamma) * ce).sum();
}

LineTargets line_targets(const SeparatorSet& gt, ImageSize size, int points_per_line, torch::TensorOptions opts) {
  const auto along = fixed_positions(points_per_line, along_extent(size, gt.axis));
  const double ext = across_extent(size, gt.axis);
  const auto n = static_cast<int64_t>(gt.size());
  auto c = torch::zeros({n, points_per_line}, torch::kDouble);
  auto t = torch::zeros({n, points_per_line}, torch::kDouble);
  auto b = torch::zeros({n, points_per_line}, torch::kDouble);
  auto ca = c.accessor<double, 2>(), ta = t.accessor<double, 2>(), ba = b.accessor<double, 2>();
  for (int64_t j = 0; j < n; ++j) {
    const auto& s = gt.separators[static_cast<std::size_t>(j)];
    for (int k = 0; k < points_per_line; ++k) {
      const double x = along[static_cast<std::size_t>(k)];
      ca[j][k] = s.center.across_at(x) / ext;
      ta[j][k] = s.top.across_at(x) / ext;
      ba[j][k] = s.bottom.across_at(x) / ext;
    }
  }
  return {c.to(opts), t.to(opts), b.to(opts)};
}

LineLoss line_loss(const DecoderOutput& out, const LineTargets& gt, const std::vector<std::pair<int, int>>& pairs,
                   double gamma, double alpha) {
  const auto opts = out.layers.front().logits.options();
  LineLoss loss{torch::zeros({}, opts), torch::zeros({}, opts)};
  if (out.queries == 0) return loss;
  const double n_gt = std::max<double>(1.0, static_cast<double>(gt.count()));
  std::vector<int64_t> pred_idx, gt_idx;
  for (const auto& [p, g] : pairs) {
    pred_idx.push_back(p);
    gt_idx.push_back(g);
  }
  auto pi = torch::tensor(pred_idx, torch::kLong);
  auto gi = torch::tensor(gt_idx, torch::kLong);
  for (const auto& layer : out.layers) {
    const int np = layer.points();
    const double norm = n_gt * np;
    auto labels = torch::zeros_like(layer.logits);
    if (!pairs.empty()) labels.index_fill_(0, pi, 1.0);
    loss.cls = loss.cls + focal_loss_sum(layer.logits, labels, gamma, alpha) / norm;
    if (pairs.empty()) continue;
    auto l1 = [&](const torch::Tensor& pred, const torch::Tensor& target) {
      return (pred.index_select(0, pi) - target.index_select(0, gi).slice(1, layer.start, layer.start + np)).abs().sum();
    };
    loss.reg = loss.reg + (l1(layer.center, gt.center) + l1(layer.top, gt.top) + l1(layer.bottom, gt.bottom)) / norm;
  }
  return loss;
}

torch::Tensor merge_loss(const torch::Tensor& probs, const torch::Tensor& labels, double eps) {
  if (probs.numel() == 0) return probs.sum() * 0.0;
  auto p = probs.clamp(eps, 1.0 - eps);
  return -(labels * torch::log(p) + (1.0 - labels) * torch::log(1.0 - p)).mean();
}

torch::Tensor total_loss(const LossTerms& t, double lambda) {
  auto opts = torch::TensorOptions();
  for (const auto* x : {&t.ref_row, &t.ref_col, &t.line_row, &t.line_col, &t.merge})
    if (x->defined()) opts = x->options();
  auto z = torch::zeros({}, opts);
  auto get = [&](const torch::Tensor& x) { return x.defined() ? x : z; };
  return lambda * (get(t.ref_row) + get(t.ref_col)) + get(t.line_row) + get(t.line_col) + get(t.merge);
}

}  // namespace tsr
