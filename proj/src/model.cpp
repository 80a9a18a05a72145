#include "tsr/model.hpp"

#include <algorithm>
#include <cmath>

#include "tsr/matching.hpp"

namespace tsr {

AxisBranchImpl::AxisBranchImpl(const ModelConfig& cfg) : cfg_(cfg) {
  scnn = register_module("scnn", ScnnBranch(cfg.p2_channels));
  ref_proj = register_module("ref_proj", HighResHead(cfg.p2_channels, cfg.highres_channels));
  attn_proj = register_module("attn_proj", HighResHead(cfg.p2_channels, cfg.highres_channels));
  ref_head = register_module("ref_head", ReferenceHead(cfg.highres_channels));
  decoder = register_module("decoder", LineDecoder(cfg, cfg.highres_channels));
}

BranchOutput AxisBranchImpl::forward(const torch::Tensor& p2, bool decode) {
  BranchOutput out;
  out.e = scnn(p2);
  out.e_prime = ref_proj(out.e);
  const auto across_px = out.e_prime.size(2);
  const auto along_px = 4 * p2.size(3);
  out.ref_along = static_cast<int>(along_px / 2);
  out.ref_logits = ref_head(out.e_prime, out.ref_along);

  auto scores = torch::sigmoid(out.ref_logits.detach()).to(torch::kDouble).contiguous();
  std::vector<double> s(scores.data_ptr<double>(), scores.data_ptr<double>() + scores.numel());
  for (const auto& [i, v] : select_peaks(s, cfg_.nms_window, cfg_.top_k, cfg_.ref_threshold)) {
    out.ref_index.push_back(i);
    out.refs.push_back((i + 0.5) / static_cast<double>(across_px));
  }
  if (decode) {
    out.e_double_prime = attn_proj(out.e);
    out.lines = decoder(out.e_double_prime, out.refs);
  }
  return out;
}

TsrModelImpl::TsrModelImpl(const ModelConfig& cfg, bool bias) : cfg_(cfg) {
  backbone = register_module("backbone", Backbone(cfg.backbone_width, cfg.p2_channels, bias));
  rows = register_module("rows", AxisBranch(cfg));
  cols = register_module("cols", AxisBranch(cfg));
  merger = register_module("merger", CellMerger(cfg.p2_channels, cfg.cell_dim, cfg.roi_size, cfg.enhance_blocks));
}

BranchOutput TsrModelImpl::branch(Axis axis, const torch::Tensor& p2, bool decode) {
  return axis == Axis::row ? rows(p2, decode) : cols(p2.transpose(2, 3), decode);
}

int padded_extent(int n) { return (n + 31) / 32 * 32; }

torch::Tensor image_tensor(const GrayImage& image, torch::TensorOptions opts) {
  const int hp = padded_extent(image.height), wp = padded_extent(image.width);
  auto t = torch::zeros({1, 1, hp, wp}, torch::kFloat);
  auto a = t.accessor<float, 4>();
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) a[0][0][y][x] = 1.0f - static_cast<float>(image.at(x, y)) / 255.0f;
  return t.to(opts);
}

SeparatorSet branch_separators(const BranchOutput& out, Axis axis, ImageSize model_size, ImageSize content_size,
                               double threshold) {
  if (!out.lines) return {axis, {}};
  auto raw = decode_separators(*out.lines, axis, model_size, threshold);
  // lines predicted in the padding lie outside the table image
  const double limit = across_extent(content_size, axis);
  const double mid = 0.5 * along_extent(content_size, axis);
  std::erase_if(raw, [&](const Separator& s) {
    const double c = s.center.across_at(mid);
    return c <= 0.0 || c >= limit;
  });
  return sort_and_prune_separators(axis, std::move(raw), content_size);
}

TablePrediction predict_at_scale(TsrModel& model, const GrayImage& image) {
  torch::NoGradGuard ng;
  const auto opts = model->parameters().front().options();
  auto x = image_tensor(image, opts);
  const ImageSize model_size{static_cast<double>(x.size(3)), static_cast<double>(x.size(2))};
  const ImageSize content{static_cast<double>(image.width), static_cast<double>(image.height)};
  auto p2 = model->features(x);
  const auto& cfg = model->config();
  TablePrediction pred;
  pred.rows = branch_separators(model->branch(Axis::row, p2, true), Axis::row, model_size, content, cfg.class_threshold);
  pred.cols =
      branch_separators(model->branch(Axis::column, p2, true), Axis::column, model_size, content, cfg.class_threshold);
  TableGrid basic = build_grid(pred.rows, pred.cols, content);
  pred.pairs = adjacency_pairs(basic);
  auto probs = model->merger(p2, basic, pred.pairs).to(torch::kDouble).contiguous();
  std::vector<std::pair<CellPair, bool>> decisions;
  for (std::size_t i = 0; i < pred.pairs.size(); ++i) {
    const double p = probs[static_cast<int64_t>(i)].item<double>();
    pred.merge_scores.push_back(p);
    decisions.push_back({pred.pairs[i], p >= cfg.merge_threshold});
  }
  pred.grid = resolve_merges(basic, decisions);
  return pred;
}

TablePrediction infer_table(TsrModel& model, const GrayImage& image, int long_side) {
  const double s = static_cast<double>(long_side) / std::max(image.width, image.height);
  const int w = std::max(1, static_cast<int>(std::lround(image.width * s)));
  const int h = std::max(1, static_cast<int>(std::lround(image.height * s)));
  if (w == image.width && h == image.height) return predict_at_scale(model, image);
  TablePrediction pred = predict_at_scale(model, resize_image(image, w, h));
  const double fx = static_cast<double>(image.width) / w, fy = static_cast<double>(image.height) / h;
  pred.rows = scale_separators(pred.rows, fx, fy);
  pred.cols = scale_separators(pred.cols, fx, fy);
  pred.grid = scale_grid(pred.grid, fx, fy);
  return pred;
}

}  // namespace tsr
