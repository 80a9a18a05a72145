#include "tsr/merger.hpp"

#include <algorithm>
#include <cmath>

namespace tsr {

namespace F = torch::nn::functional;

Box bounding_box(const Quad& q) { return {q.min_x(), q.min_y(), q.max_x(), q.max_y()}; }

torch::Tensor roi_align(const torch::Tensor& features, const std::vector<Box>& boxes, double stride, int bins) {
  const auto opts = features.options();
  const auto n = static_cast<int64_t>(boxes.size());
  const int64_t h = features.size(2), w = features.size(3), c = features.size(1);
  if (n == 0) return torch::zeros({0, c, bins, bins}, opts);
  const int s = 2 * bins;  // sample points per side
  auto grid = torch::empty({1, n * s, s, 2}, torch::kDouble);
  auto g = grid.accessor<double, 4>();
  for (int64_t i = 0; i < n; ++i) {
    Box b = boxes[static_cast<std::size_t>(i)];
    double x0 = b.x0 / stride, x1 = b.x1 / stride, y0 = b.y0 / stride, y1 = b.y1 / stride;
    if (x1 - x0 < 1.0) {
      const double m = 0.5 * (x0 + x1);
      x0 = m - 0.5;
      x1 = m + 0.5;
    }
    if (y1 - y0 < 1.0) {
      const double m = 0.5 * (y0 + y1);
      y0 = m - 0.5;
      y1 = m + 0.5;
    }
    for (int yy = 0; yy < s; ++yy)
      for (int xx = 0; xx < s; ++xx) {
        const double x = x0 + (xx + 0.5) * (x1 - x0) / s;
        const double y = y0 + (yy + 0.5) * (y1 - y0) / s;
        g[0][i * s + yy][xx][0] = 2.0 * x / static_cast<double>(w) - 1.0;
        g[0][i * s + yy][xx][1] = 2.0 * y / static_cast<double>(h) - 1.0;
      }
  }
  auto sampled = F::grid_sample(features, grid.to(opts.dtype()),
                                F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kBorder).align_corners(false));
  // [1, C, n*s, s] -> [n, C, s, s] -> 2x2 average
  sampled = sampled.view({c, n, s, s}).transpose(0, 1);
  return F::avg_pool2d(sampled, F::AvgPool2dFuncOptions(2));
}

std::array<double, kSpatialFeatures> spatial_features(const Box& a, const Box& b, ImageSize size, bool horizontal) {
  const double W = size.width, H = size.height;
  auto cx = [&](const Box& r) { return 0.5 * (r.x0 + r.x1) / W; };
  auto cy = [&](const Box& r) { return 0.5 * (r.y0 + r.y1) / H; };
  auto bw = [&](const Box& r) { return std::max(r.x1 - r.x0, 0.0) / W; };
  auto bh = [&](const Box& r) { return std::max(r.y1 - r.y0, 0.0) / H; };
  constexpr double tiny = 1e-6;
  const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0)) / W;
  const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0)) / H;
  const double inter = ix * iy;
  const double area_a = bw(a) * bh(a), area_b = bw(b) * bh(b);
  const double uni = area_a + area_b - inter;
  return {cx(a),
          cy(a),
          cx(b),
          cy(b),
          bw(a),
          bh(a),
          bw(b),
          bh(b),
          cx(b) - cx(a),
          cy(b) - cy(a),
          std::log((bw(b) + tiny) / (bw(a) + tiny)),
          std::log((bh(b) + tiny) / (bh(a) + tiny)),
          uni > 0.0 ? inter / uni : 0.0,
          std::min(area_a, area_b) > 0.0 ? inter / std::min(area_a, area_b) : 0.0,
          (std::max(a.x1, b.x1) - std::min(a.x0, b.x0)) / W,
          (std::max(a.y1, b.y1) - std::min(a.y0, b.y0)) / H,
          horizontal ? 1.0 : 0.0,
          horizontal ? 0.0 : 1.0};
}

EnhanceBlockImpl::EnhanceBlockImpl(int channels) {
  conv = register_module("conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
  fuse = register_module("fuse", torch::nn::Conv2d(torch::nn::Conv2dOptions(3 * channels, channels, 1)));
}

std::array<torch::Tensor, 3> EnhanceBlockImpl::branches(const torch::Tensor& x) {
  auto row = std::get<0>(x.max(3, true)).expand_as(x);
  auto col = std::get<0>(x.max(2, true)).expand_as(x);
  return {row, col, conv(x)};
}

torch::Tensor EnhanceBlockImpl::forward(const torch::Tensor& x) {
  auto [row, col, local] = branches(x);
  return torch::relu(fuse(torch::cat({row, col, local}, 1)));
}

CellMergerImpl::CellMergerImpl(int p2_channels, int cell_dim, int roi_size, int n_blocks) : roi_size_(roi_size) {
  roi_mlp = register_module("roi_mlp",
                            torch::nn::Sequential(torch::nn::Linear(p2_channels * roi_size * roi_size, cell_dim),
                                                  torch::nn::ReLU(), torch::nn::Linear(cell_dim, cell_dim),
                                                  torch::nn::ReLU()));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < n_blocks; ++i) blocks->push_back(EnhanceBlock(cell_dim));
  pair_mlp = register_module("pair_mlp",
                             torch::nn::Sequential(torch::nn::Linear(2 * cell_dim + kSpatialFeatures, cell_dim),
                                                   torch::nn::ReLU(), torch::nn::Linear(cell_dim, cell_dim),
                                                   torch::nn::ReLU(), torch::nn::Linear(cell_dim, 1)));
}

torch::Tensor CellMergerImpl::cell_features(const torch::Tensor& p2, const TableGrid& grid) {
  std::vector<Box> boxes;
  boxes.reserve(grid.shrunk_boxes.size());
  for (const auto& q : grid.shrunk_boxes) {
    Box b = bounding_box(q);
    b.x0 = std::clamp(b.x0, 0.0, grid.image_size.width);
    b.x1 = std::clamp(b.x1, 0.0, grid.image_size.width);
    b.y0 = std::clamp(b.y0, 0.0, grid.image_size.height);
    b.y1 = std::clamp(b.y1, 0.0, grid.image_size.height);
    boxes.push_back(b);
  }
  auto roi = roi_align(p2, boxes, 4.0, roi_size_);
  auto f = roi_mlp->forward(roi.flatten(1));  // [N*M, cd]
  return f.t().reshape({1, f.size(1), grid.n_rows, grid.n_cols});
}

torch::Tensor CellMergerImpl::enhance(const torch::Tensor& f) {
  auto x = f;
  for (const auto& b : *blocks) x = b->as<EnhanceBlockImpl>()->forward(x);
  return x;
}

torch::Tensor CellMergerImpl::classify(const torch::Tensor& enhanced, const TableGrid& grid,
                                       const std::vector<CellPair>& pairs) {
  const auto opts = enhanced.options();
  if (pairs.empty()) return torch::zeros({0}, opts);
  auto flat = enhanced.squeeze(0).flatten(1).t();  // [N*M, cd]
  std::vector<int64_t> ia, ib;
  auto spatial = torch::empty({static_cast<int64_t>(pairs.size()), kSpatialFeatures}, torch::kDouble);
  auto sa = spatial.accessor<double, 2>();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    ia.push_back(grid.index(p.a));
    ib.push_back(grid.index(p.b));
    auto sf = spatial_features(bounding_box(grid.cell_box(p.a.row, p.a.col)), bounding_box(grid.cell_box(p.b.row, p.b.col)),
                               grid.image_size, p.horizontal());
    for (int k = 0; k < kSpatialFeatures; ++k) sa[static_cast<int64_t>(i)][k] = sf[static_cast<std::size_t>(k)];
  }
  auto fa = flat.index_select(0, torch::tensor(ia, torch::kLong));
  auto fb = flat.index_select(0, torch::tensor(ib, torch::kLong));
  auto x = torch::cat({fa, fb, spatial.to(opts.dtype())}, 1);
  return torch::sigmoid(pair_mlp->forward(x).squeeze(1));
}

torch::Tensor CellMergerImpl::forward(const torch::Tensor& p2, const TableGrid& grid, const std::vector<CellPair>& pairs) {
  return classify(enhance(cell_features(p2, grid)), grid, pairs);
}

}  // namespace tsr
