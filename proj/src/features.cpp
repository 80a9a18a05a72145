#include "tsr/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tsr {

namespace F = torch::nn::functional;

namespace {

torch::nn::Conv2d conv(int in, int out, int k, int stride, bool bias) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, k).stride(stride).padding(k / 2).bias(bias));
}

torch::nn::GroupNorm norm(int ch, bool affine) {
  return torch::nn::GroupNorm(torch::nn::GroupNormOptions(std::min(8, ch), ch).affine(affine));
}

}  // namespace

ResBlockImpl::ResBlockImpl(int in_ch, int out_ch, int stride, bool bias) {
  conv1 = register_module("conv1", conv(in_ch, out_ch, 3, stride, bias));
  gn1 = register_module("gn1", norm(out_ch, bias));
  conv2 = register_module("conv2", conv(out_ch, out_ch, 3, 1, bias));
  gn2 = register_module("gn2", norm(out_ch, bias));
  if (stride != 1 || in_ch != out_ch) {
    proj = register_module("proj", conv(in_ch, out_ch, 1, stride, bias));
    gn_proj = register_module("gn_proj", norm(out_ch, bias));
  }
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x) {
  auto y = torch::relu(gn1(conv1(x)));
  y = gn2(conv2(y));
  auto skip = proj ? gn_proj(proj(x)) : x;
  return torch::relu(y + skip);
}

BackboneImpl::BackboneImpl(int width, int p2_channels, bool bias) {
  stem = register_module("stem", torch::nn::Sequential(conv(1, width, 3, 2, bias), norm(width, bias), torch::nn::ReLU(),
                                                       conv(width, width, 3, 2, bias), norm(width, bias),
                                                       torch::nn::ReLU()));
  c2 = register_module("c2", ResBlock(width, width, 1, bias));
  c3 = register_module("c3", ResBlock(width, 2 * width, 2, bias));
  c4 = register_module("c4", ResBlock(2 * width, 4 * width, 2, bias));
  c5 = register_module("c5", ResBlock(4 * width, 8 * width, 2, bias));
  lat2 = register_module("lat2", conv(width, p2_channels, 1, 1, bias));
  lat3 = register_module("lat3", conv(2 * width, p2_channels, 1, 1, bias));
  lat4 = register_module("lat4", conv(4 * width, p2_channels, 1, 1, bias));
  lat5 = register_module("lat5", conv(8 * width, p2_channels, 1, 1, bias));
  out = register_module("out", conv(p2_channels, p2_channels, 3, 1, bias));
}

torch::Tensor BackboneImpl::forward(const torch::Tensor& image) {
  if (image.dim() != 4 || image.size(2) % 32 != 0 || image.size(3) % 32 != 0) {
    throw std::invalid_argument("backbone input must be [1, 1, H, W] with H and W divisible by 32, got " +
                                std::to_string(image.size(2)) + "x" + std::to_string(image.size(3)));
  }
  auto x2 = c2(stem->forward(image));
  auto x3 = c3(x2);
  auto x4 = c4(x3);
  auto x5 = c5(x4);
  auto up = [](const torch::Tensor& t) {
    return F::interpolate(t, F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
  };
  auto p = lat5(x5);
  p = lat4(x4) + up(p);
  p = lat3(x3) + up(p);
  p = lat2(x2) + up(p);
  return out(p);
}

ScnnBranchImpl::ScnnBranchImpl(int channels, int kernel) {
  head = register_module("head", conv(channels, channels, 3, 1, true));
  down = register_module("down", torch::nn::ModuleList());
  for (int i = 0; i < 3; ++i) down->push_back(conv(channels, channels, 3, 1, true));
  auto c1d = [&] {
    return torch::nn::Conv1d(torch::nn::Conv1dOptions(channels, channels, kernel).padding(kernel / 2).bias(false));
  };
  forward_conv = register_module("forward_conv", c1d());
  backward_conv = register_module("backward_conv", c1d());
  // small message weights keep the unnormalized recurrence tame at init
  torch::NoGradGuard ng;
  forward_conv->weight.mul_(0.1);
  backward_conv->weight.mul_(0.1);
}

torch::Tensor ScnnBranchImpl::forward(const torch::Tensor& p2) {
  auto x = head(p2);
  for (const auto& m : *down) {
    x = F::max_pool2d(x, F::MaxPool2dFuncOptions({1, 2}).stride({1, 2}));
    x = torch::relu(m->as<torch::nn::Conv2d>()->forward(x));
  }
  return propagate(x);
}

torch::Tensor ScnnBranchImpl::propagate(const torch::Tensor& x) {
  // slices along the last dim; each slice is [1, C, h], convolved along h
  const auto n = x.size(3);
  std::vector<torch::Tensor> s;
  s.reserve(static_cast<std::size_t>(n));
  for (int64_t i = 0; i < n; ++i) s.push_back(x.select(3, i));
  for (int64_t i = 1; i < n; ++i) s[i] = s[i] + forward_conv(s[i - 1]);
  for (int64_t i = n - 2; i >= 0; --i) s[i] = s[i] + backward_conv(s[i + 1]);
  return torch::stack(s, 3);
}

HighResHeadImpl::HighResHeadImpl(int in_ch, int out_ch) { proj = register_module("proj", conv(in_ch, out_ch, 1, 1, true)); }

torch::Tensor HighResHeadImpl::forward(const torch::Tensor& e) {
  auto y = proj(e);
  return F::interpolate(y, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{4 * e.size(2), 4 * e.size(3)})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

ReferenceHeadImpl::ReferenceHeadImpl(int channels, double prior) {
  score = register_module("score", torch::nn::Linear(channels, 1));
  torch::NoGradGuard ng;
  score->bias.fill_(-std::log((1.0 - prior) / prior));
}

int reference_column(int along_index, int map_width) {
  const int col = along_index / 8;
  if (along_index < 0 || col >= map_width) {
    throw std::out_of_range("reference coordinate " + std::to_string(along_index) + " outside the feature map");
  }
  return col;
}

torch::Tensor ReferenceHeadImpl::forward(const torch::Tensor& e_prime, int along_index) {
  const int col = reference_column(along_index, static_cast<int>(e_prime.size(3)));
  auto column = e_prime.select(3, col).squeeze(0).transpose(0, 1);  // [A, C']
  return score(column).squeeze(1);
}

}  // namespace tsr
