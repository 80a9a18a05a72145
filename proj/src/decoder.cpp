#include "tsr/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tsr {

namespace F = torch::nn::functional;

torch::Tensor sine_encoding(const torch::Tensor& pos, int dim) {
  const int half = dim / 2;
  auto opts = pos.options();
  auto i = torch::arange(half, opts);
  auto freq = torch::pow(10000.0, 2.0 * torch::floor(i / 2) / half);  // [half]
  auto encode = [&](const torch::Tensor& v) {
    auto a = v.unsqueeze(-1) * (2.0 * std::numbers::pi) / freq;  // [..., half]
    auto s = torch::sin(a.slice(-1, 0, half, 2));
    auto c = torch::cos(a.slice(-1, 1, half, 2));
    return torch::stack({s, c}, -1).flatten(-2);
  };
  auto along_v = pos.select(-1, 0);
  auto across_v = pos.select(-1, 1);
  return torch::cat({encode(across_v), encode(along_v)}, -1);
}

torch::Tensor refine_position(const torch::Tensor& p, const torch::Tensor& delta, double eps) {
  return torch::sigmoid(delta + torch::logit(p.clamp(eps, 1.0 - eps)));
}

torch::Tensor extrapolate_end(const torch::Tensor& end, const torch::Tensor& previous, const torch::Tensor& t) {
  return (end + t * (end - previous)).clamp(0.0, 1.0);
}

CountingAttentionImpl::CountingAttentionImpl(int dim, int heads) : heads_(heads) {
  wq = register_module("wq", torch::nn::Linear(dim, dim));
  wk = register_module("wk", torch::nn::Linear(dim, dim));
  wv = register_module("wv", torch::nn::Linear(dim, dim));
  wo = register_module("wo", torch::nn::Linear(dim, dim));
}

torch::Tensor CountingAttentionImpl::forward(const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v) {
  const auto b = q.size(0), l = q.size(1), d = q.size(2);
  const auto dh = d / heads_;
  auto split = [&](const torch::Tensor& x) { return x.view({b, l, heads_, dh}).transpose(1, 2); };
  auto qh = split(wq(q)), kh = split(wk(k)), vh = split(wv(v));
  auto scores = torch::matmul(qh, kh.transpose(-2, -1)) / std::sqrt(static_cast<double>(dh));
  score_count += b * l * l;
  auto o = torch::matmul(torch::softmax(scores, -1), vh);
  return wo(o.transpose(1, 2).reshape({b, l, d}));
}

DeformableAttentionImpl::DeformableAttentionImpl(int dim, int heads, int points, int value_channels)
    : heads_(heads), points_(points) {
  offsets = register_module("offsets", torch::nn::Linear(dim, heads * points * 2));
  weights = register_module("weights", torch::nn::Linear(dim, heads * points));
  out = register_module("out", torch::nn::Linear(dim, dim));
  value = register_module("value", torch::nn::Conv2d(torch::nn::Conv2dOptions(value_channels, dim, 1)));
  torch::NoGradGuard ng;
  offsets->weight.zero_();
  // fan the samples out in one direction per head, one pixel further per point
  auto bias = torch::empty({heads, points, 2});
  for (int h = 0; h < heads; ++h) {
    const double a = 2.0 * std::numbers::pi * h / heads;
    double cx = std::cos(a), cy = std::sin(a);
    const double m = std::max(std::abs(cx), std::abs(cy));
    cx /= m;
    cy /= m;
    for (int p = 0; p < points; ++p) {
      bias[h][p][0] = cx * (p + 1);
      bias[h][p][1] = cy * (p + 1);
    }
  }
  offsets->bias.copy_(bias.flatten());
  weights->weight.zero_();
  weights->bias.zero_();
}

torch::Tensor DeformableAttentionImpl::project_value(const torch::Tensor& value_map) {
  auto v = value(value_map);  // [1, D, A, Lw]
  return v.view({heads_, v.size(1) / heads_, v.size(2), v.size(3)});
}

torch::Tensor DeformableAttentionImpl::forward(const torch::Tensor& query, const torch::Tensor& ref,
                                               const torch::Tensor& value_map) {
  const auto n = query.size(0);
  const auto d = query.size(1);
  auto off = offsets(query).view({n, heads_, points_, 2});
  auto w = torch::softmax(weights(query).view({n, heads_, points_}), -1);
  // offsets are in feature pixels: x along the map width, y across its height
  auto scale = torch::tensor({static_cast<double>(value_map.size(3)), static_cast<double>(value_map.size(2))},
                             query.options());
  auto loc = ref.view({n, 1, 1, 2}) + off / scale;
  auto grid = (2.0 * loc - 1.0).permute({1, 0, 2, 3});  // [heads, N, P, 2]
  auto sampled = F::grid_sample(project_value(value_map), grid,
                                F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kZeros).align_corners(false));
  auto o = (sampled * w.permute({1, 0, 2}).unsqueeze(1)).sum(-1);  // [heads, dh, N]
  return out(o.permute({2, 0, 1}).reshape({n, d}));
}

DecoderLayerImpl::DecoderLayerImpl(int dim, int heads, int ffn_dim, int points, int value_channels) {
  intra = register_module("intra", CountingAttention(dim, heads));
  inter = register_module("inter", CountingAttention(dim, heads));
  cross = register_module("cross", DeformableAttention(dim, heads, points, value_channels));
  auto ln = [&] { return torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})); };
  n1 = register_module("n1", ln());
  n2 = register_module("n2", ln());
  n3 = register_module("n3", ln());
  n4 = register_module("n4", ln());
  ff1 = register_module("ff1", torch::nn::Linear(dim, ffn_dim));
  ff2 = register_module("ff2", torch::nn::Linear(ffn_dim, dim));
}

torch::Tensor DecoderLayerImpl::forward(const torch::Tensor& q, const torch::Tensor& pe, const torch::Tensor& ref,
                                        const torch::Tensor& value_map) {
  // points of one line attend to each other
  auto qk = q + pe;
  auto x = n1(q + intra(qk, qk, q));
  // same point index across lines
  auto xt = x.transpose(0, 1);
  auto qkt = xt + pe.transpose(0, 1);
  x = n2(xt + inter(qkt, qkt, xt)).transpose(0, 1);
  const auto nq = x.size(0), np = x.size(1), d = x.size(2);
  auto c = cross((x + pe).reshape({nq * np, d}), ref.reshape({nq * np, 2}), value_map).view({nq, np, d});
  x = n3(x + c);
  return n4(x + ff2(torch::relu(ff1(x))));
}

torch::Tensor DecoderOutput::scores() const {
  const auto& f = final_layer();
  return torch::sigmoid(f.logits.select(1, (f.points() - 1) / 2));
}

LineDecoderImpl::LineDecoderImpl(const ModelConfig& cfg, int value_channels)
    : dim_(cfg.d_model), points_per_line_(cfg.points_per_line), layers_(cfg.layers) {
  if (!growth_consistent(cfg.points_per_line, cfg.layers)) {
    throw ConfigError("inconsistent growth schedule: K=" + std::to_string(cfg.points_per_line) +
                      " L=" + std::to_string(cfg.layers));
  }
  layers = register_module("layers", torch::nn::ModuleList());
  classifiers = register_module("classifiers", torch::nn::ModuleList());
  regressors = register_module("regressors", torch::nn::ModuleList());
  const double prior_bias = -std::log(0.99 / 0.01);
  for (int l = 0; l < cfg.layers; ++l) {
    layers->push_back(DecoderLayer(cfg.d_model, cfg.heads, cfg.ffn_dim, cfg.sampling_points, value_channels));
    torch::nn::Linear cls(cfg.d_model, 1);
    torch::nn::Sequential reg(torch::nn::Linear(cfg.d_model, cfg.d_model), torch::nn::ReLU(),
                              torch::nn::Linear(cfg.d_model, cfg.d_model), torch::nn::ReLU(),
                              torch::nn::Linear(cfg.d_model, 3));
    {
      torch::NoGradGuard ng;
      cls->bias.fill_(prior_bias);
      auto last = reg->ptr<torch::nn::LinearImpl>(4);
      last->weight.zero_();
      last->bias.zero_();
    }
    classifiers->push_back(cls);
    regressors->push_back(reg);
  }
  content = register_parameter("content", torch::randn({cfg.d_model}) * 0.1);
  t = register_parameter("t", torch::full({1}, 0.5));
}

std::int64_t LineDecoderImpl::score_count() const {
  std::int64_t n = 0;
  for (const auto& m : *layers) {
    auto* l = m->as<DecoderLayerImpl>();
    n += l->intra->score_count + l->inter->score_count;
  }
  return n;
}

void LineDecoderImpl::reset_score_count() {
  for (const auto& m : *layers) {
    auto* l = m->as<DecoderLayerImpl>();
    l->intra->score_count = 0;
    l->inter->score_count = 0;
  }
}

DecoderOutput LineDecoderImpl::forward(const torch::Tensor& value_map, const std::vector<double>& refs) {
  DecoderOutput out;
  const auto nq = static_cast<int64_t>(refs.size());
  out.queries = static_cast<int>(nq);
  const auto opts = content.options();
  const auto schedule = growth_schedule(layers_);
  const int mid = (points_per_line_ - 1) / 2;
  if (nq == 0) {
    for (int np : schedule) {
      auto e = torch::zeros({0, np}, opts);
      out.layers.push_back({mid - (np - 1) / 2, e, e, e, e});
    }
    return out;
  }

  auto along_at = [&](int start, int64_t np) {
    auto k = torch::arange(start, start + np, opts);
    return ((k + 1.0) / (points_per_line_ + 1.0)).unsqueeze(0).expand({nq, np});
  };
  auto embed = [&](const torch::Tensor& pos) { return content + sine_encoding(pos, dim_); };

  auto across = torch::tensor(refs, torch::TensorOptions().dtype(torch::kDouble)).to(opts.dtype()).view({nq, 1});
  int start = mid;
  auto q = embed(torch::stack({along_at(start, 1), across}, -1));

  for (int l = 0; l < layers_; ++l) {
    const auto np = across.size(1);
    auto pos = torch::stack({along_at(start, np), across}, -1);
    auto pe = sine_encoding(pos, dim_);
    q = layers[l]->as<DecoderLayerImpl>()->forward(q, pe, pos, value_map);
    auto logits = classifiers[l]->as<torch::nn::LinearImpl>()->forward(q).squeeze(-1);
    auto delta = regressors[l]->as<torch::nn::SequentialImpl>()->forward(q);
    LayerPrediction pred{start, logits, refine_position(across, delta.select(-1, 0)),
                         refine_position(across, delta.select(-1, 1)), refine_position(across, delta.select(-1, 2))};
    out.layers.push_back(pred);
    if (l + 1 == layers_) break;

    auto c = detach_positions ? pred.center.detach() : pred.center;
    torch::Tensor left, right;
    int added = 1;
    if (l == 0) {
      left = c.slice(1, 0, 1);
      right = c.slice(1, np - 1, np);
    } else {
      added = 2;
      left = extrapolate_end(c.slice(1, 0, 1), c.slice(1, 1, 2), t).expand({nq, 2});
      right = extrapolate_end(c.slice(1, np - 1, np), c.slice(1, np - 2, np - 1), t).expand({nq, 2});
    }
    auto q_left = embed(torch::stack({along_at(start - added, added), left}, -1));
    auto q_right = embed(torch::stack({along_at(start + static_cast<int>(np), added), right}, -1));
    q = torch::cat({q_left, q, q_right}, 1);
    across = torch::cat({left, c, right}, 1);
    start -= added;
  }
  return out;
}

std::vector<Separator> decode_separators(const DecoderOutput& out, Axis axis, ImageSize size, double threshold) {
  std::vector<Separator> seps;
  if (out.queries == 0) return seps;
  const auto& f = out.final_layer();
  auto scores = out.scores().detach().to(torch::kDouble).contiguous();
  auto c = f.center.detach().to(torch::kDouble).contiguous();
  auto tp = f.top.detach().to(torch::kDouble).contiguous();
  auto bt = f.bottom.detach().to(torch::kDouble).contiguous();
  const int k = f.points();
  const auto along_pos = fixed_positions(k, along_extent(size, axis));
  const double ext = across_extent(size, axis);
  for (int64_t j = 0; j < c.size(0); ++j) {
    const double s = scores[j].item<double>();
    if (s < threshold) continue;
    Separator sep;
    sep.confidence = s;
    sep.top.axis = sep.center.axis = sep.bottom.axis = axis;
    for (int i = 0; i < k; ++i) {
      const double cv = c[j][i].item<double>() * ext;
      const double tv = std::min(tp[j][i].item<double>() * ext, cv);
      const double bv = std::max(bt[j][i].item<double>() * ext, cv);
      sep.center.points.push_back(make_point(along_pos[static_cast<std::size_t>(i)], cv, axis));
      sep.top.points.push_back(make_point(along_pos[static_cast<std::size_t>(i)], tv, axis));
      sep.bottom.points.push_back(make_point(along_pos[static_cast<std::size_t>(i)], bv, axis));
    }
    seps.push_back(std::move(sep));
  }
  return seps;
}

}  // namespace tsr
