#include <doctest.h>

#include <cmath>
#include <random>

#include <torch/torch.h>

#include "tsr/losses.hpp"
#include "loss_oracles.hpp"

using namespace tsr;
using doctest::Approx;


namespace {

torch::Tensor vec(const std::vector<double>& v) { return torch::tensor(v, torch::kDouble); }

torch::Tensor mat(const std::vector<std::vector<double>>& m) {
  auto t = torch::zeros({static_cast<int64_t>(m.size()), m.empty() ? 0 : static_cast<int64_t>(m[0].size())}, torch::kDouble);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) t[static_cast<int64_t>(i)][static_cast<int64_t>(j)] = m[i][j];
  return t;
}

}  // namespace

TEST_CASE("reference loss") {
  // p* = 1, p = 0.5: -(0.25) log 0.5
  CHECK(reference_loss(vec({0.0}), vec({1.0}), 1, 2, 4).item<double>() == Approx(-0.25 * std::log(0.5)).epsilon(1e-12));
  CHECK(reference_loss(vec({0.0}), vec({1.0}), 1, 2, 4).item<double>() == Approx(0.1733).epsilon(1e-3));
  CHECK(reference_loss(vec({40.0}), vec({1.0}), 1, 2, 4).item<double>() == Approx(0.0));
  CHECK(reference_loss(vec({1.0, -2.0}), vec({1.0, 0.3}), 0, 2, 4).item<double>() == 0.0);

  std::mt19937 rng(11);
  std::uniform_real_distribution<double> logit(-6, 6), u(0, 1);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const int n = 3 + c % 20;
    std::vector<double> x(n), t(n);
    for (int i = 0; i < n; ++i) {
      x[i] = logit(rng);
      t[i] = u(rng) < 0.2 ? 1.0 : u(rng);
    }
    const double nr = 1 + c % 4;
    worst = std::max(worst, std::abs(reference_loss(vec(x), vec(t), nr, 2, 4).item<double>() -
                                     tsr::oracle::reference_loss(x, t, nr, 2, 4)));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("line loss") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> logit(-4, 4), u(0.01, 0.99);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const int k = c % 2 ? 7 : 11, layers = k == 7 ? 3 : 4;
    const int nq = c % 5, ngt = (c / 5) % 4;
    const auto schedule = growth_schedule(layers);
    DecoderOutput out;
    out.queries = nq;
    std::vector<tsr::oracle::Layer> ol;
    for (int np : schedule) {
      tsr::oracle::Layer l;
      l.start = (k - 1) / 2 - (np - 1) / 2;
      auto fill = [&](auto& m, bool is_logit) {
        m.assign(nq, std::vector<double>(np));
        for (auto& r : m)
          for (auto& v : r) v = is_logit ? logit(rng) : u(rng);
      };
      fill(l.logits, true);
      fill(l.c, false);
      fill(l.t, false);
      fill(l.b, false);
      out.layers.push_back({l.start, mat(l.logits).view({nq, np}), mat(l.c).view({nq, np}), mat(l.t).view({nq, np}),
                            mat(l.b).view({nq, np})});
      ol.push_back(l);
    }
    std::vector<std::vector<double>> gc(ngt, std::vector<double>(k)), gt = gc, gb = gc;
    for (auto* m : {&gc, &gt, &gb})
      for (auto& r : *m)
        for (auto& v : r) v = u(rng);
    std::vector<std::pair<int, int>> pairs;
    for (int j = 0; j < std::min(nq, ngt); ++j)
      if ((j + c) % 3 != 0) pairs.push_back({nq - 1 - j, j});
    LineTargets targets{mat(gc).view({ngt, k}), mat(gt).view({ngt, k}), mat(gb).view({ngt, k})};
    const double got = line_loss(out, targets, pairs, 2.0, 0.25).total().item<double>();
    worst = std::max(worst, std::abs(got - tsr::oracle::line_loss(ol, gc, gt, gb, pairs, 2.0, 0.25)));
  }
  CHECK(worst < 1e-9);

  SUBCASE("regression term covers 3 values per present point") {
    DecoderOutput out;
    out.queries = 1;
    auto z = torch::zeros({1, 3}, torch::kDouble);
    out.layers.push_back({6, torch::full({1, 3}, 30.0, torch::kDouble), z, z, z});
    LineTargets t{torch::ones({1, 15}, torch::kDouble), torch::ones({1, 15}, torch::kDouble),
                  torch::ones({1, 15}, torch::kDouble)};
    auto l = line_loss(out, t, {{0, 0}}, 2.0, 0.25);
    CHECK(l.reg.item<double>() == Approx(9.0 / 3.0));
    CHECK(l.cls.item<double>() < 1e-12);
  }
}

TEST_CASE("merge loss and total") {
  CHECK(merge_loss(vec({0.5, 0.5, 0.5}), vec({1, 0, 1})).item<double>() == Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(merge_loss(vec({1.0, 0.0}), vec({1, 0})).item<double>() < 1e-6);
  CHECK(merge_loss(torch::zeros({0}, torch::kDouble), torch::zeros({0}, torch::kDouble)).item<double>() == 0.0);
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    std::vector<double> p(1 + c % 9), y(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = u(rng);
      y[i] = u(rng) < 0.5 ? 1.0 : 0.0;
    }
    worst = std::max(worst, std::abs(merge_loss(vec(p), vec(y)).item<double>() - tsr::oracle::bce(p, y)));
  }
  CHECK(worst < 1e-9);

  auto one = torch::ones({}, torch::kDouble);
  CHECK(total_loss({one, one, one, one, one}, 0.2).item<double>() == Approx(3.4).epsilon(1e-12));
  CHECK(total_loss({one * 2, one * 3, {}, {}, {}}, 0.2).item<double>() == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("focal loss limits") {
  auto labels = vec({1, 0, 1});
  CHECK(focal_loss_sum(vec({30, -30, 30}), labels, 2, 0.25).item<double>() < 1e-12);
  CHECK(focal_loss_sum(vec({0.0}), vec({1}), 2, 0.25).item<double>() == Approx(0.25 * 0.25 * std::log(2.0)));
}
