#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "tsr/matching.hpp"
#include "tsr/synthetic.hpp"
#include "brute_force.hpp"

using namespace tsr;
using tsr::oracle::Best;
using tsr::oracle::brute_force;

namespace {

}  // namespace

TEST_CASE("hungarian agrees with enumeration on dense matrices") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng() % 6, m = 1 + rng() % 6;
    CostMatrix c(n, m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) c(i, j) = u(rng);
    auto a = hungarian_assign(c);
    double total = 0.0;
    int count = 0;
    std::set<int> cols;
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] < 0) continue;
      total += c(i, static_cast<std::size_t>(a[i]));
      ++count;
      cols.insert(a[i]);
    }
    Best b = brute_force(c);
    CHECK(count == static_cast<int>(std::min(n, m)));
    CHECK(cols.size() == static_cast<std::size_t>(count));
    CHECK(total == doctest::Approx(b.cost).epsilon(1e-12));
  }
}

TEST_CASE("prior-enhanced matching examples") {
  std::vector<GtBand> gts{{10, 8, 12}, {50, 48, 52}};
  SUBCASE("three references, two bands") {
    std::vector<double> refs{10, 50, 90};
    auto r = prior_enhanced_match(refs, gts);
    CHECK(r.pairs == std::vector<std::pair<int, int>>{{0, 0}, {1, 1}});
    CHECK(r.unmatched_predictions == std::vector<int>{2});
    CHECK(r.unmatched_gts.empty());
  }
  SUBCASE("band edge is inside") {
    std::vector<double> refs{12.0, 48.0};
    auto r = prior_enhanced_match(refs, gts);
    CHECK(r.pairs.size() == 2);
    CHECK(prior_cost(12.0, gts[0]) == 2.0);
    CHECK(std::isinf(prior_cost(12.0001, gts[0])));
  }
  SUBCASE("two references in one band") {
    std::vector<double> refs{11.5, 9.5};
    auto r = prior_enhanced_match(refs, std::span(gts).first(1));
    CHECK(r.pairs == std::vector<std::pair<int, int>>{{1, 0}});
    CHECK(r.unmatched_predictions == std::vector<int>{0});
  }
  SUBCASE("nothing to match") {
    auto r = prior_enhanced_match(std::vector<double>{}, gts);
    CHECK(r.pairs.empty());
    CHECK(r.unmatched_gts == std::vector<int>{0, 1});
  }
}

TEST_CASE("prior-enhanced matching properties on random cases") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    int n_gt = static_cast<int>(rng() % 6);
    int n_ref = static_cast<int>(rng() % 7);
    std::vector<GtBand> gts;
    double y = 2.0;
    for (int j = 0; j < n_gt; ++j) {
      double w = 1.0 + (rng() % 80) / 10.0;
      double top = y + (rng() % 100) / 10.0;
      double center = top + w * ((rng() % 100) / 100.0);
      gts.push_back({center, top, top + w});
      y = top + w + 1.0;
    }
    std::vector<double> refs;
    for (int i = 0; i < n_ref; ++i) refs.push_back((rng() % (static_cast<unsigned>(y) * 10 + 10)) / 10.0);

    auto r = prior_enhanced_match(refs, gts);
    std::set<int> preds, gtset;
    for (auto [i, j] : r.pairs) {
      CHECK(refs[static_cast<std::size_t>(i)] >= gts[static_cast<std::size_t>(j)].top);
      CHECK(refs[static_cast<std::size_t>(i)] <= gts[static_cast<std::size_t>(j)].bottom);
      CHECK(std::isfinite(prior_cost(refs[static_cast<std::size_t>(i)], gts[static_cast<std::size_t>(j)])));
      preds.insert(i);
      gtset.insert(j);
    }
    CHECK(preds.size() == r.pairs.size());
    CHECK(gtset.size() == r.pairs.size());
    CHECK(r.pairs.size() + r.unmatched_predictions.size() == refs.size());
    CHECK(r.pairs.size() + r.unmatched_gts.size() == gts.size());

    // optimal against enumeration
    CostMatrix c(refs.size(), gts.size());
    double total = 0.0;
    for (std::size_t i = 0; i < refs.size(); ++i)
      for (std::size_t j = 0; j < gts.size(); ++j) c(i, j) = prior_cost(refs[i], gts[j]);
    for (auto [i, j] : r.pairs) total += c(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    Best b = brute_force(c);
    CHECK(static_cast<int>(r.pairs.size()) == b.count);
    CHECK(total == doctest::Approx(b.cost).epsilon(1e-12));

    // permutation invariance, compared on (reference value, gt)
    std::vector<int> perm(refs.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> shuffled;
    for (int p : perm) shuffled.push_back(refs[static_cast<std::size_t>(p)]);
    auto r2 = prior_enhanced_match(shuffled, gts);
    std::multiset<std::pair<double, int>> s1, s2;
    for (auto [i, j] : r.pairs) s1.insert({refs[static_cast<std::size_t>(i)], j});
    for (auto [i, j] : r2.pairs) s2.insert({shuffled[static_cast<std::size_t>(i)], j});
    CHECK(s1 == s2);
  }
}

TEST_CASE("set-prediction matching") {
  std::vector<double> scores{0.9, 0.2};
  std::vector<std::vector<double>> pred{{0.5, 0.5}, {0.1, 0.1}};
  std::vector<std::vector<double>> gt{{0.1, 0.12}};
  auto r = set_prediction_match(scores, pred, gt);
  // costs: -0.9 + 0.78 = -0.12 vs -0.2 + 0.02 = -0.18
  CHECK(r.pairs == std::vector<std::pair<int, int>>{{1, 0}});
  CHECK(r.unmatched_predictions == std::vector<int>{0});
  auto r2 = set_prediction_match(std::vector<double>{0.99, 0.0}, pred, gt);
  CHECK(r2.pairs == std::vector<std::pair<int, int>>{{0, 0}});
}

TEST_CASE("ohem selection") {
  SUBCASE("caps") {
    std::vector<double> losses(210, 1.0);
    std::vector<int> labels(210, 0);
    std::fill(labels.begin(), labels.begin() + 10, 1);
    auto s = ohem_select(losses, labels);
    CHECK(s.size() == 74);
    for (int i = 0; i < 10; ++i) CHECK(s[static_cast<std::size_t>(i)] == i);
    for (int i = 0; i < 64; ++i) CHECK(s[static_cast<std::size_t>(10 + i)] == 10 + i);  // equal losses: lowest indices
  }
  SUBCASE("ignored pairs never selected") {
    std::vector<double> losses{5, 4, 3};
    std::vector<int> labels{-1, 0, 1};
    CHECK(ohem_select(losses, labels) == std::vector<int>{2, 1});
  }
  SUBCASE("random losses against a sort oracle") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
      std::size_t n = 50 + rng() % 200;
      std::vector<double> losses(n);
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        losses[i] = std::round(u(rng) * 20) / 20;  // plenty of ties
        labels[i] = static_cast<int>(rng() % 3) - 1;
      }
      auto got = ohem_select(losses, labels);
      std::vector<std::pair<double, int>> pos, neg;
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == 1) pos.push_back({-losses[i], static_cast<int>(i)});
        if (labels[i] == 0) neg.push_back({-losses[i], static_cast<int>(i)});
      }
      std::sort(pos.begin(), pos.end());
      std::sort(neg.begin(), neg.end());
      std::vector<int> want;
      for (std::size_t i = 0; i < std::min<std::size_t>(64, pos.size()); ++i) want.push_back(pos[i].second);
      for (std::size_t i = 0; i < std::min<std::size_t>(64, neg.size()); ++i) want.push_back(neg[i].second);
      CHECK(got == want);
    }
  }
}

TEST_CASE("peak selection") {
  SUBCASE("window max") {
    std::vector<double> s{.1, .9, .8, .1, 0, 0, 0, 0, 0, 0};
    auto p = select_peaks(s);
    REQUIRE(p.size() == 1);
    CHECK(p[0].first == 1);
  }
  SUBCASE("threshold") {
    std::vector<double> s(40, 0.04);
    CHECK(select_peaks(s).empty());
  }
  SUBCASE("plateaus keep every tied position") {
    std::vector<double> s{0, 0.5, 0.5, 0};
    CHECK(select_peaks(s).size() == 2);
  }
  SUBCASE("top-100 of 150 isolated peaks") {
    std::mt19937 rng(2);
    std::vector<double> s(150 * 8, 0.0);
    std::vector<std::pair<double, int>> peaks;
    for (int k = 0; k < 150; ++k) {
      double v = 0.05 + 0.9 * (rng() % 100000) / 100000.0;
      s[static_cast<std::size_t>(k * 8 + 4)] = v;
      peaks.push_back({-v, k * 8 + 4});
    }
    std::sort(peaks.begin(), peaks.end());
    auto p = select_peaks(s);
    REQUIRE(p.size() == 100);
    for (std::size_t i = 0; i < 100; ++i) CHECK(p[i].first == peaks[i].second);
  }
  SUBCASE("no kept index is a strict non-maximum of its window") {
    std::mt19937 rng(9);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> s(64);
      for (auto& v : s) v = (rng() % 10) / 10.0;
      for (auto [i, score] : select_peaks(s)) {
        for (int j = std::max(0, i - 3); j <= std::min(63, i + 3); ++j) CHECK(s[static_cast<std::size_t>(j)] <= score);
      }
    }
  }
}

TEST_CASE("gaussian targets") {
  CHECK(gaussian_target_value(0.0, 6.0) == 1.0);
  CHECK(std::abs(gaussian_target_value(6.0, 6.0) - 0.1) < 1e-9);
  CHECK(std::abs(gaussian_target_value(3.0, 6.0) - std::pow(10.0, -0.25)) < 1e-9);

  std::vector<GtBand> bands{{20.5, 17.5, 23.5}};
  auto t = gaussian_targets(bands, 40);
  CHECK(t[20] == 1.0);
  CHECK(t[18] == doctest::Approx(gaussian_target_value(2, 6)));
  CHECK(t[22] == doctest::Approx(gaussian_target_value(2, 6)));
  CHECK(t[17] == 0.0);  // |d| = 3 is on the truncation edge
  CHECK(t[23] == 0.0);
  for (double v : t) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  std::vector<GtBand> overlap{{10.2, 6, 14}, {13.7, 11, 17}};
  auto o = gaussian_targets(overlap, 30);
  CHECK(o[12] == doctest::Approx(std::max(gaussian_target_value(2, 8), gaussian_target_value(1, 6))));
  CHECK(o[10] == 1.0);
  CHECK(o[13] == 1.0);
}

namespace {

bool inside_quad(const Quad& q, Point2D p) {
  // convex quad, either orientation
  int pos = 0, neg = 0;
  for (int i = 0; i < 4; ++i) {
    const Point2D a = q.corners[i], b = q.corners[(i + 1) % 4];
    const double c = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    pos += c > 0;
    neg += c < 0;
  }
  return pos == 0 || neg == 0;
}

// area fractions by supersampling the shrunk box on a fine lattice
std::vector<double> sampled_fractions(const Quad& shrunk, const TableGrid& gt) {
  std::vector<double> hits(gt.final_cells.size(), 0.0);
  double total = 0.0;
  const double step = 0.125;
  for (double y = shrunk.min_y() + step / 2; y < shrunk.max_y(); y += step)
    for (double x = shrunk.min_x() + step / 2; x < shrunk.max_x(); x += step) {
      if (!inside_quad(shrunk, {x, y})) continue;
      total += 1.0;
      for (std::size_t g = 0; g < gt.final_cells.size(); ++g)
        if (inside_quad(gt.final_cells[g].box, {x, y})) hits[g] += 1.0;
    }
  for (auto& h : hits) h = total > 0 ? h / total : 0.0;
  return hits;
}

SeparatorSet jitter(const SeparatorSet& set, std::mt19937& rng, double amount) {
  std::uniform_real_distribution<double> u(-amount, amount);
  SeparatorSet out = set;
  for (auto& s : out.separators) {
    const double d = u(rng);
    for (auto* line : {&s.top, &s.center, &s.bottom})
      for (auto& p : line->points) (set.axis == Axis::row ? p.y : p.x) += d;
  }
  return out;
}

}  // namespace

TEST_CASE("merge labels agree with a supersampling oracle") {
  std::mt19937 rng(8);
  int checked = 0, positives = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const AnnotatedSample s = generate_sample(seed, seed % 2 ? Difficulty::spans : Difficulty::dense, WarpLevel::mild);
    SeparatorSet rows = jitter(s.gt_row_seps, rng, 3.0), cols = jitter(s.gt_col_seps, rng, 3.0);
    if (seed % 3 == 0 && rows.size() > 1) rows.separators.erase(rows.separators.begin());
    TableGrid pred = build_grid(rows, cols, s.size());
    const auto labels = merge_labels(pred, s.gt_grid);
    const auto pairs = adjacency_pairs(pred);
    REQUIRE(labels.size() == pairs.size());
    std::vector<int> owner(pred.shrunk_boxes.size(), -1);
    std::vector<bool> ambiguous(owner.size(), false);
    for (std::size_t i = 0; i < owner.size(); ++i) {
      auto f = sampled_fractions(pred.shrunk_boxes[i], s.gt_grid);
      for (std::size_t g = 0; g < f.size(); ++g) {
        if (std::abs(f[g] - 0.5) < 0.02) ambiguous[i] = true;
        if (f[g] > 0.5) owner[i] = static_cast<int>(g);
      }
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto a = static_cast<std::size_t>(pred.index(pairs[k].a)), b = static_cast<std::size_t>(pred.index(pairs[k].b));
      if (ambiguous[a] || ambiguous[b]) continue;
      const int expect = owner[a] < 0 || owner[b] < 0 ? -1 : (owner[a] == owner[b] ? 1 : 0);
      CHECK(labels[k] == expect);
      ++checked;
      positives += expect == 1;
    }
  }
  CHECK(checked > 300);
  CHECK(positives > 10);
}
