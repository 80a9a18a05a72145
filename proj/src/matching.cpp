#include "tsr/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace tsr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest augmenting path Hungarian (potentials), rows <= cols.
std::vector<int> hungarian_wide(const CostMatrix& a) {
  const std::size_t n = a.rows(), m = a.cols();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      std::size_t i0 = p[j0], j1 = 0;
      double delta = kInf;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(n, -1);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) out[p[j] - 1] = static_cast<int>(j - 1);
  return out;
}

// Infinite entries become a penalty larger than any finite assignment total.
CostMatrix finite_stand_in(const CostMatrix& cost, std::vector<bool>& infinite) {
  double max_finite = 0.0;
  for (std::size_t r = 0; r < cost.rows(); ++r)
    for (std::size_t c = 0; c < cost.cols(); ++c)
      if (std::isfinite(cost(r, c))) max_finite = std::max(max_finite, std::abs(cost(r, c)));
  double big = (max_finite + 1.0) * static_cast<double>(std::max(cost.rows(), cost.cols()) + 1) * 4.0;
  CostMatrix out(cost.rows(), cost.cols());
  infinite.assign(cost.rows() * cost.cols(), false);
  for (std::size_t r = 0; r < cost.rows(); ++r)
    for (std::size_t c = 0; c < cost.cols(); ++c) {
      double x = cost(r, c);
      if (std::isnan(x)) throw std::invalid_argument("hungarian_assign: NaN cost");
      if (!std::isfinite(x)) {
        infinite[r * cost.cols() + c] = true;
        x = big;
      }
      out(r, c) = x;
    }
  return out;
}

MatchResult finish(const std::vector<int>& assign, const CostMatrix& cost) {
  MatchResult res;
  std::vector<bool> gt_used(cost.cols(), false);
  for (std::size_t r = 0; r < assign.size(); ++r) {
    int c = assign[r];
    if (c >= 0 && std::isfinite(cost(r, static_cast<std::size_t>(c)))) {
      res.pairs.emplace_back(static_cast<int>(r), c);
      gt_used[static_cast<std::size_t>(c)] = true;
    } else {
      res.unmatched_predictions.push_back(static_cast<int>(r));
    }
  }
  for (std::size_t c = 0; c < cost.cols(); ++c)
    if (!gt_used[c]) res.unmatched_gts.push_back(static_cast<int>(c));
  return res;
}

}  // namespace

std::vector<int> hungarian_assign(const CostMatrix& cost) {
  if (cost.rows() == 0 || cost.cols() == 0) return std::vector<int>(cost.rows(), -1);
  std::vector<bool> infinite;
  CostMatrix a = finite_stand_in(cost, infinite);
  std::vector<int> out;
  if (a.rows() <= a.cols()) {
    out = hungarian_wide(a);
  } else {
    CostMatrix t(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
      for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
    auto col_to_row = hungarian_wide(t);
    out.assign(a.rows(), -1);
    for (std::size_t c = 0; c < col_to_row.size(); ++c)
      if (col_to_row[c] >= 0) out[static_cast<std::size_t>(col_to_row[c])] = static_cast<int>(c);
  }
  return out;
}

double prior_cost(double ref, const GtBand& band) {
  if (ref < band.top || ref > band.bottom) return kInf;
  return std::abs(ref - band.center);
}

MatchResult prior_enhanced_match(std::span<const double> refs, std::span<const GtBand> gts) {
  // Solve on coordinate-sorted references so the result does not depend on input order.
  std::vector<int> order(refs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return refs[static_cast<std::size_t>(a)] < refs[static_cast<std::size_t>(b)]; });

  CostMatrix cost(refs.size(), gts.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    for (std::size_t j = 0; j < gts.size(); ++j) cost(i, j) = prior_cost(refs[static_cast<std::size_t>(order[i])], gts[j]);

  MatchResult sorted = finish(hungarian_assign(cost), cost);
  MatchResult res;
  res.unmatched_gts = std::move(sorted.unmatched_gts);
  for (auto [i, j] : sorted.pairs) res.pairs.emplace_back(order[static_cast<std::size_t>(i)], j);
  for (int i : sorted.unmatched_predictions) res.unmatched_predictions.push_back(order[static_cast<std::size_t>(i)]);
  std::sort(res.pairs.begin(), res.pairs.end());
  std::sort(res.unmatched_predictions.begin(), res.unmatched_predictions.end());
  return res;
}

MatchResult set_prediction_match(std::span<const double> scores, const std::vector<std::vector<double>>& pred_centers,
                                 const std::vector<std::vector<double>>& gt_centers, double l1_weight) {
  if (scores.size() != pred_centers.size()) throw std::invalid_argument("set_prediction_match: size mismatch");
  CostMatrix cost(pred_centers.size(), gt_centers.size());
  for (std::size_t i = 0; i < pred_centers.size(); ++i) {
    for (std::size_t j = 0; j < gt_centers.size(); ++j) {
      if (pred_centers[i].size() != gt_centers[j].size()) throw std::invalid_argument("set_prediction_match: K mismatch");
      double l1 = 0.0;
      for (std::size_t k = 0; k < gt_centers[j].size(); ++k) l1 += std::abs(pred_centers[i][k] - gt_centers[j][k]);
      cost(i, j) = -scores[i] + l1_weight * l1;
    }
  }
  return finish(hungarian_assign(cost), cost);
}

std::vector<int> ohem_select(std::span<const double> losses, std::span<const int> labels, int max_positive,
                             int max_negative) {
  if (losses.size() != labels.size()) throw std::invalid_argument("ohem_select: size mismatch");
  std::vector<int> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) pos.push_back(static_cast<int>(i));
    if (labels[i] == 0) neg.push_back(static_cast<int>(i));
  }
  auto harder = [&](int a, int b) { return losses[static_cast<std::size_t>(a)] > losses[static_cast<std::size_t>(b)]; };
  std::stable_sort(pos.begin(), pos.end(), harder);
  std::stable_sort(neg.begin(), neg.end(), harder);
  pos.resize(std::min<std::size_t>(pos.size(), static_cast<std::size_t>(std::max(0, max_positive))));
  neg.resize(std::min<std::size_t>(neg.size(), static_cast<std::size_t>(std::max(0, max_negative))));
  pos.insert(pos.end(), neg.begin(), neg.end());
  return pos;
}

std::vector<std::pair<int, double>> select_peaks(std::span<const double> scores, int window, int top_k,
                                                 double threshold) {
  const int n = static_cast<int>(scores.size());
  const int half = window / 2;
  std::vector<std::pair<int, double>> kept;
  for (int i = 0; i < n; ++i) {
    double m = scores[static_cast<std::size_t>(i)];
    for (int j = std::max(0, i - half); j <= std::min(n - 1, i + half); ++j) m = std::max(m, scores[static_cast<std::size_t>(j)]);
    if (scores[static_cast<std::size_t>(i)] == m) kept.emplace_back(i, m);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (static_cast<int>(kept.size()) > top_k) kept.resize(static_cast<std::size_t>(std::max(0, top_k)));
  std::erase_if(kept, [&](const auto& p) { return p.second < threshold; });
  return kept;
}

double gaussian_target_value(double distance, double thickness) {
  if (thickness <= 0.0) return distance == 0.0 ? 1.0 : 0.0;
  double var = thickness * thickness / (2.0 * std::log(10.0));
  return std::exp(-distance * distance / (2.0 * var));
}

std::vector<double> gaussian_targets(std::span<const GtBand> bands, int length) {
  std::vector<double> out(static_cast<std::size_t>(std::max(0, length)), 0.0);
  for (const auto& b : bands) {
    double w = b.bottom - b.top;
    int c = std::clamp(static_cast<int>(std::floor(b.center)), 0, length - 1);
    int reach = static_cast<int>(std::ceil(w / 2.0)) + 1;
    for (int i = std::max(0, c - reach); i <= std::min(length - 1, c + reach); ++i) {
      double d = i - c;
      if (i != c && !(std::abs(d) < w / 2.0)) continue;
      auto& o = out[static_cast<std::size_t>(i)];
      o = std::max(o, gaussian_target_value(d, w));
    }
  }
  return out;
}

std::vector<int> assign_cells_to_gt(const TableGrid& pred, const TableGrid& gt) {
  std::vector<int> out(pred.shrunk_boxes.size(), -1);
  for (std::size_t i = 0; i < pred.shrunk_boxes.size(); ++i) {
    const Quad& s = pred.shrunk_boxes[i];
    const double area = quad_area(s);
    if (area <= 0.0) continue;
    double best = 0.5;
    for (std::size_t g = 0; g < gt.final_cells.size(); ++g) {
      const double frac = intersection_area(s, gt.final_cells[g].box) / area;
      if (frac > best) {
        best = frac;
        out[i] = static_cast<int>(g);
      }
    }
  }
  return out;
}

std::vector<int> merge_labels(const TableGrid& pred, const TableGrid& gt) {
  const auto owner = assign_cells_to_gt(pred, gt);
  std::vector<int> labels;
  for (const auto& p : adjacency_pairs(pred)) {
    const int a = owner[static_cast<std::size_t>(pred.index(p.a))];
    const int b = owner[static_cast<std::size_t>(pred.index(p.b))];
    labels.push_back(a < 0 || b < 0 ? -1 : (a == b ? 1 : 0));
  }
  return labels;
}

}  // namespace tsr
