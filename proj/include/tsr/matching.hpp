#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "tsr/geometry.hpp"

namespace tsr {

struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (prediction, gt), sorted by prediction
  std::vector<int> unmatched_predictions;
  std::vector<int> unmatched_gts;
};

/// Dense row-major cost matrix.
class CostMatrix {
 public:
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

/// Minimum-cost assignment of min(rows, cols) pairs. Returns the column for each row, -1 if none.
std::vector<int> hungarian_assign(const CostMatrix& cost);

/// Cross-axis geometry of one GT separator at the reference coordinate.
struct GtBand {
  double center = 0.0;
  double top = 0.0;
  double bottom = 0.0;
};

/// Cost |ref - center| inside the closed band [top, bottom], infinite outside.
double prior_cost(double ref, const GtBand& band);

MatchResult prior_enhanced_match(std::span<const double> refs, std::span<const GtBand> gts);

/// Set-prediction matching: cost = -score + sum of |pred - gt| over the center points.
/// `pred_centers` and `gt_centers` hold K normalized values per line.
MatchResult set_prediction_match(std::span<const double> scores, const std::vector<std::vector<double>>& pred_centers,
                                 const std::vector<std::vector<double>>& gt_centers, double l1_weight = 1.0);

/// Hard-example selection: highest-loss positives and negatives; ties keep the lower index.
/// labels: 1 positive, 0 negative, anything else ignored. Returns indices, positives first.
std::vector<int> ohem_select(std::span<const double> losses, std::span<const int> labels, int max_positive = 64,
                             int max_negative = 64);

/// Non-strict window-max suppression, then top-k by score, then the score threshold.
/// Returns (index, score) in descending score order; ties keep the lower index.
std::vector<std::pair<int, double>> select_peaks(std::span<const double> scores, int window = 7, int top_k = 100,
                                                 double threshold = 0.05);

/// exp(-d^2 / (2 s^2)) with s^2 = w^2 / (2 ln 10): 0.1 at distance w.
double gaussian_target_value(double distance, double thickness);

/// Per-pixel target along the score column. Centers are rounded to the containing pixel; bands
/// are truncated to |i - c| < w/2 (the center pixel always kept) and combined by max.
std::vector<double> gaussian_targets(std::span<const GtBand> bands, int length);

/// GT final cell of each basic cell of `pred`: the one with area(shrunk ∩ gt box) / area(shrunk) > 0.5
/// (largest fraction), -1 if none.
std::vector<int> assign_cells_to_gt(const TableGrid& pred, const TableGrid& gt);

/// Merge labels for adjacency_pairs(pred): 1 if both cells map to the same GT cell, 0 if they map
/// to different ones, -1 (ignored) if either is unassigned.
std::vector<int> merge_labels(const TableGrid& pred, const TableGrid& gt);

}  // namespace tsr
