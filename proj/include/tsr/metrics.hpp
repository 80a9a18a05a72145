#pragma once

#include <span>
#include <string>
#include <vector>

#include "tsr/geometry.hpp"

namespace tsr {

// --- text assignment -------------------------------------------------------

/// Cell index per text box: the cell covering the largest fraction of the box, if that
/// fraction is strictly above `limitation`; -1 otherwise.
std::vector<int> assign_text_to_cells(std::span<const Quad> text_boxes, std::span<const Quad> cell_boxes,
                                      double limitation);

// --- adjacency relations ---------------------------------------------------

/// One table prepared for evaluation.
struct CellLayout {
  std::vector<FinalCell> cells;
  std::vector<std::vector<int>> content;       // sorted text ids per cell; empty = blank cell
  std::vector<std::vector<Point2D>> regions;  // convex hull of the cell's text, empty when blank
};

CellLayout layout_from_assignment(const std::vector<FinalCell>& cells, std::span<const Quad> text_boxes,
                                  double limitation);
/// `owner[t]` is the cell index owning text box t (or -1).
CellLayout layout_from_ownership(const std::vector<FinalCell>& cells, std::span<const Quad> text_boxes,
                                 std::span<const int> owner);

/// Relation between a cell and its nearest non-blank neighbour to the right or below.
struct CellRelation {
  int from = 0;
  int to = 0;
  bool horizontal = true;
  friend auto operator<=>(const CellRelation&, const CellRelation&) = default;
};

std::vector<CellRelation> adjacency_relations(const CellLayout& layout);

enum class MatchMode { content, iou };

struct RelationCounts {
  long correct = 0;
  long predicted = 0;
  long ground_truth = 0;

  RelationCounts& operator+=(const RelationCounts& o) {
    correct += o.correct;
    predicted += o.predicted;
    ground_truth += o.ground_truth;
    return *this;
  }
};

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

PRF to_prf(const RelationCounts& c);

/// Content mode keys relations by the text sets of both cells; IoU mode first pairs cells whose
/// text hulls overlap with IoU >= iou_threshold.
RelationCounts count_relations(const CellLayout& pred, const CellLayout& gt, MatchMode mode, double iou_threshold);
PRF cell_adjacency_metric(const CellLayout& pred, const CellLayout& gt, MatchMode mode, double iou_threshold = 0.6);

std::vector<Point2D> convex_hull(std::vector<Point2D> points);

// --- tree edit distance ----------------------------------------------------

struct TreeNode {
  std::string label;
  std::vector<TreeNode> children;
};

std::size_t tree_size(const TreeNode* t);
/// Ordered tree edit distance, unit insert/delete, substitution 0 for equal labels else 1.
/// Either tree may be null (empty).
double tree_edit_distance(const TreeNode* a, const TreeNode* b);

/// root -> one node per grid row -> cells whose top-left lies in that row, labelled with spans.
TreeNode table_tree(const std::vector<FinalCell>& cells, int n_rows);
double teds_struct(const TreeNode* pred, const TreeNode* gt);

// --- aggregate report ------------------------------------------------------

struct IouLevel {
  double iou = 0.0;
  RelationCounts counts;
  PRF prf;
};

struct EvalReport {
  double limitation = 0.5;
  std::vector<IouLevel> levels;
  double weighted_f1 = 0.0;  // sum(iou * F1) / sum(iou)
  RelationCounts content_counts;
  PRF content;
  double teds_struct_mean = 0.0;
  std::vector<double> teds_per_sample;
  int samples = 0;
};

/// One evaluated table: predicted grid and GT grid with text ownership.
struct EvalSample {
  std::vector<FinalCell> pred_cells;
  int pred_rows = 1;
  std::vector<FinalCell> gt_cells;
  int gt_rows = 1;
  std::vector<Quad> text_boxes;
  std::vector<int> text_owner;  // into gt_cells
};

class Evaluator {
 public:
  explicit Evaluator(double limitation = 0.5, std::vector<double> ious = {0.6, 0.7, 0.8, 0.9});
  void add(const EvalSample& sample);
  EvalReport report() const;

 private:
  double limitation_;
  std::vector<double> ious_;
  std::vector<RelationCounts> per_iou_;
  RelationCounts content_;
  std::vector<double> teds_;
};

/// Weighted F1 from per-level values; exposed for consistency checks.
double weighted_average_f1(std::span<const IouLevel> levels);

}  // namespace tsr
