#include "tsr/metrics.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

namespace tsr {

std::vector<int> assign_text_to_cells(std::span<const Quad> text_boxes, std::span<const Quad> cell_boxes,
                                      double limitation) {
  std::vector<int> out(text_boxes.size(), -1);
  for (std::size_t t = 0; t < text_boxes.size(); ++t) {
    double area = quad_area(text_boxes[t]);
    if (area <= 0.0) continue;
    double best = -1.0;
    for (std::size_t c = 0; c < cell_boxes.size(); ++c) {
      double frac = intersection_area(text_boxes[t], cell_boxes[c]) / area;
      if (frac > limitation && frac > best) {
        best = frac;
        out[t] = static_cast<int>(c);
      }
    }
  }
  return out;
}

std::vector<Point2D> convex_hull(std::vector<Point2D> pts) {
  std::sort(pts.begin(), pts.end(), [](Point2D a, Point2D b) { return std::tie(a.x, a.y) < std::tie(b.x, b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](Point2D o, Point2D a, Point2D b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); };
  std::vector<Point2D> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

namespace {

CellLayout build_layout(const std::vector<FinalCell>& cells, std::span<const Quad> text_boxes, std::span<const int> owner) {
  CellLayout layout;
  layout.cells = cells;
  layout.content.resize(cells.size());
  layout.regions.resize(cells.size());
  std::vector<std::vector<Point2D>> corners(cells.size());
  for (std::size_t t = 0; t < owner.size(); ++t) {
    int c = owner[t];
    if (c < 0) continue;
    if (static_cast<std::size_t>(c) >= cells.size()) throw std::out_of_range("text owner outside the cell list");
    layout.content[static_cast<std::size_t>(c)].push_back(static_cast<int>(t));
    for (const auto& p : text_boxes[t].corners) corners[static_cast<std::size_t>(c)].push_back(p);
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (!corners[c].empty()) layout.regions[c] = convex_hull(std::move(corners[c]));
  }
  return layout;
}

double hull_iou(const std::vector<Point2D>& a, const std::vector<Point2D>& b) {
  if (a.size() < 3 || b.size() < 3) return 0.0;
  double inter = intersection_area(a, b);
  double uni = polygon_area(a) + polygon_area(b) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace

CellLayout layout_from_assignment(const std::vector<FinalCell>& cells, std::span<const Quad> text_boxes,
                                  double limitation) {
  std::vector<Quad> boxes;
  boxes.reserve(cells.size());
  for (const auto& c : cells) boxes.push_back(c.box);
  auto owner = assign_text_to_cells(text_boxes, boxes, limitation);
  return build_layout(cells, text_boxes, owner);
}

CellLayout layout_from_ownership(const std::vector<FinalCell>& cells, std::span<const Quad> text_boxes,
                                 std::span<const int> owner) {
  if (owner.size() != text_boxes.size()) throw std::invalid_argument("layout_from_ownership: size mismatch");
  return build_layout(cells, text_boxes, owner);
}

std::vector<CellRelation> adjacency_relations(const CellLayout& layout) {
  int n_rows = 0, n_cols = 0;
  for (const auto& c : layout.cells) {
    n_rows = std::max(n_rows, c.row + c.row_span);
    n_cols = std::max(n_cols, c.col + c.col_span);
  }
  std::vector<int> occ(static_cast<std::size_t>(n_rows * n_cols), -1);
  for (std::size_t i = 0; i < layout.cells.size(); ++i) {
    const auto& c = layout.cells[i];
    for (int r = c.row; r < c.row + c.row_span; ++r)
      for (int k = c.col; k < c.col + c.col_span; ++k) occ[static_cast<std::size_t>(r * n_cols + k)] = static_cast<int>(i);
  }
  auto blank = [&](int i) { return i < 0 || layout.content[static_cast<std::size_t>(i)].empty(); };
  std::set<CellRelation> rels;
  for (std::size_t i = 0; i < layout.cells.size(); ++i) {
    if (blank(static_cast<int>(i))) continue;
    const auto& c = layout.cells[i];
    for (int r = c.row; r < c.row + c.row_span; ++r) {
      for (int k = c.col + c.col_span; k < n_cols; ++k) {
        int o = occ[static_cast<std::size_t>(r * n_cols + k)];
        if (!blank(o)) {
          rels.insert({static_cast<int>(i), o, true});
          break;
        }
      }
    }
    for (int k = c.col; k < c.col + c.col_span; ++k) {
      for (int r = c.row + c.row_span; r < n_rows; ++r) {
        int o = occ[static_cast<std::size_t>(r * n_cols + k)];
        if (!blank(o)) {
          rels.insert({static_cast<int>(i), o, false});
          break;
        }
      }
    }
  }
  return {rels.begin(), rels.end()};
}

PRF to_prf(const RelationCounts& c) {
  PRF out;
  if (c.ground_truth == 0 && c.predicted == 0) return {1.0, 1.0, 1.0};
  out.precision = c.predicted > 0 ? static_cast<double>(c.correct) / static_cast<double>(c.predicted) : 0.0;
  out.recall = c.ground_truth > 0 ? static_cast<double>(c.correct) / static_cast<double>(c.ground_truth) : 0.0;
  double s = out.precision + out.recall;
  out.f1 = s > 0.0 ? 2.0 * out.precision * out.recall / s : 0.0;
  return out;
}

RelationCounts count_relations(const CellLayout& pred, const CellLayout& gt, MatchMode mode, double iou_threshold) {
  auto gt_rel = adjacency_relations(gt);
  auto pred_rel = adjacency_relations(pred);
  RelationCounts out;
  out.ground_truth = static_cast<long>(gt_rel.size());
  out.predicted = static_cast<long>(pred_rel.size());

  if (mode == MatchMode::content) {
    using Key = std::tuple<std::vector<int>, std::vector<int>, bool>;
    std::set<Key> gt_keys;
    for (const auto& r : gt_rel)
      gt_keys.insert({gt.content[static_cast<std::size_t>(r.from)], gt.content[static_cast<std::size_t>(r.to)], r.horizontal});
    std::set<Key> seen;
    for (const auto& r : pred_rel) {
      Key k{pred.content[static_cast<std::size_t>(r.from)], pred.content[static_cast<std::size_t>(r.to)], r.horizontal};
      if (gt_keys.contains(k) && seen.insert(k).second) ++out.correct;
    }
    return out;
  }

  // one-to-one pairing by descending IoU
  std::vector<std::tuple<double, int, int>> cand;
  for (std::size_t p = 0; p < pred.cells.size(); ++p)
    for (std::size_t g = 0; g < gt.cells.size(); ++g) {
      double iou = hull_iou(pred.regions[p], gt.regions[g]);
      if (iou >= iou_threshold && iou > 0.0) cand.emplace_back(-iou, static_cast<int>(p), static_cast<int>(g));
    }
  std::sort(cand.begin(), cand.end());
  std::vector<int> match(pred.cells.size(), -1);
  std::vector<bool> gt_used(gt.cells.size(), false);
  for (auto [neg, p, g] : cand) {
    if (match[static_cast<std::size_t>(p)] >= 0 || gt_used[static_cast<std::size_t>(g)]) continue;
    match[static_cast<std::size_t>(p)] = g;
    gt_used[static_cast<std::size_t>(g)] = true;
  }
  std::set<CellRelation> gt_set(gt_rel.begin(), gt_rel.end());
  std::set<CellRelation> seen;
  for (const auto& r : pred_rel) {
    int a = match[static_cast<std::size_t>(r.from)], b = match[static_cast<std::size_t>(r.to)];
    if (a < 0 || b < 0) continue;
    CellRelation mapped{a, b, r.horizontal};
    if (gt_set.contains(mapped) && seen.insert(mapped).second) ++out.correct;
  }
  return out;
}

PRF cell_adjacency_metric(const CellLayout& pred, const CellLayout& gt, MatchMode mode, double iou_threshold) {
  return to_prf(count_relations(pred, gt, mode, iou_threshold));
}

// --- tree edit distance ----------------------------------------------------

std::size_t tree_size(const TreeNode* t) {
  if (!t) return 0;
  std::size_t n = 1;
  for (const auto& c : t->children) n += tree_size(&c);
  return n;
}

namespace {

struct Postorder {
  std::vector<const std::string*> label;  // 1-based
  std::vector<int> leftmost;              // 1-based leftmost leaf descendant
  std::vector<int> keyroots;

  explicit Postorder(const TreeNode* root) {
    label.push_back(nullptr);
    leftmost.push_back(0);
    if (root) visit(*root);
    std::map<int, int> highest;
    for (int i = 1; i < static_cast<int>(label.size()); ++i) highest[leftmost[static_cast<std::size_t>(i)]] = i;
    for (auto [l, i] : highest) keyroots.push_back(i);
    std::sort(keyroots.begin(), keyroots.end());
  }
  int size() const { return static_cast<int>(label.size()) - 1; }

 private:
  int visit(const TreeNode& n) {
    int first = -1;
    for (const auto& c : n.children) {
      int idx = visit(c);
      if (first < 0) first = leftmost[static_cast<std::size_t>(idx)];
    }
    label.push_back(&n.label);
    int idx = static_cast<int>(label.size()) - 1;
    leftmost.push_back(first < 0 ? idx : first);
    return idx;
  }
};

}  // namespace

double tree_edit_distance(const TreeNode* a, const TreeNode* b) {
  Postorder A(a), B(b);
  const int n = A.size(), m = B.size();
  if (n == 0 || m == 0) return static_cast<double>(n + m);
  std::vector<std::vector<double>> td(static_cast<std::size_t>(n + 1), std::vector<double>(static_cast<std::size_t>(m + 1), 0.0));
  auto L1 = [&](int i) { return A.leftmost[static_cast<std::size_t>(i)]; };
  auto L2 = [&](int j) { return B.leftmost[static_cast<std::size_t>(j)]; };
  for (int i : A.keyroots) {
    for (int j : B.keyroots) {
      const int li = L1(i), lj = L2(j);
      const int rows = i - li + 2, cols = j - lj + 2;
      std::vector<std::vector<double>> fd(static_cast<std::size_t>(rows), std::vector<double>(static_cast<std::size_t>(cols), 0.0));
      for (int x = 1; x < rows; ++x) fd[static_cast<std::size_t>(x)][0] = fd[static_cast<std::size_t>(x - 1)][0] + 1.0;
      for (int y = 1; y < cols; ++y) fd[0][static_cast<std::size_t>(y)] = fd[0][static_cast<std::size_t>(y - 1)] + 1.0;
      for (int di = li; di <= i; ++di) {
        const auto x = static_cast<std::size_t>(di - li + 1);
        for (int dj = lj; dj <= j; ++dj) {
          const auto y = static_cast<std::size_t>(dj - lj + 1);
          double del = fd[x - 1][y] + 1.0;
          double ins = fd[x][y - 1] + 1.0;
          if (L1(di) == li && L2(dj) == lj) {
            double sub = *A.label[static_cast<std::size_t>(di)] == *B.label[static_cast<std::size_t>(dj)] ? 0.0 : 1.0;
            fd[x][y] = std::min({del, ins, fd[x - 1][y - 1] + sub});
            td[static_cast<std::size_t>(di)][static_cast<std::size_t>(dj)] = fd[x][y];
          } else {
            const auto px = static_cast<std::size_t>(L1(di) - li);
            const auto py = static_cast<std::size_t>(L2(dj) - lj);
            fd[x][y] = std::min({del, ins, fd[px][py] + td[static_cast<std::size_t>(di)][static_cast<std::size_t>(dj)]});
          }
        }
      }
    }
  }
  return td[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)];
}

TreeNode table_tree(const std::vector<FinalCell>& cells, int n_rows) {
  TreeNode root{"table", {}};
  root.children.assign(static_cast<std::size_t>(std::max(0, n_rows)), TreeNode{"tr", {}});
  std::vector<const FinalCell*> order;
  for (const auto& c : cells) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](const FinalCell* a, const FinalCell* b) {
    return std::tie(a->row, a->col) < std::tie(b->row, b->col);
  });
  for (const auto* c : order) {
    if (c->row < 0 || c->row >= n_rows) throw std::out_of_range("table_tree: cell row outside the table");
    root.children[static_cast<std::size_t>(c->row)].children.push_back(
        {"td rs=" + std::to_string(c->row_span) + " cs=" + std::to_string(c->col_span), {}});
  }
  return root;
}

double teds_struct(const TreeNode* pred, const TreeNode* gt) {
  std::size_t n = std::max(tree_size(pred), tree_size(gt));
  if (n == 0) return 1.0;
  // unit costs can exceed the larger size for very different shapes
  return std::max(0.0, 1.0 - tree_edit_distance(pred, gt) / static_cast<double>(n));
}

// --- aggregate report ------------------------------------------------------

double weighted_average_f1(std::span<const IouLevel> levels) {
  double num = 0.0, den = 0.0;
  for (const auto& l : levels) {
    num += l.iou * l.prf.f1;
    den += l.iou;
  }
  return den > 0.0 ? num / den : 0.0;
}

Evaluator::Evaluator(double limitation, std::vector<double> ious)
    : limitation_(limitation), ious_(std::move(ious)), per_iou_(ious_.size()) {
  if (!(limitation > 0.0 && limitation < 1.0)) throw std::invalid_argument("limitation threshold must lie in (0, 1)");
}

void Evaluator::add(const EvalSample& s) {
  CellLayout pred = layout_from_assignment(s.pred_cells, s.text_boxes, limitation_);
  CellLayout gt = layout_from_ownership(s.gt_cells, s.text_boxes, s.text_owner);
  for (std::size_t i = 0; i < ious_.size(); ++i) per_iou_[i] += count_relations(pred, gt, MatchMode::iou, ious_[i]);
  content_ += count_relations(pred, gt, MatchMode::content, 0.0);
  TreeNode tp = table_tree(s.pred_cells, s.pred_rows);
  TreeNode tg = table_tree(s.gt_cells, s.gt_rows);
  teds_.push_back(teds_struct(&tp, &tg));
}

EvalReport Evaluator::report() const {
  EvalReport r;
  r.limitation = limitation_;
  for (std::size_t i = 0; i < ious_.size(); ++i) r.levels.push_back({ious_[i], per_iou_[i], to_prf(per_iou_[i])});
  r.weighted_f1 = weighted_average_f1(r.levels);
  r.content_counts = content_;
  r.content = to_prf(content_);
  r.teds_per_sample = teds_;
  r.samples = static_cast<int>(teds_.size());
  r.teds_struct_mean = teds_.empty() ? 0.0 : std::accumulate(teds_.begin(), teds_.end(), 0.0) / static_cast<double>(teds_.size());
  return r;
}

}  // namespace tsr
