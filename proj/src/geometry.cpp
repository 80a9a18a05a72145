#include "tsr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tsr {

namespace {

double interpolate(std::span<const Point2D> pts, double t, Axis axis) {
  if (pts.empty()) {
    throw GeometryError("interpolate: empty polyline");
  }
  if (pts.size() == 1) {
    return across(pts[0], axis);
  }
  std::size_t hi = 1;
  if (t > along(pts.back(), axis)) {
    hi = pts.size() - 1;
  } else if (t > along(pts[0], axis)) {
    auto it = std::lower_bound(pts.begin() + 1, pts.end(), t,
                               [axis](const Point2D& p, double v) { return along(p, axis) < v; });
    hi = static_cast<std::size_t>(it - pts.begin());
  }
  const Point2D& a = pts[hi - 1];
  const Point2D& b = pts[hi];
  double da = along(b, axis) - along(a, axis);
  if (da == 0.0) {
    return across(a, axis);
  }
  double u = (t - along(a, axis)) / da;
  return across(a, axis) + u * (across(b, axis) - across(a, axis));
}

std::pair<Point2D, Point2D> segment_at(std::span<const Point2D> pts, double t, Axis axis) {
  if (pts.size() == 1) return {pts[0], pts[0]};
  std::size_t hi = 1;
  while (hi + 1 < pts.size() && along(pts[hi], axis) < t) ++hi;
  return {pts[hi - 1], pts[hi]};
}

double cross2(Point2D o, Point2D a, Point2D b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double signed_area(std::span<const Point2D> poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2D& p = poly[i];
    const Point2D& q = poly[(i + 1) % poly.size()];
    s += p.x * q.y - q.x * p.y;
  }
  return 0.5 * s;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    return true;
  }
};

// Boundary lines of one grid line (a separator or an image border), extended over the image.
struct GridLine {
  std::vector<Point2D> top;
  std::vector<Point2D> center;
  std::vector<Point2D> bottom;
};

GridLine border_line(Axis axis, double across_value, ImageSize size) {
  double ext = along_extent(size, axis);
  std::vector<Point2D> pts{make_point(0.0, across_value, axis), make_point(ext, across_value, axis)};
  return {pts, pts, pts};
}

GridLine separator_line(const Separator& s, ImageSize size) {
  Axis axis = s.center.axis;
  double ext = along_extent(size, axis);
  double cross_ext = across_extent(size, axis);
  return {s.top.extended(ext, cross_ext), s.center.extended(ext, cross_ext), s.bottom.extended(ext, cross_ext)};
}

std::vector<GridLine> grid_lines(const SeparatorSet& seps, ImageSize size) {
  std::vector<GridLine> lines;
  lines.reserve(seps.size() + 2);
  lines.push_back(border_line(seps.axis, 0.0, size));
  for (const auto& s : seps.separators) {
    lines.push_back(separator_line(s, size));
  }
  lines.push_back(border_line(seps.axis, across_extent(size, seps.axis), size));
  return lines;
}

void check_separator_set(const SeparatorSet& seps, ImageSize size) {
  for (std::size_t i = 0; i < seps.size(); ++i) {
    for (std::size_t j = i + 1; j < seps.size(); ++j) {
      if (separators_cross(seps.separators[i].center, seps.separators[j].center, size)) {
        throw GeometryError("build_grid: crossing separators " + std::to_string(i) + " and " + std::to_string(j));
      }
    }
  }
}

SeparatorSet sorted_by_position(SeparatorSet seps, ImageSize size) {
  double mid = along_extent(size, seps.axis) / 2.0;
  std::stable_sort(seps.separators.begin(), seps.separators.end(), [mid](const Separator& a, const Separator& b) {
    return a.center.across_at(mid) < b.center.across_at(mid);
  });
  return seps;
}

}  // namespace

std::vector<double> fixed_positions(int num_points, double extent) {
  std::vector<double> out(static_cast<std::size_t>(std::max(num_points, 0)));
  for (int k = 1; k <= num_points; ++k) {
    out[static_cast<std::size_t>(k - 1)] = extent * k / (num_points + 1);
  }
  return out;
}

Polyline Polyline::from_across(Axis axis, std::span<const double> across_values, double along_extent) {
  auto positions = fixed_positions(static_cast<int>(across_values.size()), along_extent);
  Polyline line{axis, {}};
  line.points.reserve(across_values.size());
  for (std::size_t k = 0; k < across_values.size(); ++k) {
    line.points.push_back(make_point(positions[k], across_values[k], axis));
  }
  return line;
}

Polyline Polyline::straight(Axis axis, double across_value, std::span<const double> along_positions) {
  Polyline line{axis, {}};
  for (double t : along_positions) {
    line.points.push_back(make_point(t, across_value, axis));
  }
  return line;
}

double Polyline::across_at(double along_value) const { return interpolate(points, along_value, axis); }

std::vector<double> Polyline::across_values() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(across(p, axis));
  return out;
}

Polyline Polyline::resampled(std::span<const double> along_positions) const {
  Polyline line{axis, {}};
  line.points.reserve(along_positions.size());
  for (double t : along_positions) {
    line.points.push_back(make_point(t, across_at(t), axis));
  }
  return line;
}

std::vector<Point2D> Polyline::extended(double along_ext, double across_ext) const {
  auto clamp_across = [&](double v) { return std::clamp(v, 0.0, across_ext); };
  std::vector<Point2D> out;
  out.reserve(points.size() + 2);
  out.push_back(make_point(0.0, clamp_across(across_at(0.0)), axis));
  for (const auto& p : points) {
    double t = along(p, axis);
    if (t > 0.0 && t < along_ext) {
      out.push_back(make_point(t, clamp_across(across(p, axis)), axis));
    }
  }
  out.push_back(make_point(along_ext, clamp_across(across_at(along_ext)), axis));
  return out;
}

Quad Quad::from_rect(double x0, double y0, double x1, double y1) {
  return Quad{{Point2D{x0, y0}, Point2D{x1, y0}, Point2D{x1, y1}, Point2D{x0, y1}}};
}

double Quad::min_x() const {
  return std::min({corners[0].x, corners[1].x, corners[2].x, corners[3].x});
}
double Quad::max_x() const {
  return std::max({corners[0].x, corners[1].x, corners[2].x, corners[3].x});
}
double Quad::min_y() const {
  return std::min({corners[0].y, corners[1].y, corners[2].y, corners[3].y});
}
double Quad::max_y() const {
  return std::max({corners[0].y, corners[1].y, corners[2].y, corners[3].y});
}
Point2D Quad::centroid() const {
  Point2D c{};
  for (const auto& p : corners) {
    c.x += p.x / 4.0;
    c.y += p.y / 4.0;
  }
  return c;
}

double polygon_area(std::span<const Point2D> polygon) {
  if (polygon.size() < 3) return 0.0;
  return std::abs(signed_area(polygon));
}

double intersection_area(std::span<const Point2D> subject, std::span<const Point2D> clip) {
  if (subject.size() < 3 || clip.size() < 3) return 0.0;
  std::vector<Point2D> clip_ccw(clip.begin(), clip.end());
  if (signed_area(clip_ccw) < 0.0) std::reverse(clip_ccw.begin(), clip_ccw.end());
  if (std::abs(signed_area(clip_ccw)) == 0.0) return 0.0;

  std::vector<Point2D> output(subject.begin(), subject.end());
  for (std::size_t e = 0; e < clip_ccw.size() && !output.empty(); ++e) {
    Point2D a = clip_ccw[e];
    Point2D b = clip_ccw[(e + 1) % clip_ccw.size()];
    std::vector<Point2D> input = std::move(output);
    output.clear();
    for (std::size_t i = 0; i < input.size(); ++i) {
      Point2D p = input[i];
      Point2D q = input[(i + 1) % input.size()];
      double sp = cross2(a, b, p);
      double sq = cross2(a, b, q);
      if (sp >= 0.0) output.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) {
        double u = sp / (sp - sq);
        output.push_back({p.x + u * (q.x - p.x), p.y + u * (q.y - p.y)});
      }
    }
  }
  return polygon_area(output);
}

double intersection_area(const Quad& a, const Quad& b) { return intersection_area(a.corners, b.corners); }

double quad_area(const Quad& q) { return polygon_area(q.corners); }

double quad_iou(const Quad& a, const Quad& b) {
  double inter = intersection_area(a, b);
  double uni = quad_area(a) + quad_area(b) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

Point2D intersect_row_col(std::span<const Point2D> row_line, std::span<const Point2D> col_line) {
  auto f = [&](double x) { return interpolate(row_line, x, Axis::row); };
  auto g = [&](double y) { return interpolate(col_line, y, Axis::column); };
  double lo = row_line.front().x;
  double hi = row_line.back().x;
  auto h = [&](double x) { return x - g(f(x)); };
  if (h(lo) > 0.0 || h(hi) < 0.0) {
    throw GeometryError("intersect_row_col: lines do not meet inside the image");
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (h(mid) <= 0.0 ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);

  // Closed-form solve on the two bracketing segments: x = xc + (f(x) - yc) * mc, f linear.
  auto [ra, rb] = segment_at(row_line, x, Axis::row);
  auto [ca, cb] = segment_at(col_line, f(x), Axis::column);
  double mr = rb.x != ra.x ? (rb.y - ra.y) / (rb.x - ra.x) : 0.0;
  double mc = cb.y != ca.y ? (cb.x - ca.x) / (cb.y - ca.y) : 0.0;
  double denom = 1.0 - mr * mc;
  if (std::abs(denom) > 1e-12) {
    double exact = (ca.x + (ra.y - ra.x * mr - ca.y) * mc) / denom;
    if (std::abs(exact - x) <= 1e-6 * std::max(1.0, std::abs(x))) x = exact;
  }
  return {x, f(x)};
}

namespace {

double orientation(Point2D a, Point2D b, Point2D c) { return cross2(a, b, c); }

bool within_box(Point2D a, Point2D b, Point2D p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

bool segments_touch(Point2D p1, Point2D p2, Point2D q1, Point2D q2) {
  double d1 = orientation(q1, q2, p1);
  double d2 = orientation(q1, q2, p2);
  double d3 = orientation(p1, p2, q1);
  double d4 = orientation(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  return (d1 == 0 && within_box(q1, q2, p1)) || (d2 == 0 && within_box(q1, q2, p2)) ||
         (d3 == 0 && within_box(p1, p2, q1)) || (d4 == 0 && within_box(p1, p2, q2));
}

bool point_in_polygon(Point2D p, std::span<const Point2D> poly) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    if ((poly[i].y > p.y) != (poly[j].y > p.y) &&
        p.x < (poly[j].x - poly[i].x) * (p.y - poly[i].y) / (poly[j].y - poly[i].y) + poly[i].x) {
      inside = !inside;
    }
  }
  return inside;
}

}  // namespace

bool polyline_touches_polygon(std::span<const Point2D> line, std::span<const Point2D> polygon) {
  if (line.empty() || polygon.size() < 3) return false;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    for (std::size_t j = 0; j < polygon.size(); ++j) {
      if (segments_touch(line[i], line[i + 1], polygon[j], polygon[(j + 1) % polygon.size()])) return true;
    }
  }
  return point_in_polygon(line.front(), polygon);
}

bool separators_cross(const Polyline& a, const Polyline& b, ImageSize size) {
  Axis axis = a.axis;
  double ext = along_extent(size, axis);
  double cross_ext = across_extent(size, axis);
  auto ea = a.extended(ext, cross_ext);
  auto eb = b.extended(ext, cross_ext);
  std::vector<double> ts;
  for (const auto& p : ea) ts.push_back(along(p, axis));
  for (const auto& p : eb) ts.push_back(along(p, axis));
  double lo = 0.0;
  double hi = 0.0;
  bool first = true;
  for (double t : ts) {
    double d = interpolate(ea, t, axis) - interpolate(eb, t, axis);
    lo = first ? d : std::min(lo, d);
    hi = first ? d : std::max(hi, d);
    first = false;
  }
  return lo <= 0.0 && hi >= 0.0;
}

SeparatorSet sort_and_prune_separators(Axis axis, std::vector<Separator> raw, ImageSize size) {
  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return raw[i].confidence > raw[j].confidence; });
  SeparatorSet kept{axis, {}};
  for (std::size_t i : order) {
    bool crosses = std::any_of(kept.separators.begin(), kept.separators.end(), [&](const Separator& k) {
      return separators_cross(raw[i].center, k.center, size);
    });
    if (!crosses) kept.separators.push_back(std::move(raw[i]));
  }
  return sorted_by_position(std::move(kept), size);
}

TableGrid build_grid(const SeparatorSet& row_seps_in, const SeparatorSet& col_seps_in, ImageSize size) {
  if (!(size.width > 0.0) || !(size.height > 0.0)) {
    throw GeometryError("build_grid: empty image size");
  }
  if (row_seps_in.axis != Axis::row || col_seps_in.axis != Axis::column) {
    throw GeometryError("build_grid: separator sets have the wrong axis");
  }
  check_separator_set(row_seps_in, size);
  check_separator_set(col_seps_in, size);
  auto row_seps = sorted_by_position(row_seps_in, size);
  auto col_seps = sorted_by_position(col_seps_in, size);
  auto rows = grid_lines(row_seps, size);
  auto cols = grid_lines(col_seps, size);

  TableGrid grid;
  grid.n_rows = static_cast<int>(rows.size()) - 1;
  grid.n_cols = static_cast<int>(cols.size()) - 1;
  grid.image_size = size;
  auto n = static_cast<std::size_t>(grid.n_rows * grid.n_cols);
  grid.cell_boxes.resize(n);
  grid.shrunk_boxes.resize(n);
  grid.merge_map.resize(n);
  grid.final_cells.reserve(n);

  for (int i = 0; i < grid.n_rows; ++i) {
    const GridLine& upper = rows[static_cast<std::size_t>(i)];
    const GridLine& lower = rows[static_cast<std::size_t>(i + 1)];
    for (int j = 0; j < grid.n_cols; ++j) {
      const GridLine& left = cols[static_cast<std::size_t>(j)];
      const GridLine& right = cols[static_cast<std::size_t>(j + 1)];
      auto idx = static_cast<std::size_t>(grid.index(i, j));
      grid.cell_boxes[idx] = Quad{{intersect_row_col(upper.center, left.center),
                                   intersect_row_col(upper.center, right.center),
                                   intersect_row_col(lower.center, right.center),
                                   intersect_row_col(lower.center, left.center)}};
      grid.shrunk_boxes[idx] = Quad{{intersect_row_col(upper.bottom, left.bottom),
                                     intersect_row_col(upper.bottom, right.top),
                                     intersect_row_col(lower.top, right.top),
                                     intersect_row_col(lower.top, left.bottom)}};
      grid.merge_map[idx] = static_cast<int>(idx);
      grid.final_cells.push_back({i, j, 1, 1, grid.cell_boxes[idx]});
    }
  }
  return grid;
}

std::vector<CellPair> adjacency_pairs(const TableGrid& grid) {
  std::vector<CellPair> pairs;
  for (int i = 0; i < grid.n_rows; ++i) {
    for (int j = 0; j < grid.n_cols; ++j) {
      if (j + 1 < grid.n_cols) pairs.push_back({{i, j}, {i, j + 1}});
      if (i + 1 < grid.n_rows) pairs.push_back({{i, j}, {i + 1, j}});
    }
  }
  return pairs;
}

TableGrid resolve_merges(const TableGrid& grid, std::span<const std::pair<CellPair, bool>> decisions) {
  const int n = grid.n_rows * grid.n_cols;
  UnionFind uf(n);
  std::vector<int> first_of_final(grid.final_cells.size(), -1);
  for (int idx = 0; idx < n; ++idx) {
    int f = grid.merge_map[static_cast<std::size_t>(idx)];
    int& first = first_of_final[static_cast<std::size_t>(f)];
    if (first < 0) {
      first = idx;
    } else {
      uf.unite(first, idx);
    }
  }
  auto in_range = [&](CellIndex c) { return c.row >= 0 && c.row < grid.n_rows && c.col >= 0 && c.col < grid.n_cols; };
  for (const auto& [pair, merge] : decisions) {
    if (!in_range(pair.a) || !in_range(pair.b)) {
      throw std::out_of_range("resolve_merges: pair outside the grid");
    }
    if (merge) uf.unite(grid.index(pair.a), grid.index(pair.b));
  }

  // Close every component to its bounding rectangle until nothing changes.
  struct Rect {
    int r0, c0, r1, c1;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<Rect> rects(static_cast<std::size_t>(n), Rect{grid.n_rows, grid.n_cols, -1, -1});
    for (int i = 0; i < grid.n_rows; ++i) {
      for (int j = 0; j < grid.n_cols; ++j) {
        Rect& r = rects[static_cast<std::size_t>(uf.find(grid.index(i, j)))];
        r = {std::min(r.r0, i), std::min(r.c0, j), std::max(r.r1, i), std::max(r.c1, j)};
      }
    }
    for (int root = 0; root < n; ++root) {
      const Rect& r = rects[static_cast<std::size_t>(root)];
      if (r.r1 < 0) continue;
      for (int i = r.r0; i <= r.r1; ++i) {
        for (int j = r.c0; j <= r.c1; ++j) {
          changed |= uf.unite(root, grid.index(i, j));
        }
      }
    }
  }

  TableGrid out = grid;
  out.final_cells.clear();
  std::vector<int> final_of_root(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < grid.n_rows; ++i) {
    for (int j = 0; j < grid.n_cols; ++j) {
      int root = uf.find(grid.index(i, j));
      int& f = final_of_root[static_cast<std::size_t>(root)];
      if (f < 0) {
        f = static_cast<int>(out.final_cells.size());
        out.final_cells.push_back({i, j, 1, 1, {}});
      }
      FinalCell& cell = out.final_cells[static_cast<std::size_t>(f)];
      cell.row_span = std::max(cell.row_span, i - cell.row + 1);
      cell.col_span = std::max(cell.col_span, j - cell.col + 1);
      out.merge_map[static_cast<std::size_t>(grid.index(i, j))] = f;
    }
  }
  for (auto& cell : out.final_cells) {
    int r1 = cell.row + cell.row_span - 1;
    int c1 = cell.col + cell.col_span - 1;
    cell.box = Quad{{grid.cell_box(cell.row, cell.col).corners[0], grid.cell_box(cell.row, c1).corners[1],
                     grid.cell_box(r1, c1).corners[2], grid.cell_box(r1, cell.col).corners[3]}};
  }
  return out;
}

namespace {

Polyline scaled(const Polyline& p, double fx, double fy) {
  Polyline out{p.axis, p.points};
  for (auto& q : out.points) q = {q.x * fx, q.y * fy};
  return out;
}

Quad scaled(const Quad& q, double fx, double fy) {
  Quad out = q;
  for (auto& c : out.corners) c = {c.x * fx, c.y * fy};
  return out;
}

}  // namespace

SeparatorSet scale_separators(const SeparatorSet& set, double fx, double fy) {
  SeparatorSet out{set.axis, {}};
  for (const auto& s : set.separators)
    out.separators.push_back({scaled(s.top, fx, fy), scaled(s.center, fx, fy), scaled(s.bottom, fx, fy), s.confidence});
  return out;
}

TableGrid scale_grid(const TableGrid& grid, double fx, double fy) {
  TableGrid out = grid;
  out.image_size = {grid.image_size.width * fx, grid.image_size.height * fy};
  for (auto& q : out.cell_boxes) q = scaled(q, fx, fy);
  for (auto& q : out.shrunk_boxes) q = scaled(q, fx, fy);
  for (auto& c : out.final_cells) c.box = scaled(c.box, fx, fy);
  return out;
}

}  // namespace tsr
