#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace tsr {

enum class Axis { row, column };

/// Image-space point in pixels.
struct Point2D {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2D&, const Point2D&) = default;
};

struct ImageSize {
  double width = 0.0;
  double height = 0.0;
};

/// Coordinate along the separator direction (x for rows, y for columns).
inline double along(const Point2D& p, Axis axis) { return axis == Axis::row ? p.x : p.y; }
/// Coordinate across the separator direction (y for rows, x for columns).
inline double across(const Point2D& p, Axis axis) { return axis == Axis::row ? p.y : p.x; }
inline Point2D make_point(double along_value, double across_value, Axis axis) {
  return axis == Axis::row ? Point2D{along_value, across_value} : Point2D{across_value, along_value};
}
inline double along_extent(ImageSize size, Axis axis) { return axis == Axis::row ? size.width : size.height; }
inline double across_extent(ImageSize size, Axis axis) { return axis == Axis::row ? size.height : size.width; }

/// Along-axis sample positions extent * k / (K + 1), k = 1..K.
std::vector<double> fixed_positions(int num_points, double extent);

/// Ordered points of one line. For rows the x-coordinates increase, for columns the y-coordinates.
struct Polyline {
  Axis axis = Axis::row;
  std::vector<Point2D> points;

  static Polyline from_across(Axis axis, std::span<const double> across_values, double along_extent);
  static Polyline straight(Axis axis, double across_value, std::span<const double> along_positions);

  std::size_t size() const { return points.size(); }
  /// Piecewise-linear cross-axis value; linear extrapolation past the end points.
  double across_at(double along_value) const;
  std::vector<double> across_values() const;
  /// Same line re-sampled at new along positions.
  Polyline resampled(std::span<const double> along_positions) const;
  /// Point list spanning [0, along_extent]; extrapolated ends clamped to [0, across_extent].
  std::vector<Point2D> extended(double along_extent, double across_extent) const;
};

/// One row or column separator. For columns, `top` is the left boundary and `bottom` the right one.
struct Separator {
  Polyline top;
  Polyline center;
  Polyline bottom;
  double confidence = 1.0;
};

struct SeparatorSet {
  Axis axis = Axis::row;
  std::vector<Separator> separators;

  std::size_t size() const { return separators.size(); }
  bool empty() const { return separators.empty(); }
};

/// Quadrilateral with corners in order top-left, top-right, bottom-right, bottom-left.
struct Quad {
  std::array<Point2D, 4> corners{};

  static Quad from_rect(double x0, double y0, double x1, double y1);
  double min_x() const;
  double max_x() const;
  double min_y() const;
  double max_y() const;
  Point2D centroid() const;
};

struct CellIndex {
  int row = 0;
  int col = 0;

  friend bool operator==(const CellIndex&, const CellIndex&) = default;
  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

/// Adjacent basic-cell pair; `a` is the left or upper cell.
struct CellPair {
  CellIndex a;
  CellIndex b;

  bool horizontal() const { return a.row == b.row; }
  friend bool operator==(const CellPair&, const CellPair&) = default;
  friend auto operator<=>(const CellPair&, const CellPair&) = default;
};

struct FinalCell {
  int row = 0;
  int col = 0;
  int row_span = 1;
  int col_span = 1;
  Quad box;
};

struct TableGrid {
  int n_rows = 1;
  int n_cols = 1;
  ImageSize image_size;
  std::vector<Quad> cell_boxes;    // row-major, n_rows * n_cols
  std::vector<Quad> shrunk_boxes;  // row-major, n_rows * n_cols
  std::vector<int> merge_map;      // basic cell -> index into final_cells
  std::vector<FinalCell> final_cells;

  int index(int row, int col) const { return row * n_cols + col; }
  int index(CellIndex c) const { return index(c.row, c.col); }
  const Quad& cell_box(int row, int col) const { return cell_boxes[static_cast<std::size_t>(index(row, col))]; }
  const Quad& shrunk_box(int row, int col) const { return shrunk_boxes[static_cast<std::size_t>(index(row, col))]; }
  int final_cell_of(int row, int col) const { return merge_map[static_cast<std::size_t>(index(row, col))]; }
};

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- polygon helpers -------------------------------------------------------

double polygon_area(std::span<const Point2D> polygon);
/// Area of the intersection of two polygons; `clip` must be convex, `subject` arbitrary simple.
double intersection_area(std::span<const Point2D> subject, std::span<const Point2D> clip);
double intersection_area(const Quad& a, const Quad& b);
double quad_area(const Quad& q);
double quad_iou(const Quad& a, const Quad& b);

/// Intersection of a row line (across = y) with a column line (across = x), both given as
/// point lists spanning the full image. Throws GeometryError if they do not meet.
Point2D intersect_row_col(std::span<const Point2D> row_line, std::span<const Point2D> col_line);

/// True if any segment of the open polyline touches the polygon boundary or lies inside it.
bool polyline_touches_polygon(std::span<const Point2D> line, std::span<const Point2D> polygon);

/// True if the two center lines touch or cross anywhere over the full along extent.
bool separators_cross(const Polyline& a, const Polyline& b, ImageSize size);

// --- grid operations -------------------------------------------------------

/// Sorts by center position at the mid along coordinate and drops any separator crossing
/// a higher-confidence one.
SeparatorSet sort_and_prune_separators(Axis axis, std::vector<Separator> raw, ImageSize size);

TableGrid build_grid(const SeparatorSet& row_seps, const SeparatorSet& col_seps, ImageSize size);

std::vector<CellPair> adjacency_pairs(const TableGrid& grid);

/// Connected components of positive decisions become final cells, closed to their
/// index-space bounding rectangles. Existing merges in `grid` are preserved.
TableGrid resolve_merges(const TableGrid& grid, std::span<const std::pair<CellPair, bool>> decisions);

/// Per-axis scaling of every coordinate (separators, grids); used for rescaled inputs.
SeparatorSet scale_separators(const SeparatorSet& set, double fx, double fy);
TableGrid scale_grid(const TableGrid& grid, double fx, double fy);

}  // namespace tsr
