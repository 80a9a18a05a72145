#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsr/geometry.hpp"
#include "tsr/image.hpp"

namespace tsr {

enum class Difficulty { plain, spans, empties, dense };
enum class BorderStyle { full, partial, none };
enum class WarpLevel { none, mild, strong };
/// How GT separators of a warped sample are produced.
enum class GtProcedure {
  warp_axis_aligned,  // derive on the flat layout, then push through the warp
  boundary_sweep,     // sweep the warped cell borders until they touch text
};

std::string to_string(Difficulty d);
std::string to_string(WarpLevel w);
Difficulty parse_difficulty(const std::string& s);
WarpLevel parse_warp_level(const std::string& s);

struct GeneratorOptions {
  int width = 128;
  int height = 128;
  int points_per_line = 15;
  /// When > 0, separators are fixed-width bands around the cell borders (8 px in the WTW setting).
  double fixed_separator_width = 0.0;
  GtProcedure gt_procedure = GtProcedure::warp_axis_aligned;
};

/// Per-difficulty sampling parameters.
struct DifficultyProfile {
  int min_rows = 3;
  int max_rows = 5;
  int min_cols = 3;
  int max_cols = 4;
  double span_probability = 0.0;   // probability that a table contains spanning cells
  double empty_probability = 0.0;  // per single cell
  double min_row_height = 18.0;    // at 128 px; scaled with the image
};

DifficultyProfile difficulty_profile(Difficulty d);

/// One logical cell of the layout. Text lines are axis-aligned rectangles in flat coordinates.
struct LayoutCell {
  int row = 0;
  int col = 0;
  int row_span = 1;
  int col_span = 1;
  bool empty = false;
  std::vector<Quad> text_lines;

  bool spanning() const { return row_span > 1 || col_span > 1; }
};

struct TableSpec {
  int n_rows = 0;
  int n_cols = 0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  std::vector<double> row_heights;
  std::vector<double> col_widths;
  BorderStyle border_style = BorderStyle::none;
  std::vector<LayoutCell> cells;  // row-major by top-left index
  int image_width = 0;
  int image_height = 0;

  std::vector<double> row_boundaries() const;
  std::vector<double> col_boundaries() const;
  std::vector<const LayoutCell*> spans() const;
  std::vector<CellIndex> empty_cells() const;
  /// Validates the layout invariants; throws std::invalid_argument.
  void validate() const;
};

TableSpec sample_table_spec(std::uint64_t seed, Difficulty difficulty, const GeneratorOptions& options = {});

/// Smooth displacement field u -> u + d(u).
class Warp {
 public:
  static Warp identity();
  /// Displacements at a regular control grid covering the image, bicubic in between.
  static Warp control_grid(int grid_x, int grid_y, std::vector<Point2D> displacements, ImageSize size);
  /// dy = amp_y sin(2 pi x / wavelength + phase), dx = amp_x sin(2 pi y / wavelength + phase).
  static Warp sinusoidal(double amp_x, double amp_y, double wavelength, double phase = 0.0);
  static Warp random(WarpLevel level, std::uint64_t seed, ImageSize size);

  Point2D displacement(Point2D u) const;
  Point2D forward(Point2D u) const;
  Point2D inverse(Point2D v) const;
  /// Sampled Jacobian determinant of the forward map is positive everywhere.
  bool is_bijective(ImageSize size, double step = 2.0) const;

 private:
  enum class Kind { identity, grid, sinusoid };
  Kind kind_ = Kind::identity;
  int grid_x_ = 0;
  int grid_y_ = 0;
  ImageSize size_{};
  std::vector<Point2D> grid_;
  double amp_x_ = 0.0;
  double amp_y_ = 0.0;
  double wavelength_ = 1.0;
  double phase_ = 0.0;
};

struct TextBox {
  Quad box;
  int cell = -1;  // index into gt_grid.final_cells
};

struct AnnotatedSample {
  GrayImage image;
  SeparatorSet gt_row_seps{Axis::row, {}};
  SeparatorSet gt_col_seps{Axis::column, {}};
  TableGrid gt_grid;
  std::vector<bool> cell_empty;  // aligned with gt_grid.final_cells
  std::vector<TextBox> text_boxes;

  ImageSize size() const { return {static_cast<double>(image.width), static_cast<double>(image.height)}; }
};

/// Draws the table (glyph-like ink blobs for text), applies the optional warp to raster and
/// geometry, and builds the GT grid with spans. Throws std::invalid_argument for a non-bijective warp.
AnnotatedSample render_and_warp(const TableSpec& spec, const std::optional<Warp>& warp,
                                const GeneratorOptions& options = {}, std::uint64_t render_seed = 0);

/// Convenience: spec + warp from one seed.
AnnotatedSample generate_sample(std::uint64_t seed, Difficulty difficulty, WarpLevel warp,
                                const GeneratorOptions& options = {});

/// Row/column separators of an axis-aligned table from the minimum boxes enclosing the text
/// of non-spanning cells in each row/column.
std::pair<SeparatorSet, SeparatorSet> derive_gt_separators_axis_aligned(const TableSpec& spec, ImageSize size,
                                                                        int points_per_line,
                                                                        double fixed_width = 0.0);

/// Boundaries found by translating each labeled center line across the axis in 1 px steps until
/// it touches a text box (1 px clearance); translation stops at the image border.
SeparatorSet derive_gt_separators_distorted(Axis axis, const std::vector<Polyline>& labeled_lines,
                                            const std::vector<Quad>& text_boxes, ImageSize size);

}  // namespace tsr
