#include "tsr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace tsr {

namespace {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }
  bool chance(double p) { return uniform(0.0, 1.0) < p; }
  double normal(double sigma) { return std::normal_distribution<double>(0.0, sigma)(rng_); }

 private:
  std::mt19937_64 rng_;
};

std::vector<double> split_extent(Sampler& s, double start, double length, int count, double min_size, double max_weight) {
  std::vector<double> weights(static_cast<std::size_t>(count));
  double total = 0.0;
  for (auto& w : weights) total += (w = s.uniform(1.0, max_weight));
  double slack = length - count * min_size;
  std::vector<double> bounds{std::round(start)};
  double acc = start;
  for (int i = 0; i < count; ++i) {
    acc += min_size + slack * weights[static_cast<std::size_t>(i)] / total;
    bounds.push_back(std::round(acc));
  }
  return bounds;
}

void fill_rect(GrayImage& img, int x0, int y0, int x1, int y1, std::uint8_t value) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, img.width);
  y1 = std::min(y1, img.height);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) img.at(x, y) = std::min(img.at(x, y), value);
}

void hline(GrayImage& img, double y, double x0, double x1, std::uint8_t v) {
  int yi = std::clamp(static_cast<int>(std::lround(y)), 0, img.height - 1);
  fill_rect(img, static_cast<int>(std::lround(x0)), yi, static_cast<int>(std::lround(x1)) + 1, yi + 1, v);
}

void vline(GrayImage& img, double x, double y0, double y1, std::uint8_t v) {
  int xi = std::clamp(static_cast<int>(std::lround(x)), 0, img.width - 1);
  fill_rect(img, xi, static_cast<int>(std::lround(y0)), xi + 1, static_cast<int>(std::lround(y1)) + 1, v);
}

GrayImage render_flat(const TableSpec& spec, std::uint64_t seed) {
  Sampler s(seed ^ 0x9e3779b97f4a7c15ULL);
  GrayImage img(spec.image_width, spec.image_height, 255);
  double scale = std::min(spec.image_width, spec.image_height) / 128.0;
  auto rb = spec.row_boundaries();
  auto cb = spec.col_boundaries();
  auto ink = static_cast<std::uint8_t>(s.integer(20, 90));

  switch (spec.border_style) {
    case BorderStyle::full:
      for (const auto& c : spec.cells) {
        double x0 = cb[static_cast<std::size_t>(c.col)], x1 = cb[static_cast<std::size_t>(c.col + c.col_span)];
        double y0 = rb[static_cast<std::size_t>(c.row)], y1 = rb[static_cast<std::size_t>(c.row + c.row_span)];
        hline(img, y0, x0, x1, ink);
        hline(img, y1, x0, x1, ink);
        vline(img, x0, y0, y1, ink);
        vline(img, x1, y0, y1, ink);
      }
      break;
    case BorderStyle::partial:
      hline(img, rb.front(), cb.front(), cb.back(), ink);
      hline(img, rb[1], cb.front(), cb.back(), ink);
      hline(img, rb.back(), cb.front(), cb.back(), ink);
      break;
    case BorderStyle::none:
      break;
  }

  for (const auto& c : spec.cells) {
    for (const auto& line : c.text_lines) {
      int lx0 = static_cast<int>(line.min_x()), lx1 = static_cast<int>(line.max_x());
      int ly0 = static_cast<int>(line.min_y()), ly1 = static_cast<int>(line.max_y());
      auto glyph_ink = static_cast<std::uint8_t>(s.integer(0, 70));
      int x = lx0;
      while (x < lx1) {
        int cw = std::max(1, static_cast<int>(std::lround(s.integer(2, 4) * scale)));
        int inset_top = (ly1 - ly0 >= 5 && s.chance(0.3)) ? 1 : 0;
        int inset_bottom = (ly1 - ly0 >= 5 && s.chance(0.2)) ? 1 : 0;
        fill_rect(img, x, ly0 + inset_top, std::min(x + cw, lx1), ly1 - inset_bottom, glyph_ink);
        x += cw + 1 + (s.chance(0.2) ? static_cast<int>(std::lround(2 * scale)) : 0);
      }
    }
  }
  for (auto& p : img.pixels) {
    double v = p + s.normal(3.0);
    p = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return img;
}

double catmull_rom(double p0, double p1, double p2, double p3, double t) {
  double t2 = t * t, t3 = t2 * t;
  return 0.5 * (2 * p1 + (-p0 + p2) * t + (2 * p0 - 5 * p1 + 4 * p2 - p3) * t2 + (-p0 + 3 * p1 - 3 * p2 + p3) * t3);
}

Polyline warp_polyline(const Polyline& flat, const Warp& warp, ImageSize size, int points_per_line) {
  Axis axis = flat.axis;
  auto targets = fixed_positions(points_per_line, along_extent(size, axis));
  std::vector<double> values;
  values.reserve(targets.size());
  for (double t : targets) {
    double s = t;
    Point2D mapped{};
    for (int it = 0; it < 200; ++it) {
      mapped = warp.forward(make_point(s, flat.across_at(s), axis));
      double err = along(mapped, axis) - t;
      if (std::abs(err) < 1e-11) break;
      s -= err;
    }
    values.push_back(across(mapped, axis));
  }
  return Polyline::from_across(axis, values, along_extent(size, axis));
}

Separator warp_separator(const Separator& sep, const Warp& warp, ImageSize size, int k) {
  return {warp_polyline(sep.top, warp, size, k), warp_polyline(sep.center, warp, size, k),
          warp_polyline(sep.bottom, warp, size, k), sep.confidence};
}

Quad warp_quad(const Quad& q, const Warp& warp) {
  Quad out;
  for (std::size_t i = 0; i < 4; ++i) out.corners[i] = warp.forward(q.corners[i]);
  return out;
}

Polyline shifted(const Polyline& line, double delta) {
  Polyline out = line;
  for (auto& p : out.points) p = make_point(along(p, line.axis), across(p, line.axis) + delta, line.axis);
  return out;
}

Polyline midline(const Polyline& a, const Polyline& b) {
  Polyline out = a;
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    double v = 0.5 * (across(a.points[i], a.axis) + across(b.points[i], b.axis));
    out.points[i] = make_point(along(a.points[i], a.axis), v, a.axis);
  }
  return out;
}

// Translation (>= 0) in direction `sign` before the line comes within 1 px of a text box.
double sweep_translation(const Polyline& line, int sign, const std::vector<Quad>& boxes, ImageSize size) {
  double ext = along_extent(size, line.axis);
  double cross_ext = across_extent(size, line.axis);
  auto values = line.across_values();
  double cap = sign < 0 ? *std::min_element(values.begin(), values.end())
                        : cross_ext - *std::max_element(values.begin(), values.end());
  cap = std::max(cap, 0.0);
  for (int d = 0; d <= static_cast<int>(std::floor(cap)); ++d) {
    auto pts = shifted(line, sign * d).extended(ext, cross_ext);
    for (const auto& b : boxes) {
      if (polyline_touches_polygon(pts, b.corners)) return std::max(0, d - 1);
    }
  }
  return cap;
}

}  // namespace

std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::plain: return "plain";
    case Difficulty::spans: return "spans";
    case Difficulty::empties: return "empties";
    case Difficulty::dense: return "dense";
  }
  return "plain";
}

std::string to_string(WarpLevel w) {
  switch (w) {
    case WarpLevel::none: return "none";
    case WarpLevel::mild: return "mild";
    case WarpLevel::strong: return "strong";
  }
  return "none";
}

Difficulty parse_difficulty(const std::string& s) {
  if (s == "plain") return Difficulty::plain;
  if (s == "spans") return Difficulty::spans;
  if (s == "empties") return Difficulty::empties;
  if (s == "dense") return Difficulty::dense;
  throw std::invalid_argument("unknown difficulty '" + s + "'");
}

WarpLevel parse_warp_level(const std::string& s) {
  if (s == "none") return WarpLevel::none;
  if (s == "mild") return WarpLevel::mild;
  if (s == "strong") return WarpLevel::strong;
  throw std::invalid_argument("unknown warp level '" + s + "'");
}

DifficultyProfile difficulty_profile(Difficulty d) {
  switch (d) {
    case Difficulty::plain: return {3, 5, 3, 4, 0.0, 0.0, 18.0};
    case Difficulty::spans: return {3, 5, 3, 4, 0.7, 0.0, 18.0};
    case Difficulty::empties: return {3, 5, 3, 4, 0.0, 0.2, 18.0};
    case Difficulty::dense: return {5, 7, 4, 5, 0.5, 0.15, 14.0};
  }
  return {};
}

std::vector<double> TableSpec::row_boundaries() const {
  std::vector<double> b{origin_y};
  for (double h : row_heights) b.push_back(b.back() + h);
  return b;
}

std::vector<double> TableSpec::col_boundaries() const {
  std::vector<double> b{origin_x};
  for (double w : col_widths) b.push_back(b.back() + w);
  return b;
}

std::vector<const LayoutCell*> TableSpec::spans() const {
  std::vector<const LayoutCell*> out;
  for (const auto& c : cells)
    if (c.spanning()) out.push_back(&c);
  return out;
}

std::vector<CellIndex> TableSpec::empty_cells() const {
  std::vector<CellIndex> out;
  for (const auto& c : cells)
    if (c.empty) out.push_back({c.row, c.col});
  return out;
}

void TableSpec::validate() const {
  if (n_rows < 1 || n_cols < 1) throw std::invalid_argument("TableSpec: empty table");
  if (static_cast<int>(row_heights.size()) != n_rows || static_cast<int>(col_widths.size()) != n_cols)
    throw std::invalid_argument("TableSpec: extent count mismatch");
  for (double h : row_heights)
    if (!(h > 0)) throw std::invalid_argument("TableSpec: non-positive row height");
  for (double w : col_widths)
    if (!(w > 0)) throw std::invalid_argument("TableSpec: non-positive column width");
  std::vector<int> owner(static_cast<std::size_t>(n_rows * n_cols), -1);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    if (c.row < 0 || c.col < 0 || c.row_span < 1 || c.col_span < 1 || c.row + c.row_span > n_rows ||
        c.col + c.col_span > n_cols)
      throw std::invalid_argument("TableSpec: cell outside the table");
    for (int r = c.row; r < c.row + c.row_span; ++r)
      for (int k = c.col; k < c.col + c.col_span; ++k) {
        int& o = owner[static_cast<std::size_t>(r * n_cols + k)];
        if (o >= 0) throw std::invalid_argument("TableSpec: overlapping cells");
        o = static_cast<int>(i);
      }
    if (i > 0) {
      const auto& p = cells[i - 1];
      if (std::pair(p.row, p.col) >= std::pair(c.row, c.col)) throw std::invalid_argument("TableSpec: cells not row-major");
    }
  }
  if (std::find(owner.begin(), owner.end(), -1) != owner.end()) throw std::invalid_argument("TableSpec: uncovered cell");
}

TableSpec sample_table_spec(std::uint64_t seed, Difficulty difficulty, const GeneratorOptions& options) {
  Sampler s(seed);
  DifficultyProfile prof = difficulty_profile(difficulty);
  TableSpec spec;
  spec.image_width = options.width;
  spec.image_height = options.height;
  double scale = std::min(options.width, options.height) / 128.0;

  double mx = std::round(s.uniform(3.0, 8.0) * scale);
  double my = std::round(s.uniform(3.0, 8.0) * scale);
  double table_w = options.width - 2 * mx;
  double table_h = options.height - 2 * my;
  double min_row_h = prof.min_row_height * scale;
  double min_col_w = 22.0 * scale;
  int max_rows = std::max(1, std::min(prof.max_rows, static_cast<int>(table_h / min_row_h)));
  int max_cols = std::max(1, std::min(prof.max_cols, static_cast<int>(table_w / min_col_w)));
  spec.n_rows = s.integer(std::min(prof.min_rows, max_rows), max_rows);
  spec.n_cols = s.integer(std::min(prof.min_cols, max_cols), max_cols);

  auto rb = split_extent(s, my, table_h, spec.n_rows, min_row_h, 1.6);
  auto cb = split_extent(s, mx, table_w, spec.n_cols, min_col_w, 2.0);
  spec.origin_y = rb.front();
  spec.origin_x = cb.front();
  for (std::size_t i = 0; i + 1 < rb.size(); ++i) spec.row_heights.push_back(rb[i + 1] - rb[i]);
  for (std::size_t i = 0; i + 1 < cb.size(); ++i) spec.col_widths.push_back(cb[i + 1] - cb[i]);

  double style = s.uniform(0.0, 1.0);
  spec.border_style = style < 0.4 ? BorderStyle::full : (style < 0.7 ? BorderStyle::partial : BorderStyle::none);

  const int nr = spec.n_rows, nc = spec.n_cols;
  std::vector<int> owner(static_cast<std::size_t>(nr * nc), -1);
  std::vector<LayoutCell> spans;

  // Every row keeps a cell that spans no rows and every column one that spans no columns.
  auto keeps_plain_lines = [&](const std::vector<LayoutCell>& candidate) {
    std::vector<bool> row_ok(static_cast<std::size_t>(nr), false), col_ok(static_cast<std::size_t>(nc), false);
    std::vector<int> rs(static_cast<std::size_t>(nr * nc), 1), cs(static_cast<std::size_t>(nr * nc), 1);
    for (const auto& c : candidate)
      for (int r = c.row; r < c.row + c.row_span; ++r)
        for (int k = c.col; k < c.col + c.col_span; ++k)
          rs[static_cast<std::size_t>(r * nc + k)] = c.row_span, cs[static_cast<std::size_t>(r * nc + k)] = c.col_span;
    for (int r = 0; r < nr; ++r)
      for (int k = 0; k < nc; ++k) {
        if (rs[static_cast<std::size_t>(r * nc + k)] == 1) row_ok[static_cast<std::size_t>(r)] = true;
        if (cs[static_cast<std::size_t>(r * nc + k)] == 1) col_ok[static_cast<std::size_t>(k)] = true;
      }
    return std::all_of(row_ok.begin(), row_ok.end(), [](bool b) { return b; }) &&
           std::all_of(col_ok.begin(), col_ok.end(), [](bool b) { return b; });
  };

  if (prof.span_probability > 0.0 && s.chance(prof.span_probability)) {
    int wanted = s.chance(0.4) ? 2 : 1;
    for (int attempt = 0; attempt < 40 && static_cast<int>(spans.size()) < wanted; ++attempt) {
      double kind = s.uniform(0.0, 1.0);
      int rs = kind < 0.5 ? 1 : 2;
      int cs = (kind < 0.5 || kind >= 0.8) ? 2 : 1;
      if (rs > nr || cs > nc) continue;
      int r0 = s.integer(0, nr - rs), c0 = s.integer(0, nc - cs);
      bool free = true;
      for (int r = r0; r < r0 + rs; ++r)
        for (int k = c0; k < c0 + cs; ++k) free &= owner[static_cast<std::size_t>(r * nc + k)] < 0;
      if (!free) continue;
      auto candidate = spans;
      candidate.push_back({r0, c0, rs, cs, false, {}});
      if (!keeps_plain_lines(candidate)) continue;
      for (int r = r0; r < r0 + rs; ++r)
        for (int k = c0; k < c0 + cs; ++k) owner[static_cast<std::size_t>(r * nc + k)] = 1;
      spans = std::move(candidate);
    }
  }

  for (int r = 0; r < nr; ++r) {
    for (int k = 0; k < nc; ++k) {
      auto it = std::find_if(spans.begin(), spans.end(), [&](const LayoutCell& c) { return c.row == r && c.col == k; });
      if (it != spans.end()) {
        spec.cells.push_back(*it);
      } else if (owner[static_cast<std::size_t>(r * nc + k)] < 0) {
        LayoutCell c{r, k, 1, 1, false, {}};
        c.empty = prof.empty_probability > 0.0 && s.chance(prof.empty_probability);
        spec.cells.push_back(c);
      }
    }
  }

  // Each row and column keeps at least one non-empty cell that does not span across it.
  for (int pass = 0; pass < 2; ++pass) {
    int lines = pass == 0 ? nr : nc;
    for (int l = 0; l < lines; ++l) {
      std::vector<LayoutCell*> plain;
      bool has_text = false;
      for (auto& c : spec.cells) {
        bool in_line = pass == 0 ? (c.row == l && c.row_span == 1) : (c.col == l && c.col_span == 1);
        if (!in_line) continue;
        if (!c.empty) has_text = true;
        plain.push_back(&c);
      }
      if (!has_text && !plain.empty()) plain[static_cast<std::size_t>(s.integer(0, static_cast<int>(plain.size()) - 1))]->empty = false;
    }
  }

  // Text lines.
  double pad = std::ceil(3.0 * scale);
  double gap = std::max(1.0, std::round(2.0 * scale));
  for (auto& c : spec.cells) {
    if (c.empty) continue;
    double x0 = cb[static_cast<std::size_t>(c.col)], x1 = cb[static_cast<std::size_t>(c.col + c.col_span)];
    double y0 = rb[static_cast<std::size_t>(c.row)], y1 = rb[static_cast<std::size_t>(c.row + c.row_span)];
    double avail_h = (y1 - y0) - 2 * pad;
    double avail_w = (x1 - x0) - 2 * pad;
    double lh = std::min(avail_h, std::round(s.integer(5, 7) * scale));
    lh = std::max(lh, 2.0);
    int n_lines = (avail_h >= 2 * lh + gap + 2 && s.chance(0.3)) ? 2 : 1;
    double block = n_lines * lh + (n_lines - 1) * gap;
    double top = y0 + pad + std::floor(s.uniform(0.0, std::max(0.0, avail_h - block)));
    int align = s.integer(0, 2);
    for (int i = 0; i < n_lines; ++i) {
      double lw = std::max(std::min(4.0, avail_w), std::round(s.uniform(0.35, 0.9) * avail_w));
      double lx = x0 + pad;
      if (align == 1) lx += std::floor((avail_w - lw) / 2);
      if (align == 2) lx += avail_w - lw;
      double ly = top + i * (lh + gap);
      c.text_lines.push_back(Quad::from_rect(lx, ly, lx + lw, ly + lh));
    }
  }
  spec.validate();
  return spec;
}

Warp Warp::identity() { return Warp{}; }

Warp Warp::control_grid(int grid_x, int grid_y, std::vector<Point2D> displacements, ImageSize size) {
  if (grid_x < 2 || grid_y < 2 || displacements.size() != static_cast<std::size_t>(grid_x * grid_y)) {
    throw std::invalid_argument("Warp::control_grid: bad control grid");
  }
  Warp w;
  w.kind_ = Kind::grid;
  w.grid_x_ = grid_x;
  w.grid_y_ = grid_y;
  w.grid_ = std::move(displacements);
  w.size_ = size;
  return w;
}

Warp Warp::sinusoidal(double amp_x, double amp_y, double wavelength, double phase) {
  Warp w;
  w.kind_ = Kind::sinusoid;
  w.amp_x_ = amp_x;
  w.amp_y_ = amp_y;
  w.wavelength_ = wavelength;
  w.phase_ = phase;
  return w;
}

Warp Warp::random(WarpLevel level, std::uint64_t seed, ImageSize size) {
  if (level == WarpLevel::none) return identity();
  Sampler s(seed ^ 0x5851f42d4c957f2dULL);
  double scale = std::min(size.width, size.height) / 128.0;
  double amp = (level == WarpLevel::mild ? 2.0 : 5.0) * scale;
  double bow = (level == WarpLevel::mild ? 3.0 : 7.0) * scale;
  const int g = 4;
  for (int attempt = 0; attempt < 8; ++attempt) {
    double bow_y = s.uniform(-bow, bow), bow_x = s.uniform(-bow, bow) * 0.5;
    std::vector<Point2D> disp;
    for (int j = 0; j < g; ++j) {
      for (int i = 0; i < g; ++i) {
        double fx = static_cast<double>(i) / (g - 1), fy = static_cast<double>(j) / (g - 1);
        disp.push_back({s.uniform(-amp, amp) + bow_x * std::sin(std::numbers::pi * fy),
                        s.uniform(-amp, amp) + bow_y * std::sin(std::numbers::pi * fx)});
      }
    }
    Warp w = control_grid(g, g, std::move(disp), size);
    if (w.is_bijective(size)) return w;
    amp *= 0.5;
    bow *= 0.5;
  }
  return identity();
}

Point2D Warp::displacement(Point2D u) const {
  switch (kind_) {
    case Kind::identity:
      return {0.0, 0.0};
    case Kind::sinusoid: {
      double k = 2.0 * std::numbers::pi / wavelength_;
      return {amp_x_ * std::sin(k * u.y + phase_), amp_y_ * std::sin(k * u.x + phase_)};
    }
    case Kind::grid: {
      double tx = std::clamp(u.x / size_.width * (grid_x_ - 1), 0.0, static_cast<double>(grid_x_ - 1));
      double ty = std::clamp(u.y / size_.height * (grid_y_ - 1), 0.0, static_cast<double>(grid_y_ - 1));
      int ix = std::min(static_cast<int>(tx), grid_x_ - 2);
      int iy = std::min(static_cast<int>(ty), grid_y_ - 2);
      double fx = tx - ix, fy = ty - iy;
      auto at = [&](int i, int j) -> const Point2D& {
        i = std::clamp(i, 0, grid_x_ - 1);
        j = std::clamp(j, 0, grid_y_ - 1);
        return grid_[static_cast<std::size_t>(j * grid_x_ + i)];
      };
      Point2D out{};
      double rows_x[4], rows_y[4];
      for (int r = 0; r < 4; ++r) {
        int j = iy - 1 + r;
        rows_x[r] = catmull_rom(at(ix - 1, j).x, at(ix, j).x, at(ix + 1, j).x, at(ix + 2, j).x, fx);
        rows_y[r] = catmull_rom(at(ix - 1, j).y, at(ix, j).y, at(ix + 1, j).y, at(ix + 2, j).y, fx);
      }
      out.x = catmull_rom(rows_x[0], rows_x[1], rows_x[2], rows_x[3], fy);
      out.y = catmull_rom(rows_y[0], rows_y[1], rows_y[2], rows_y[3], fy);
      return out;
    }
  }
  return {};
}

Point2D Warp::forward(Point2D u) const {
  Point2D d = displacement(u);
  return {u.x + d.x, u.y + d.y};
}

Point2D Warp::inverse(Point2D v) const {
  Point2D u = v;
  for (int it = 0; it < 200; ++it) {
    Point2D d = displacement(u);
    Point2D next{v.x - d.x, v.y - d.y};
    bool done = std::abs(next.x - u.x) < 1e-12 && std::abs(next.y - u.y) < 1e-12;
    u = next;
    if (done) break;
  }
  return u;
}

bool Warp::is_bijective(ImageSize size, double step) const {
  const double h = 0.25;
  for (double y = 0.0; y <= size.height; y += step) {
    for (double x = 0.0; x <= size.width; x += step) {
      Point2D ax = forward({x + h, y}), bx = forward({x - h, y});
      Point2D ay = forward({x, y + h}), by = forward({x, y - h});
      double j11 = (ax.x - bx.x) / (2 * h), j21 = (ax.y - bx.y) / (2 * h);
      double j12 = (ay.x - by.x) / (2 * h), j22 = (ay.y - by.y) / (2 * h);
      if (j11 * j22 - j12 * j21 <= 0.0) return false;
    }
  }
  return true;
}

std::pair<SeparatorSet, SeparatorSet> derive_gt_separators_axis_aligned(const TableSpec& spec, ImageSize size,
                                                                        int points_per_line, double fixed_width) {
  std::pair<SeparatorSet, SeparatorSet> out{{Axis::row, {}}, {Axis::column, {}}};
  for (Axis axis : {Axis::row, Axis::column}) {
    const bool rows = axis == Axis::row;
    auto bounds = rows ? spec.row_boundaries() : spec.col_boundaries();
    int lines = rows ? spec.n_rows : spec.n_cols;
    std::vector<double> lo(static_cast<std::size_t>(lines)), hi(static_cast<std::size_t>(lines));
    for (int l = 0; l < lines; ++l) {
      double mn = 1e300, mx = -1e300;
      for (const auto& c : spec.cells) {
        bool member = rows ? (c.row == l && c.row_span == 1) : (c.col == l && c.col_span == 1);
        if (!member || c.empty) continue;
        for (const auto& t : c.text_lines) {
          mn = std::min(mn, rows ? t.min_y() : t.min_x());
          mx = std::max(mx, rows ? t.max_y() : t.max_x());
        }
      }
      if (mn > mx) {  // only spanning or empty cells: geometric extent
        mn = bounds[static_cast<std::size_t>(l)];
        mx = bounds[static_cast<std::size_t>(l + 1)];
      }
      lo[static_cast<std::size_t>(l)] = mn;
      hi[static_cast<std::size_t>(l)] = mx;
    }
    auto positions = fixed_positions(points_per_line, along_extent(size, axis));
    SeparatorSet& set = rows ? out.first : out.second;
    for (int l = 0; l + 1 < lines; ++l) {
      double top = hi[static_cast<std::size_t>(l)];
      double bottom = lo[static_cast<std::size_t>(l + 1)];
      double boundary = bounds[static_cast<std::size_t>(l + 1)];
      double center = 0.5 * (top + bottom);
      if (fixed_width > 0.0) {
        center = boundary;
        top = boundary - fixed_width / 2;
        bottom = boundary + fixed_width / 2;
      } else if (top > bottom) {
        top = bottom = center = boundary;
      }
      set.separators.push_back({Polyline::straight(axis, top, positions), Polyline::straight(axis, center, positions),
                                Polyline::straight(axis, bottom, positions), 1.0});
    }
  }
  return out;
}

SeparatorSet derive_gt_separators_distorted(Axis axis, const std::vector<Polyline>& labeled_lines,
                                            const std::vector<Quad>& text_boxes, ImageSize size) {
  SeparatorSet out{axis, {}};
  for (const auto& line : labeled_lines) {
    double up = sweep_translation(line, -1, text_boxes, size);
    double down = sweep_translation(line, +1, text_boxes, size);
    Polyline top = shifted(line, -up);
    Polyline bottom = shifted(line, down);
    out.separators.push_back({top, midline(top, bottom), bottom, 1.0});
  }
  return out;
}

AnnotatedSample render_and_warp(const TableSpec& spec, const std::optional<Warp>& warp, const GeneratorOptions& options,
                                std::uint64_t render_seed) {
  spec.validate();
  ImageSize size{static_cast<double>(spec.image_width), static_cast<double>(spec.image_height)};
  if (warp && !warp->is_bijective(size)) {
    throw std::invalid_argument("render_and_warp: warp is not bijective on the image");
  }
  const int k = options.points_per_line;
  AnnotatedSample sample;
  GrayImage flat = render_flat(spec, render_seed);
  auto [rows, cols] = derive_gt_separators_axis_aligned(spec, size, k, options.fixed_separator_width);

  std::vector<TextBox> boxes;
  for (std::size_t i = 0; i < spec.cells.size(); ++i)
    for (const auto& t : spec.cells[i].text_lines) boxes.push_back({t, static_cast<int>(i)});

  if (!warp) {
    sample.image = std::move(flat);
  } else {
    sample.image = GrayImage(spec.image_width, spec.image_height);
    for (int y = 0; y < spec.image_height; ++y) {
      for (int x = 0; x < spec.image_width; ++x) {
        Point2D u = warp->inverse({x + 0.5, y + 0.5});
        sample.image.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(flat.sample(u.x, u.y)), 0L, 255L));
      }
    }
    for (auto& b : boxes) b.box = warp_quad(b.box, *warp);

    if (options.gt_procedure == GtProcedure::boundary_sweep) {
      for (Axis axis : {Axis::row, Axis::column}) {
        const bool is_row = axis == Axis::row;
        auto bounds = is_row ? spec.row_boundaries() : spec.col_boundaries();
        auto positions = fixed_positions(k, along_extent(size, axis));
        std::vector<Polyline> labeled;
        for (std::size_t l = 1; l + 1 < bounds.size(); ++l)
          labeled.push_back(warp_polyline(Polyline::straight(axis, bounds[l], positions), *warp, size, k));
        std::vector<Quad> blockers;
        for (const auto& b : boxes) {
          const auto& c = spec.cells[static_cast<std::size_t>(b.cell)];
          if ((is_row ? c.row_span : c.col_span) == 1) blockers.push_back(b.box);
        }
        (is_row ? rows : cols) = derive_gt_separators_distorted(axis, labeled, blockers, size);
      }
    } else {
      for (auto& s : rows.separators) s = warp_separator(s, *warp, size, k);
      for (auto& s : cols.separators) s = warp_separator(s, *warp, size, k);
    }
  }

  sample.gt_row_seps = std::move(rows);
  sample.gt_col_seps = std::move(cols);
  TableGrid grid = build_grid(sample.gt_row_seps, sample.gt_col_seps, size);
  std::vector<std::pair<CellPair, bool>> merges;
  for (const auto& c : spec.cells) {
    for (int r = c.row; r < c.row + c.row_span; ++r)
      for (int q = c.col; q < c.col + c.col_span; ++q) {
        if (q + 1 < c.col + c.col_span) merges.push_back({{{r, q}, {r, q + 1}}, true});
        if (r + 1 < c.row + c.row_span) merges.push_back({{{r, q}, {r + 1, q}}, true});
      }
  }
  sample.gt_grid = resolve_merges(grid, merges);
  if (sample.gt_grid.final_cells.size() != spec.cells.size()) {
    throw std::logic_error("render_and_warp: GT grid does not match the layout");
  }
  for (const auto& c : spec.cells) sample.cell_empty.push_back(c.empty);
  sample.text_boxes = std::move(boxes);
  return sample;
}

AnnotatedSample generate_sample(std::uint64_t seed, Difficulty difficulty, WarpLevel warp, const GeneratorOptions& options) {
  TableSpec spec = sample_table_spec(seed, difficulty, options);
  ImageSize size{static_cast<double>(options.width), static_cast<double>(options.height)};
  std::optional<Warp> w;
  if (warp != WarpLevel::none) w = Warp::random(warp, seed, size);
  return render_and_warp(spec, w, options, seed);
}

}  // namespace tsr
