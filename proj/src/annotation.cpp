#include "tsr/annotation.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace tsr {

using nlohmann::json;

namespace {

json point_list(std::span<const Point2D> pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x, p.y});
  return a;
}

std::vector<Point2D> parse_points(const json& a) {
  std::vector<Point2D> out;
  for (const auto& p : a) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return out;
}

Quad parse_quad(const json& a) {
  auto pts = parse_points(a);
  if (pts.size() != 4) throw std::runtime_error("annotation: a box needs four corners");
  Quad q;
  std::copy(pts.begin(), pts.end(), q.corners.begin());
  return q;
}

json separators(const SeparatorSet& set) {
  json a = json::array();
  for (const auto& s : set.separators) {
    a.push_back({{"top", point_list(s.top.points)},
                 {"center", point_list(s.center.points)},
                 {"bottom", point_list(s.bottom.points)},
                 {"confidence", s.confidence}});
  }
  return a;
}

SeparatorSet parse_separators(const json& a, Axis axis) {
  SeparatorSet set{axis, {}};
  for (const auto& s : a) {
    Separator sep;
    sep.top = {axis, parse_points(s.at("top"))};
    sep.center = {axis, parse_points(s.at("center"))};
    sep.bottom = {axis, parse_points(s.at("bottom"))};
    sep.confidence = s.value("confidence", 1.0);
    set.separators.push_back(std::move(sep));
  }
  return set;
}

json cells_json(const TableGrid& grid, const std::vector<bool>* empty) {
  json a = json::array();
  for (std::size_t i = 0; i < grid.final_cells.size(); ++i) {
    const auto& c = grid.final_cells[i];
    json cell = {{"row", c.row}, {"col", c.col}, {"row_span", c.row_span}, {"col_span", c.col_span},
                 {"box", point_list(c.box.corners)}};
    if (empty) cell["empty"] = static_cast<bool>((*empty)[i]);
    a.push_back(cell);
  }
  return a;
}

json prf_json(const PRF& p) { return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}}; }

}  // namespace

std::string serialize_annotation(const AnnotatedSample& s) {
  json j;
  j["image_size"] = {{"width", s.size().width}, {"height", s.size().height}};
  j["cells"] = cells_json(s.gt_grid, &s.cell_empty);
  json text = json::array();
  for (const auto& t : s.text_boxes) text.push_back({{"box", point_list(t.box.corners)}, {"cell", t.cell}});
  j["text_lines"] = text;
  j["row_separators"] = separators(s.gt_row_seps);
  j["col_separators"] = separators(s.gt_col_seps);
  return j.dump(1);
}

AnnotatedSample parse_annotation(const std::string& text) {
  json j = json::parse(text);
  AnnotatedSample s;
  ImageSize size{j.at("image_size").at("width").get<double>(), j.at("image_size").at("height").get<double>()};
  s.gt_row_seps = parse_separators(j.at("row_separators"), Axis::row);
  s.gt_col_seps = parse_separators(j.at("col_separators"), Axis::column);
  TableGrid grid = build_grid(s.gt_row_seps, s.gt_col_seps, size);
  std::vector<std::pair<CellPair, bool>> merges;
  for (const auto& c : j.at("cells")) {
    int row = c.at("row"), col = c.at("col"), rs = c.at("row_span"), cs = c.at("col_span");
    for (int r = row; r < row + rs; ++r)
      for (int q = col; q < col + cs; ++q) {
        if (q + 1 < col + cs) merges.push_back({{{r, q}, {r, q + 1}}, true});
        if (r + 1 < row + rs) merges.push_back({{{r, q}, {r + 1, q}}, true});
      }
    s.cell_empty.push_back(c.value("empty", false));
  }
  s.gt_grid = resolve_merges(grid, merges);
  if (s.gt_grid.final_cells.size() != s.cell_empty.size()) {
    throw std::runtime_error("annotation: cells do not match the separator grid");
  }
  for (const auto& t : j.at("text_lines")) s.text_boxes.push_back({parse_quad(t.at("box")), t.at("cell").get<int>()});
  // the raster is stored separately; keep the size known
  s.image.width = static_cast<int>(size.width);
  s.image.height = static_cast<int>(size.height);
  return s;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

void save_sample(const AnnotatedSample& sample, const std::filesystem::path& dir, const std::string& stem) {
  save_png(sample.image, dir / (stem + ".png"));
  write_text(dir / (stem + ".json"), serialize_annotation(sample));
}

AnnotatedSample load_sample(const std::filesystem::path& json_path) {
  AnnotatedSample s = parse_annotation(read_text(json_path));
  auto png = json_path;
  png.replace_extension(".png");
  GrayImage img = load_png(png);
  if (img.width != s.image.width || img.height != s.image.height) {
    throw std::runtime_error("image size of " + png.string() + " does not match its annotation");
  }
  s.image = std::move(img);
  return s;
}

std::vector<std::filesystem::path> list_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a dataset directory: " + dir.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::string serialize_prediction(const SeparatorSet& rows, const SeparatorSet& cols, const TableGrid& grid) {
  json j;
  j["image_size"] = {{"width", grid.image_size.width}, {"height", grid.image_size.height}};
  j["n_rows"] = grid.n_rows;
  j["n_cols"] = grid.n_cols;
  j["cells"] = cells_json(grid, nullptr);
  j["row_separators"] = separators(rows);
  j["col_separators"] = separators(cols);
  return j.dump(1);
}

std::string serialize_report(const EvalReport& r) {
  json j;
  j["samples"] = r.samples;
  j["limitation_threshold"] = r.limitation;
  json levels = json::array();
  for (const auto& l : r.levels) {
    json e = prf_json(l.prf);
    e["iou"] = l.iou;
    e["correct"] = l.counts.correct;
    e["predicted"] = l.counts.predicted;
    e["ground_truth"] = l.counts.ground_truth;
    levels.push_back(e);
  }
  j["adjacency_iou"] = levels;
  j["weighted_average_f1"] = r.weighted_f1;
  j["adjacency_content"] = prf_json(r.content);
  j["teds_struct"] = r.teds_struct_mean;
  j["teds_struct_per_sample"] = r.teds_per_sample;
  return j.dump(1);
}

}  // namespace tsr
