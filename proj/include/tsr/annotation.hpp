#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tsr/metrics.hpp"
#include "tsr/synthetic.hpp"

namespace tsr {

/// JSON annotation without the raster:
/// {image_size:{width,height}, cells:[{row,col,row_span,col_span,box,empty}], text_lines:[{box,cell}],
///  row_separators:[{top,center,bottom,confidence}], col_separators:[...]}
/// Boxes are four [x, y] corners (tl, tr, br, bl); polylines are lists of [x, y].
std::string serialize_annotation(const AnnotatedSample& sample);
/// Rebuilds the grid from the separators and the cell spans; the image stays empty.
AnnotatedSample parse_annotation(const std::string& json_text);

/// Writes <stem>.png and <stem>.json.
void save_sample(const AnnotatedSample& sample, const std::filesystem::path& dir, const std::string& stem);
AnnotatedSample load_sample(const std::filesystem::path& json_path);

/// Sorted JSON annotation paths of a dataset directory.
std::vector<std::filesystem::path> list_dataset(const std::filesystem::path& dir);

/// Predicted structure: separators, basic grid size and final cells.
std::string serialize_prediction(const SeparatorSet& rows, const SeparatorSet& cols, const TableGrid& grid);

std::string serialize_report(const EvalReport& report);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace tsr
