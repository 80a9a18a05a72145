#pragma once

#include <filesystem>

#include "tsr/geometry.hpp"
#include "tsr/image.hpp"

namespace tsr {

/// Colour PNG: center lines solid, top/bottom boundaries dashed, final cell boxes outlined.
void write_overlay(const GrayImage& image, const SeparatorSet& rows, const SeparatorSet& cols, const TableGrid& grid,
                   const std::filesystem::path& path);

}  // namespace tsr
