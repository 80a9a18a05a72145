#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace tsr {

/// 8-bit grayscale raster, row-major; 255 is blank paper.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 255)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  bool empty() const { return pixels.empty(); }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
  /// Bilinear sample with pixel centers at (x + 0.5, y + 0.5); outside the raster reads as 255.
  double sample(double x, double y) const;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

GrayImage load_png(const std::filesystem::path& path);
void save_png(const GrayImage& image, const std::filesystem::path& path);
/// Area/linear resize to the given size.
GrayImage resize_image(const GrayImage& image, int width, int height);

}  // namespace tsr
