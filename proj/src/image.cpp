#include "tsr/image.hpp"

#include <cmath>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace tsr {

double GrayImage::sample(double x, double y) const {
  double fx = x - 0.5;
  double fy = y - 0.5;
  int x0 = static_cast<int>(std::floor(fx));
  int y0 = static_cast<int>(std::floor(fy));
  double ax = fx - x0;
  double ay = fy - y0;
  auto px = [&](int xi, int yi) -> double {
    if (xi < 0 || yi < 0 || xi >= width || yi >= height) return 255.0;
    return at(xi, yi);
  };
  if (ax == 0.0 && ay == 0.0) return px(x0, y0);
  return (1 - ay) * ((1 - ax) * px(x0, y0) + ax * px(x0 + 1, y0)) + ay * ((1 - ax) * px(x0, y0 + 1) + ax * px(x0 + 1, y0 + 1));
}

GrayImage load_png(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) {
    throw std::runtime_error("cannot read image " + path.string());
  }
  GrayImage img(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<std::uint8_t>(y);
    std::copy(row, row + m.cols, img.pixels.begin() + static_cast<std::ptrdiff_t>(y) * m.cols);
  }
  return img;
}

void save_png(const GrayImage& image, const std::filesystem::path& path) {
  cv::Mat m(image.height, image.width, CV_8UC1, const_cast<std::uint8_t*>(image.pixels.data()));
  if (!cv::imwrite(path.string(), m)) {
    throw std::runtime_error("cannot write image " + path.string());
  }
}

GrayImage resize_image(const GrayImage& image, int width, int height) {
  if (width == image.width && height == image.height) return image;
  cv::Mat src(image.height, image.width, CV_8UC1, const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat dst;
  int interp = (width < image.width) ? cv::INTER_AREA : cv::INTER_LINEAR;
  cv::resize(src, dst, cv::Size(width, height), 0, 0, interp);
  GrayImage out(width, height);
  for (int y = 0; y < height; ++y) {
    const auto* row = dst.ptr<std::uint8_t>(y);
    std::copy(row, row + width, out.pixels.begin() + static_cast<std::ptrdiff_t>(y) * width);
  }
  return out;
}

}  // namespace tsr
