#include "tsr/overlay.hpp"

#include <cmath>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace tsr {

namespace {

cv::Point2d cvp(Point2D p) { return {p.x, p.y}; }

void polyline(cv::Mat& m, const std::vector<Point2D>& pts, const cv::Scalar& colour, bool dashed) {
  const double dash = 4.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    Point2D a = pts[i], b = pts[i + 1];
    if (!dashed) {
      cv::line(m, cvp(a), cvp(b), colour, 1, cv::LINE_AA);
      continue;
    }
    double len = std::hypot(b.x - a.x, b.y - a.y);
    for (double s = 0.0; s < len; s += 2 * dash) {
      double e = std::min(len, s + dash);
      Point2D p{a.x + (b.x - a.x) * s / len, a.y + (b.y - a.y) * s / len};
      Point2D q{a.x + (b.x - a.x) * e / len, a.y + (b.y - a.y) * e / len};
      cv::line(m, cvp(p), cvp(q), colour, 1, cv::LINE_AA);
    }
  }
}

void draw_set(cv::Mat& m, const SeparatorSet& set, ImageSize size, const cv::Scalar& colour) {
  double along_ext = along_extent(size, set.axis), across_ext = across_extent(size, set.axis);
  for (const auto& s : set.separators) {
    polyline(m, s.center.extended(along_ext, across_ext), colour, false);
    polyline(m, s.top.extended(along_ext, across_ext), colour, true);
    polyline(m, s.bottom.extended(along_ext, across_ext), colour, true);
  }
}

}  // namespace

void write_overlay(const GrayImage& image, const SeparatorSet& rows, const SeparatorSet& cols, const TableGrid& grid,
                   const std::filesystem::path& path) {
  cv::Mat gray(image.height, image.width, CV_8UC1, const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat m;
  cv::cvtColor(gray, m, cv::COLOR_GRAY2BGR);
  ImageSize size{static_cast<double>(image.width), static_cast<double>(image.height)};
  for (const auto& c : grid.final_cells) {
    std::vector<cv::Point> poly;
    for (const auto& p : c.box.corners) poly.emplace_back(static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y)));
    cv::polylines(m, poly, true, cv::Scalar(60, 170, 60), 1);
  }
  draw_set(m, rows, size, cv::Scalar(40, 40, 220));
  draw_set(m, cols, size, cv::Scalar(220, 90, 30));
  if (!cv::imwrite(path.string(), m)) throw std::runtime_error("cannot write overlay " + path.string());
}

}  // namespace tsr
