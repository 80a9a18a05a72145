#pragma once

// Brute-force reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "tsr/geometry.hpp"

namespace tsr::oracle {

inline double orient(Point2D a, Point2D b, Point2D c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

inline bool on_segment(Point2D a, Point2D b, Point2D p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

/// Closed-segment intersection test (touching counts).
inline bool segments_intersect(Point2D p1, Point2D p2, Point2D q1, Point2D q2) {
  double d1 = orient(q1, q2, p1);
  double d2 = orient(q1, q2, p2);
  double d3 = orient(p1, p2, q1);
  double d4 = orient(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  if (d1 == 0 && on_segment(q1, q2, p1)) return true;
  if (d2 == 0 && on_segment(q1, q2, p2)) return true;
  if (d3 == 0 && on_segment(p1, p2, q1)) return true;
  if (d4 == 0 && on_segment(p1, p2, q2)) return true;
  return false;
}

/// Intersection point of two non-parallel segments, if they meet.
inline std::optional<Point2D> segment_intersection(Point2D p1, Point2D p2, Point2D q1, Point2D q2) {
  double rx = p2.x - p1.x, ry = p2.y - p1.y;
  double sx = q2.x - q1.x, sy = q2.y - q1.y;
  double denom = rx * sy - ry * sx;
  if (denom == 0.0) return std::nullopt;
  double t = ((q1.x - p1.x) * sy - (q1.y - p1.y) * sx) / denom;
  double u = ((q1.x - p1.x) * ry - (q1.y - p1.y) * rx) / denom;
  const double eps = 1e-12;
  if (t < -eps || t > 1 + eps || u < -eps || u > 1 + eps) return std::nullopt;
  return Point2D{p1.x + t * rx, p1.y + t * ry};
}

inline std::vector<Point2D> all_intersections(std::span<const Point2D> a, std::span<const Point2D> b) {
  std::vector<Point2D> out;
  for (std::size_t i = 0; i + 1 < a.size(); ++i) {
    for (std::size_t j = 0; j + 1 < b.size(); ++j) {
      if (auto p = segment_intersection(a[i], a[i + 1], b[j], b[j + 1])) out.push_back(*p);
    }
  }
  return out;
}

inline bool polylines_touch(std::span<const Point2D> a, std::span<const Point2D> b) {
  for (std::size_t i = 0; i + 1 < a.size(); ++i) {
    for (std::size_t j = 0; j + 1 < b.size(); ++j) {
      if (segments_intersect(a[i], a[i + 1], b[j], b[j + 1])) return true;
    }
  }
  return false;
}

}  // namespace tsr::oracle
