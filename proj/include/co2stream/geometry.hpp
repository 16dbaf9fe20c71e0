#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace co2stream {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

/// Axis-aligned box in image pixels, top-left corner plus size.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  Point2<double> center() const { return {x + 0.5 * w, y + 0.5 * h}; }

  bool operator==(const BoundingBox&) const = default;
};

/// Closed polygon in image coordinates; the last vertex connects to the first.
struct PolygonMask {
  std::vector<Point2<double>> vertices;

  bool operator==(const PolygonMask&) const = default;
};

class DegeneratePolygon : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double box_iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

inline PolygonMask to_polygon(const BoundingBox& b) {
  return PolygonMask{{{b.x, b.y}, {b.right(), b.y}, {b.right(), b.bottom()}, {b.x, b.bottom()}}};
}

namespace geometry {

template <typename Scalar>
Scalar cross(const Point2<Scalar>& o, const Point2<Scalar>& a, const Point2<Scalar>& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

/// Shoelace formula. Positive for counter-clockwise vertex order (y up).
template <typename Scalar>
Scalar signed_area(std::span<const Point2<Scalar>> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return Scalar(0);
  Scalar twice = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = poly[i];
    const auto& q = poly[(i + 1) % n];
    twice += p.x() * q.y() - q.x() * p.y();
  }
  return twice / Scalar(2);
}

template <typename Scalar>
Scalar area(std::span<const Point2<Scalar>> poly) {
  return std::abs(signed_area(poly));
}

/// Sutherland-Hodgman clip of `subject` against the convex, counter-clockwise `clip`.
template <typename Scalar>
std::vector<Point2<Scalar>> clip_convex(std::span<const Point2<Scalar>> subject,
                                        std::span<const Point2<Scalar>> clip) {
  std::vector<Point2<Scalar>> out(subject.begin(), subject.end());
  std::vector<Point2<Scalar>> in;
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !out.empty(); ++e) {
    const auto& a = clip[e];
    const auto& b = clip[(e + 1) % m];
    in.swap(out);
    out.clear();
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = in[i];
      const auto& q = in[(i + 1) % n];
      const Scalar sp = cross(a, b, p);
      const Scalar sq = cross(a, b, q);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) {
        const Scalar t = sp / (sp - sq);
        out.push_back(p + t * (q - p));
      }
    }
  }
  return out;
}

template <typename Scalar>
Scalar triangle_intersection_area(std::array<Point2<Scalar>, 3> a, std::array<Point2<Scalar>, 3> b) {
  if (cross(a[0], a[1], a[2]) < 0) std::swap(a[1], a[2]);
  if (cross(b[0], b[1], b[2]) < 0) std::swap(b[1], b[2]);
  const auto clipped =
      clip_convex<Scalar>(std::span<const Point2<Scalar>>(a), std::span<const Point2<Scalar>>(b));
  return area<Scalar>(clipped);
}

/// Exact intersection area of two simple polygons (convex or not).
///
/// Each polygon is written as a signed triangle fan from its first vertex; the
/// indicator of the polygon is the signed sum of the fan triangles' indicators,
/// so the overlap integral splits into pairwise convex triangle clips.
template <typename Scalar>
Scalar intersection_area(std::span<const Point2<Scalar>> a, std::span<const Point2<Scalar>> b) {
  if (a.size() < 3 || b.size() < 3) return Scalar(0);
  const Scalar orient_a = signed_area(a) >= 0 ? Scalar(1) : Scalar(-1);
  const Scalar orient_b = signed_area(b) >= 0 ? Scalar(1) : Scalar(-1);
  Scalar total = 0;
  for (std::size_t i = 1; i + 1 < a.size(); ++i) {
    const Scalar sa = cross(a[0], a[i], a[i + 1]);
    if (sa == 0) continue;
    for (std::size_t j = 1; j + 1 < b.size(); ++j) {
      const Scalar sb = cross(b[0], b[j], b[j + 1]);
      if (sb == 0) continue;
      const Scalar sign = (sa > 0) == (sb > 0) ? Scalar(1) : Scalar(-1);
      total += sign * triangle_intersection_area<Scalar>({a[0], a[i], a[i + 1]}, {b[0], b[j], b[j + 1]});
    }
  }
  const Scalar inter = total * orient_a * orient_b;
  return std::clamp(inter, Scalar(0), std::min(area(a), area(b)));
}

template <typename Scalar>
bool segments_intersect(const Point2<Scalar>& p1, const Point2<Scalar>& p2, const Point2<Scalar>& q1,
                        const Point2<Scalar>& q2) {
  auto on_segment = [](const Point2<Scalar>& p, const Point2<Scalar>& q, const Point2<Scalar>& r) {
    return std::min(p.x(), q.x()) <= r.x() && r.x() <= std::max(p.x(), q.x()) &&
           std::min(p.y(), q.y()) <= r.y() && r.y() <= std::max(p.y(), q.y());
  };
  const Scalar d1 = cross(q1, q2, p1);
  const Scalar d2 = cross(q1, q2, p2);
  const Scalar d3 = cross(p1, p2, q1);
  const Scalar d4 = cross(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  if (d1 == 0 && on_segment(q1, q2, p1)) return true;
  if (d2 == 0 && on_segment(q1, q2, p2)) return true;
  if (d3 == 0 && on_segment(p1, p2, q1)) return true;
  if (d4 == 0 && on_segment(p1, p2, q2)) return true;
  return false;
}

/// True when no two non-adjacent edges touch or cross.
template <typename Scalar>
bool is_simple(std::span<const Point2<Scalar>> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  }
  return true;
}

/// Even-odd point-in-polygon test.
template <typename Scalar>
bool contains(std::span<const Point2<Scalar>> poly, const Point2<Scalar>& p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const Scalar x = (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

}  // namespace geometry

inline double polygon_area(const PolygonMask& m) {
  return geometry::area<double>(m.vertices);
}

/// Mask IoU by exact polygon clipping. Throws DegeneratePolygon on zero-area input.
inline double polygon_iou(const PolygonMask& a, const PolygonMask& b) {
  const double area_a = polygon_area(a);
  const double area_b = polygon_area(b);
  if (!(area_a > 0.0) || !(area_b > 0.0)) throw DegeneratePolygon("polygon has zero area");
  const double inter = geometry::intersection_area<double>(a.vertices, b.vertices);
  const double uni = area_a + area_b - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Mask IoU by point sampling on a `grid` x `grid` lattice over the joint bounds.
/// Cross-check for polygon_iou; accuracy improves with grid size.
inline double polygon_iou_raster(const PolygonMask& a, const PolygonMask& b, int grid = 512) {
  if (!(polygon_area(a) > 0.0) || !(polygon_area(b) > 0.0)) throw DegeneratePolygon("polygon has zero area");
  Point2<double> lo = a.vertices.front();
  Point2<double> hi = lo;
  for (const auto* poly : {&a, &b}) {
    for (const auto& v : poly->vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
  }
  const Point2<double> step = (hi - lo) / static_cast<double>(grid);
  long inter = 0;
  long uni = 0;
  for (int iy = 0; iy < grid; ++iy) {
    for (int ix = 0; ix < grid; ++ix) {
      const Point2<double> p = lo + Point2<double>((ix + 0.5) * step.x(), (iy + 0.5) * step.y());
      const bool in_a = geometry::contains<double>(a.vertices, p);
      const bool in_b = geometry::contains<double>(b.vertices, p);
      inter += (in_a && in_b) ? 1 : 0;
      uni += (in_a || in_b) ? 1 : 0;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace co2stream
