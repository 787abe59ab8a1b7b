#pragma once

#include <cmath>
#include <optional>
#include <span>

namespace jamfield::geo {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

/// Mirror `p` across the infinite line through `a` and `b`.
inline Vec2 mirror(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 d = b - a;
  const double t = dot(p - a, d) / dot(d, d);
  const Vec2 foot = a + d * t;
  return foot * 2.0 - p;
}

/// Parameters (t along p->q, u along a->b) of the intersection of two
/// segment-supporting lines; nullopt when (nearly) parallel.
struct LineHit {
  double t;
  double u;
};

inline std::optional<LineHit> line_intersection(Vec2 p, Vec2 q, Vec2 a, Vec2 b) {
  const Vec2 r = q - p;
  const Vec2 s = b - a;
  const double den = cross(r, s);
  if (den * den <= 1e-30 * dot(r, r) * dot(s, s)) return std::nullopt;
  const Vec2 ap = a - p;
  return LineHit{cross(ap, s) / den, cross(ap, r) / den};
}

/// Signed area, positive for counter-clockwise vertex order.
inline double signed_area(std::span<const Vec2> poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % poly.size()];
    s += cross(a, b);
  }
  return 0.5 * s;
}

/// Even-odd point in polygon test. Boundary points count as inside.
inline bool point_in_polygon(Vec2 p, std::span<const Vec2> poly) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[j];
    const Vec2 ab = b - a;
    const Vec2 ap = p - a;
    if (std::abs(cross(ab, ap)) <= 1e-12 * (norm(ab) + 1.0) && dot(ap, ab) >= 0.0 &&
        dot(ap, ab) <= dot(ab, ab)) {
      return true;
    }
    if ((a.y > p.y) != (b.y > p.y)) {
      const double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < xc) inside = !inside;
    }
  }
  return inside;
}

/// True when the open segments [p,q] and [a,b] properly cross, ignoring
/// contact within `eps` (relative) of p or q.
inline bool segment_blocks(Vec2 p, Vec2 q, Vec2 a, Vec2 b, double eps = 1e-9) {
  const auto hit = line_intersection(p, q, a, b);
  if (!hit) return false;
  return hit->t > eps && hit->t < 1.0 - eps && hit->u >= 0.0 && hit->u <= 1.0;
}

}  // namespace jamfield::geo
