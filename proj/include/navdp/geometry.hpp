#pragma once

#include <cmath>

namespace navdp {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 &operator+=(const Vec2 &o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2 &operator-=(const Vec2 &o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2 &operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  friend constexpr Vec2 operator+(Vec2 a, const Vec2 &b) { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, const Vec2 &b) { return a -= b; }
  friend constexpr Vec2 operator-(const Vec2 &a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
  friend constexpr Vec2 operator/(const Vec2 &a, double s) { return {a.x / s, a.y / s}; }
  friend constexpr bool operator==(const Vec2 &, const Vec2 &) = default;
};

constexpr double dot(const Vec2 &a, const Vec2 &b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(const Vec2 &a, const Vec2 &b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2 &v) { return std::sqrt(v.x * v.x + v.y * v.y); }
constexpr double norm_sq(const Vec2 &v) { return dot(v, v); }

/// Counter-clockwise quarter turn, i.e. the matrix [[0,-1],[1,0]].
constexpr Vec2 rotate90(const Vec2 &v) { return {-v.y, v.x}; }

/// Scale v down onto the closed ball of the given radius; vectors inside are returned unchanged.
inline Vec2 clamp_to_ball(const Vec2 &v, double radius) {
  const double n = norm(v);
  if (n <= radius) return v;
  if (radius <= 0.0) return {};
  return v * (radius / n);
}

/// Periodic rectangle [0, width) x [0, height).
struct Domain {
  double width = 10.0;
  double height = 10.0;

  static double wrap_coord(double v, double period) {
    if (v >= 0.0 && v < period) return v;
    double r = v - period * std::floor(v / period);
    // a tiny negative v rounds up to exactly `period`
    if (r >= period || r < 0.0) r = 0.0;
    return r;
  }

  Vec2 wrap(const Vec2 &p) const { return {wrap_coord(p.x, width), wrap_coord(p.y, height)}; }

  /// Shortest periodic representative of a displacement.
  Vec2 minimal_image(const Vec2 &d) const {
    return {minimal_coord(d.x, width), minimal_coord(d.y, height)};
  }

  static double minimal_coord(double d, double period) {
    if (d >= -0.5 * period && d <= 0.5 * period) return d;
    return d - period * std::round(d / period);
  }

  double periodic_distance(const Vec2 &a, const Vec2 &b) const { return norm(minimal_image(a - b)); }

  friend constexpr bool operator==(const Domain &, const Domain &) = default;
};

struct Disc {
  Vec2 center;
  double radius = 0.0;

  /// Closed-disc membership under periodic wrap-around.
  bool contains(const Domain &domain, const Vec2 &p) const {
    return norm_sq(domain.minimal_image(p - center)) <= radius * radius;
  }
};

}  // namespace navdp
