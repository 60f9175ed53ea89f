#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace quadforge {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
    constexpr bool operator==(const Vec2& o) const = default;
};

constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
constexpr double norm2(const Vec2& a) { return a.x * a.x + a.y * a.y; }
inline double distance(const Vec2& a, const Vec2& b) { return norm(a - b); }

// Counter-clockwise rotation by a quarter turn (n x v for n the plane normal).
constexpr Vec2 perp(const Vec2& v) { return {-v.y, v.x}; }

inline Vec2 normalized(const Vec2& v) {
    const double n = norm(v);
    return n > 0.0 ? v / n : Vec2{};
}

inline Vec2 from_angle(double a) { return {std::cos(a), std::sin(a)}; }
inline double angle_of(const Vec2& v) { return std::atan2(v.y, v.x); }

// Twice the signed area of (a, b, c); positive when counter-clockwise.
constexpr double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
    return cross(b - a, c - a);
}

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kHalfPi = 0.5 * std::numbers::pi;

// Maps an angle to (-pi, pi].
inline double principal_angle(double a) {
    double r = std::remainder(a, kTwoPi);
    if (r <= -kPi) r += kTwoPi;
    return r;
}

// Signed distance from a to the nearest multiple of `period`.
inline double mod_distance(double a, double period) {
    return a - period * std::round(a / period);
}

struct BBox {
    Vec2 lo{1e300, 1e300};
    Vec2 hi{-1e300, -1e300};

    void expand(const Vec2& p) {
        lo.x = std::min(lo.x, p.x); lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x); hi.y = std::max(hi.y, p.y);
    }
    double diagonal() const { return norm(hi - lo); }
    bool contains(const Vec2& p, double eps = 0.0) const {
        return p.x >= lo.x - eps && p.x <= hi.x + eps && p.y >= lo.y - eps && p.y <= hi.y + eps;
    }
    bool overlaps(const BBox& o, double eps = 0.0) const {
        return !(o.lo.x > hi.x + eps || o.hi.x < lo.x - eps || o.lo.y > hi.y + eps || o.hi.y < lo.y - eps);
    }
};

// Parameters (s, t) of the proper intersection a + s(b-a) = c + t(d-c); false if parallel.
inline bool segment_intersection(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d,
                                 double& s, double& t) {
    const Vec2 r = b - a;
    const Vec2 q = d - c;
    const double den = cross(r, q);
    if (den == 0.0) return false;
    s = cross(c - a, q) / den;
    t = cross(c - a, r) / den;
    return true;
}

inline Vec2 closest_point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double l2 = norm2(ab);
    if (l2 == 0.0) return a;
    double t = dot(p - a, ab) / l2;
    t = std::clamp(t, 0.0, 1.0);
    return a + ab * t;
}

}  // namespace quadforge
