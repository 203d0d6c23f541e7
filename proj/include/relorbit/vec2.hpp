#pragma once

#include <array>
#include <cmath>

namespace relorbit {

using Vec2 = std::array<double, 2>;

constexpr Vec2 operator+(const Vec2& a, const Vec2& b) { return {a[0] + b[0], a[1] + b[1]}; }
constexpr Vec2 operator-(const Vec2& a, const Vec2& b) { return {a[0] - b[0], a[1] - b[1]}; }
constexpr Vec2 operator*(double s, const Vec2& a) { return {s * a[0], s * a[1]}; }
constexpr Vec2 operator*(const Vec2& a, double s) { return {s * a[0], s * a[1]}; }

constexpr double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }
// Third component of the 3D cross product of two planar vectors.
constexpr double cross(const Vec2& a, const Vec2& b) { return a[0] * b[1] - a[1] * b[0]; }
inline double norm(const Vec2& a) { return std::hypot(a[0], a[1]); }
constexpr double norm2(const Vec2& a) { return dot(a, a); }
// Counter-clockwise rotation by a right angle.
constexpr Vec2 perp(const Vec2& a) { return {-a[1], a[0]}; }

}  // namespace relorbit
