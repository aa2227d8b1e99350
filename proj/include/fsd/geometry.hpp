#pragma once

#include <cmath>

namespace fsd {

struct Vec2 {
    double x{0.0};
    double y{0.0};

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    double squared_norm() const { return x * x + y * y; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

// Unit vector for a heading angle.
inline Vec2 heading_vec(double psi) { return {std::cos(psi), std::sin(psi)}; }

// Left normal of a direction vector (rotate +90 deg).
inline Vec2 left_normal(const Vec2& d) { return {-d.y, d.x}; }

inline Vec2 rotate(const Vec2& v, double psi) {
    const double c = std::cos(psi), s = std::sin(psi);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// World point into a body frame at (origin, psi).
inline Vec2 world_to_body(const Vec2& p, const Vec2& origin, double psi) {
    return rotate(p - origin, -psi);
}

inline Vec2 body_to_world(const Vec2& p, const Vec2& origin, double psi) {
    return rotate(p, psi) + origin;
}

// Normalize an angle to (-pi, pi].
inline double wrap_angle(double a) {
    const double two_pi = 2.0 * M_PI;
    a = std::fmod(a, two_pi);
    if (a <= -M_PI) a += two_pi;
    if (a > M_PI) a -= two_pi;
    return a;
}

struct Pose2 {
    Vec2 p;
    double psi{0.0};
};

}  // namespace fsd
