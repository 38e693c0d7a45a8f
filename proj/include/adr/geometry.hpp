#pragma once

#include <Eigen/Dense>

namespace adr {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Axis-aligned rectangle (x0,y0) x (x1,y1).
struct Rect {
    double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }
    bool contains(const Vec2& p, double tol = 1e-12) const {
        return p.x() >= x0 - tol && p.x() <= x1 + tol && p.y() >= y0 - tol &&
               p.y() <= y1 + tol;
    }
};

inline double cross2(const Vec2& a, const Vec2& b) {
    return a.x() * b.y() - a.y() * b.x();
}

/// Signed area of the triangle (a,b,c); positive for counterclockwise order.
inline double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
    return 0.5 * cross2(b - a, c - a);
}

} // namespace adr
