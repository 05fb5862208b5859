#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "herdgen/raster.hpp"

namespace herdgen {

struct EmptyMask : Error {
    EmptyMask() : Error("mask has no foreground pixels") {}
    explicit EmptyMask(const std::string& msg) : Error(msg) {}
};

struct Vec2 {
    double x = 0.0, y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

// Half-open axis-aligned box [x_min, x_max) x [y_min, y_max).
struct AxisBox {
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

    bool valid() const { return x_min < x_max && y_min < y_max; }
    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
};

// Rotated rectangle; angle in radians, normalized to (-pi/2, pi/2].
struct OrientedBox {
    double center_x = 0, center_y = 0;
    double width = 0, height = 0;
    double angle = 0;

    bool valid() const { return width > 0 && height > 0; }
    std::array<Vec2, 4> corners() const;
};

// 2x3 affine matrix [a b tx; c d ty] mapping (x,y) -> (a x + b y + tx, c x + d y + ty).
struct AffineTransform {
    double a = 1, b = 0, tx = 0;
    double c = 0, d = 1, ty = 0;

    double det() const { return a * d - b * c; }
    Vec2 apply(Vec2 p) const { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }
    AffineTransform inverse() const;

    static AffineTransform identity() { return {}; }
    static AffineTransform translation(double dx, double dy) { return {1, 0, dx, 0, 1, dy}; }
    static AffineTransform scaling(double sx, double sy) { return {sx, 0, 0, 0, sy, 0}; }
    static AffineTransform rotation(double radians);
    static AffineTransform hflip(double width); // mirror about x = width/2
    // t2 after t1
    static AffineTransform compose(const AffineTransform& t2, const AffineTransform& t1);
};

double iou_axis(const AxisBox& a, const AxisBox& b);

// Convex polygon intersection via Sutherland-Hodgman; clip must be convex.
std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip);
double polygon_area(const std::vector<Vec2>& poly);
double convex_poly_iou(const std::vector<Vec2>& a, const std::vector<Vec2>& b);

double iou_oriented(const OrientedBox& a, const OrientedBox& b);

// Minimal axis box containing all foreground pixels, half-open pixel bounds.
// Throws EmptyMask for an all-background mask.
AxisBox tight_box_from_mask(const BinaryMask& mask);

// Minimum-area rotated rectangle over the foreground pixel squares
// (rotating-calipers over the convex hull of the pixel corners).
OrientedBox min_area_rect_from_mask(const BinaryMask& mask);

std::vector<Vec2> convex_hull(std::vector<Vec2> pts);

} // namespace herdgen
