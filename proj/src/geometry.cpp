#include "herdgen/geometry.hpp"

#include <algorithm>
#include <limits>

namespace herdgen {

std::array<Vec2, 4> OrientedBox::corners() const {
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double hw = width / 2.0, hh = height / 2.0;
    // local frame order: (-,-), (+,-), (+,+), (-,+)
    const std::array<Vec2, 4> local = {Vec2{-hw, -hh}, Vec2{hw, -hh}, Vec2{hw, hh}, Vec2{-hw, hh}};
    std::array<Vec2, 4> out;
    for (int i = 0; i < 4; ++i) {
        out[i] = {center_x + ca * local[i].x - sa * local[i].y,
                  center_y + sa * local[i].x + ca * local[i].y};
    }
    return out;
}

AffineTransform AffineTransform::inverse() const {
    double dt = det();
    if (std::fabs(dt) < 1e-300) throw Error("AffineTransform: singular matrix");
    double ia = d / dt, ib = -b / dt, ic = -c / dt, id = a / dt;
    return {ia, ib, -(ia * tx + ib * ty), ic, id, -(ic * tx + id * ty)};
}

AffineTransform AffineTransform::rotation(double radians) {
    double ca = std::cos(radians), sa = std::sin(radians);
    return {ca, -sa, 0, sa, ca, 0};
}

AffineTransform AffineTransform::hflip(double width) {
    return {-1, 0, width, 0, 1, 0};
}

AffineTransform AffineTransform::compose(const AffineTransform& t2, const AffineTransform& t1) {
    return {t2.a * t1.a + t2.b * t1.c,
            t2.a * t1.b + t2.b * t1.d,
            t2.a * t1.tx + t2.b * t1.ty + t2.tx,
            t2.c * t1.a + t2.d * t1.c,
            t2.c * t1.b + t2.d * t1.d,
            t2.c * t1.tx + t2.d * t1.ty + t2.ty};
}

double iou_axis(const AxisBox& a, const AxisBox& b) {
    double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (ix <= 0 || iy <= 0) return 0.0;
    double inter = ix * iy;
    double uni = a.area() + b.area() - inter;
    return inter / uni;
}

std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip) {
    std::vector<Vec2> out = subject;
    const size_t m = clip.size();
    // orientation of the clip polygon decides which half-plane is "inside"
    double orient = polygon_area(clip) >= 0 ? 1.0 : -1.0;
    for (size_t e = 0; e < m && !out.empty(); ++e) {
        Vec2 c1 = clip[e], c2 = clip[(e + 1) % m];
        std::vector<Vec2> in;
        in.swap(out);
        const size_t n = in.size();
        for (size_t v = 0; v < n; ++v) {
            Vec2 p = in[v], q = in[(v + 1) % n];
            double sp = orient * cross(c2 - c1, p - c1);
            double sq = orient * cross(c2 - c1, q - c1);
            bool pin = sp >= 0, qin = sq >= 0;
            if (pin) out.push_back(p);
            if (pin != qin) {
                double t = sp / (sp - sq);
                out.push_back(p + t * (q - p));
            }
        }
    }
    return out;
}

double polygon_area(const std::vector<Vec2>& poly) {
    double s = 0.0;
    const size_t n = poly.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        s += cross(p, q);
    }
    return s / 2.0;
}

double convex_poly_iou(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
    double aa = std::fabs(polygon_area(a));
    double ab = std::fabs(polygon_area(b));
    if (aa <= 0 || ab <= 0) return 0.0;
    auto inter = clip_convex(a, b);
    double ai = inter.size() >= 3 ? std::fabs(polygon_area(inter)) : 0.0;
    double uni = aa + ab - ai;
    return uni > 0 ? ai / uni : 0.0;
}

double iou_oriented(const OrientedBox& a, const OrientedBox& b) {
    auto ca = a.corners();
    auto cb = b.corners();
    return convex_poly_iou(std::vector<Vec2>(ca.begin(), ca.end()),
                           std::vector<Vec2>(cb.begin(), cb.end()));
}

AxisBox tight_box_from_mask(const BinaryMask& mask) {
    int min_x = mask.width, min_y = mask.height, max_x = -1, max_y = -1;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.at(x, y)) continue;
            min_x = std::min(min_x, x);
            min_y = std::min(min_y, y);
            max_x = std::max(max_x, x);
            max_y = std::max(max_y, y);
        }
    }
    if (max_x < 0) throw EmptyMask();
    return {static_cast<double>(min_x), static_cast<double>(min_y),
            static_cast<double>(max_x + 1), static_cast<double>(max_y + 1)};
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    const size_t n = pts.size();
    if (n <= 2) return pts;
    std::vector<Vec2> hull(2 * n);
    size_t k = 0;
    for (size_t i = 0; i < n; ++i) { // lower
        while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (size_t i = n - 1, t = k + 1; i-- > 0;) { // upper
        while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

OrientedBox min_area_rect_from_mask(const BinaryMask& mask) {
    // Hull over the corners of row-extremal pixels; interior pixels never
    // contribute hull vertices.
    std::vector<Vec2> pts;
    bool any = false;
    for (int y = 0; y < mask.height; ++y) {
        int lo = -1, hi = -1;
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(x, y)) {
                if (lo < 0) lo = x;
                hi = x;
            }
        }
        if (lo < 0) continue;
        any = true;
        for (int x : {lo, hi}) {
            pts.push_back({double(x), double(y)});
            pts.push_back({double(x + 1), double(y)});
            pts.push_back({double(x), double(y + 1)});
            pts.push_back({double(x + 1), double(y + 1)});
        }
    }
    if (!any) throw EmptyMask();
    auto hull = convex_hull(pts);
    if (hull.size() == 1) {
        return {hull[0].x, hull[0].y, 1e-9, 1e-9, 0.0};
    }
    if (hull.size() == 2) {
        Vec2 d = hull[1] - hull[0];
        double len = std::sqrt(dot(d, d));
        double ang = std::atan2(d.y, d.x);
        OrientedBox ob{(hull[0].x + hull[1].x) / 2, (hull[0].y + hull[1].y) / 2, len, 1e-9, ang};
        while (ob.angle > 1.5707963267948966) ob.angle -= 3.141592653589793;
        while (ob.angle <= -1.5707963267948966) ob.angle += 3.141592653589793;
        return ob;
    }

    double best_area = std::numeric_limits<double>::infinity();
    OrientedBox best;
    const size_t n = hull.size();
    for (size_t i = 0; i < n; ++i) {
        Vec2 e = hull[(i + 1) % n] - hull[i];
        double len = std::sqrt(dot(e, e));
        if (len <= 0) continue;
        Vec2 u{e.x / len, e.y / len};
        Vec2 v{-u.y, u.x};
        double umin = std::numeric_limits<double>::infinity(), umax = -umin;
        double vmin = umin, vmax = -umin;
        for (const Vec2& p : hull) {
            double pu = dot(p, u), pv = dot(p, v);
            umin = std::min(umin, pu);
            umax = std::max(umax, pu);
            vmin = std::min(vmin, pv);
            vmax = std::max(vmax, pv);
        }
        double area = (umax - umin) * (vmax - vmin);
        if (area < best_area) {
            best_area = area;
            double cu = (umin + umax) / 2, cv = (vmin + vmax) / 2;
            best.center_x = cu * u.x + cv * v.x;
            best.center_y = cu * u.y + cv * v.y;
            best.width = umax - umin;
            best.height = vmax - vmin;
            best.angle = std::atan2(u.y, u.x);
        }
    }
    // normalize angle into (-pi/2, pi/2]; a pi flip leaves the rectangle intact
    while (best.angle > 1.5707963267948966) best.angle -= 3.141592653589793;
    while (best.angle <= -1.5707963267948966) best.angle += 3.141592653589793;
    return best;
}

} // namespace herdgen
