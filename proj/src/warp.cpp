#include "herdgen/warp.hpp"

#include <algorithm>
#include <cmath>

namespace herdgen {

namespace {

WarpResult warp_common(const RasterImage& img, const BinaryMask& mask,
                       const AffineTransform& t, int out_w, int out_h) {
    if (img.width != mask.width || img.height != mask.height)
        throw Error("warp_raster: image and mask dimensions disagree");
    AffineTransform inv = t.inverse(); // throws on singular transform

    WarpResult res;
    res.image = RasterImage(out_w, out_h, img.channels, 0);
    res.mask = BinaryMask(out_w, out_h, 0);
    const int ch = img.channels;

    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            Vec2 s = inv.apply({x + 0.5, y + 0.5});
            // bilinear in pixel-center coordinates
            double sx = s.x - 0.5, sy = s.y - 0.5;
            int x0 = static_cast<int>(std::floor(sx));
            int y0 = static_cast<int>(std::floor(sy));
            double fx = sx - x0, fy = sy - y0;
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int dy = 0; dy <= 1; ++dy) {
                    for (int dx = 0; dx <= 1; ++dx) {
                        int px = x0 + dx, py = y0 + dy;
                        if (!img.in_bounds(px, py)) continue;
                        double wgt = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
                        acc += wgt * img.at(px, py, c);
                    }
                }
                long v = std::lround(acc);
                res.image.at(x, y, c) = static_cast<uint8_t>(std::clamp(v, 0l, 255l));
            }
            // nearest-neighbor for the mask, thresholded to {0,1}
            int nx = static_cast<int>(std::floor(s.x));
            int ny = static_cast<int>(std::floor(s.y));
            res.mask.at(x, y) = mask.in_bounds(nx, ny) && mask.at(nx, ny) ? 1 : 0;
        }
    }
    return res;
}

} // namespace

WarpResult warp_raster(const RasterImage& img, const BinaryMask& mask,
                       const AffineTransform& t) {
    const double w = img.width, h = img.height;
    const Vec2 corners[4] = {{0, 0}, {w, 0}, {w, h}, {0, h}};
    double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
    for (const Vec2& c : corners) {
        Vec2 p = t.apply(c);
        min_x = std::min(min_x, p.x);
        min_y = std::min(min_y, p.y);
        max_x = std::max(max_x, p.x);
        max_y = std::max(max_y, p.y);
    }
    int out_w = std::max(1, static_cast<int>(std::ceil(max_x - min_x - 1e-9)));
    int out_h = std::max(1, static_cast<int>(std::ceil(max_y - min_y - 1e-9)));
    AffineTransform shifted = AffineTransform::compose(
        AffineTransform::translation(-min_x, -min_y), t);
    WarpResult res = warp_common(img, mask, shifted, out_w, out_h);
    res.offset_x = -min_x;
    res.offset_y = -min_y;
    return res;
}

WarpResult warp_raster_onto(const RasterImage& img, const BinaryMask& mask,
                            const AffineTransform& t, int out_w, int out_h) {
    return warp_common(img, mask, t, out_w, out_h);
}

} // namespace herdgen
