#include "herdgen/background.hpp"

#include <algorithm>
#include <cmath>

#include "herdgen/rng.hpp"

namespace herdgen {

namespace {

BinaryMask hole_bitmap(const MaskedScene& scene) {
    BinaryMask holes(scene.background.width, scene.background.height);
    for (const AxisBox& box : scene.holes) {
        PixelWindow w = rasterize_box(box);
        for (int y = std::max(0, w.y0); y < std::min(holes.height, w.y1); ++y)
            for (int x = std::max(0, w.x0); x < std::min(holes.width, w.x1); ++x)
                holes.at(x, y) = 1;
    }
    return holes;
}

} // namespace

std::vector<std::vector<uint32_t>> find_connected_regions(const MaskedScene& scene) {
    return connected_components(hole_bitmap(scene));
}

FilledBackground fill_from_borders(const MaskedScene& scene,
                                   const std::vector<std::vector<uint32_t>>& regions,
                                   uint64_t seed, int border_width) {
    const int w = scene.background.width, h = scene.background.height;
    const int ch = scene.background.channels;
    BinaryMask holes = hole_bitmap(scene);

    FilledBackground out;
    out.image = scene.background;
    out.filled_regions = regions;
    out.source_image = scene.source_image;
    out.fill_seed = seed;

    for (size_t r = 0; r < regions.size(); ++r) {
        const auto& region = regions[r];
        // border set: non-hole pixels within Chebyshev distance border_width
        BinaryMask rmask(w, h);
        for (uint32_t idx : region) rmask.bits[idx] = 1;
        BinaryMask dilated = dilate_chebyshev(rmask, border_width);
        std::vector<uint32_t> border;
        for (size_t i = 0; i < dilated.bits.size(); ++i)
            if (dilated.bits[i] && !holes.bits[i]) border.push_back(static_cast<uint32_t>(i));
        if (border.empty()) throw NoBorderAvailable();

        Rng rng(mix_seed(seed, 0xf111u, r));
        for (uint32_t idx : region) {
            uint32_t src = border[rng.bounded(border.size())];
            for (int c = 0; c < ch; ++c)
                out.image.data[static_cast<size_t>(idx) * ch + c] =
                    scene.background.data[static_cast<size_t>(src) * ch + c];
        }
    }
    return out;
}

std::vector<double> gaussian_kernel(double sigma, int radius) {
    std::vector<double> k(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * double(i) * double(i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    return k;
}

FilledBackground blur_regions(const FilledBackground& bg, double sigma,
                              int kernel_radius) {
    if (!(sigma > 0)) throw Error("blur_regions: sigma must be positive");
    if (kernel_radius < static_cast<int>(std::ceil(3.0 * sigma)))
        throw Error("blur_regions: kernel_radius must be >= ceil(3*sigma)");

    const int w = bg.image.width, h = bg.image.height, ch = bg.image.channels;
    const int r = kernel_radius;
    const std::vector<double> kern = gaussian_kernel(sigma, r);

    FilledBackground out = bg;
    // The blur always reads bg.image, so overlapping dilated extents write
    // identical values and region order cannot matter.
    for (const auto& region : bg.filled_regions) {
        if (region.empty()) continue;
        int bx0 = w, by0 = h, bx1 = 0, by1 = 0;
        for (uint32_t idx : region) {
            int x = static_cast<int>(idx % w), y = static_cast<int>(idx / w);
            bx0 = std::min(bx0, x);
            by0 = std::min(by0, y);
            bx1 = std::max(bx1, x);
            by1 = std::max(by1, y);
        }
        // work window: region bbox grown by the dilation radius plus kernel support
        int wx0 = std::max(0, bx0 - 2 * r), wy0 = std::max(0, by0 - 2 * r);
        int wx1 = std::min(w - 1, bx1 + 2 * r), wy1 = std::min(h - 1, by1 + 2 * r);
        int ww = wx1 - wx0 + 1, wh = wy1 - wy0 + 1;

        BinaryMask rmask(ww, wh);
        for (uint32_t idx : region) {
            int x = static_cast<int>(idx % w), y = static_cast<int>(idx / w);
            rmask.at(x - wx0, y - wy0) = 1;
        }
        BinaryMask write_mask = dilate_chebyshev(rmask, r);

        // horizontal pass over the window, kernel renormalized at image edges
        std::vector<double> tmp(static_cast<size_t>(ww) * wh * ch, 0.0);
        for (int y = 0; y < wh; ++y) {
            for (int x = 0; x < ww; ++x) {
                int gx = wx0 + x, gy = wy0 + y;
                double acc[3] = {0, 0, 0}, wsum = 0;
                for (int k = -r; k <= r; ++k) {
                    int sx = gx + k;
                    if (sx < 0 || sx >= w) continue;
                    double kv = kern[k + r];
                    wsum += kv;
                    for (int c = 0; c < ch; ++c)
                        acc[c] += kv * bg.image.at(sx, gy, c);
                }
                for (int c = 0; c < ch; ++c)
                    tmp[(static_cast<size_t>(y) * ww + x) * ch + c] = acc[c] / wsum;
            }
        }
        // vertical pass; out-of-window rows fall back to the raw image row
        for (int y = 0; y < wh; ++y) {
            for (int x = 0; x < ww; ++x) {
                if (!write_mask.at(x, y)) continue;
                int gx = wx0 + x, gy = wy0 + y;
                for (int c = 0; c < ch; ++c) {
                    double acc = 0, wsum = 0;
                    for (int k = -r; k <= r; ++k) {
                        int sy = gy + k;
                        if (sy < 0 || sy >= h) continue;
                        double kv = kern[k + r];
                        wsum += kv;
                        int ly = sy - wy0;
                        double hv;
                        if (ly >= 0 && ly < wh) {
                            hv = tmp[(static_cast<size_t>(ly) * ww + x) * ch + c];
                        } else {
                            // horizontal blur computed on demand outside the window
                            double a = 0, s = 0;
                            for (int k2 = -r; k2 <= r; ++k2) {
                                int sx = gx + k2;
                                if (sx < 0 || sx >= w) continue;
                                a += kern[k2 + r] * bg.image.at(sx, sy, c);
                                s += kern[k2 + r];
                            }
                            hv = a / s;
                        }
                        acc += kv * hv;
                    }
                    long v = std::lround(acc / wsum);
                    out.image.at(gx, gy, c) = static_cast<uint8_t>(std::clamp(v, 0l, 255l));
                }
            }
        }
    }
    return out;
}

} // namespace herdgen
