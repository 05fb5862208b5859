#include "herdgen/sprite.hpp"

#include <algorithm>
#include <cmath>

namespace herdgen {

PixelWindow rasterize_box(const AxisBox& box) {
    return {static_cast<int>(std::lround(box.x_min)), static_cast<int>(std::lround(box.y_min)),
            static_cast<int>(std::lround(box.x_max)), static_cast<int>(std::lround(box.y_max))};
}

std::pair<std::vector<Sprite>, MaskedScene> extract_sprites(const RasterImage& img,
                                                            const LabelSet& labels) {
    std::vector<Sprite> sprites;
    MaskedScene scene;
    scene.background = img;

    for (size_t i = 0; i < labels.labels.size(); ++i) {
        AxisBox box = labels.labels[i].bounding_axis();
        PixelWindow w = rasterize_box(box);
        if (w.x0 < 0 || w.y0 < 0 || w.x1 > img.width || w.y1 > img.height ||
            w.width() <= 0 || w.height() <= 0)
            throw BoxOutOfBounds(static_cast<int>(i),
                                 "box " + std::to_string(i) + " outside image bounds");

        Sprite s;
        s.source_index = static_cast<int>(i);
        s.source_box = box;
        s.patch = RasterImage(w.width(), w.height(), img.channels);
        s.mask = BinaryMask(w.width(), w.height(), 1);
        for (int y = 0; y < w.height(); ++y)
            for (int x = 0; x < w.width(); ++x)
                for (int c = 0; c < img.channels; ++c)
                    s.patch.at(x, y, c) = img.at(w.x0 + x, w.y0 + y, c);
        sprites.push_back(std::move(s));
        scene.holes.push_back(box);
    }

    // zero the union of the boxes; overlapping boxes zero each pixel once
    for (const AxisBox& box : scene.holes) {
        PixelWindow w = rasterize_box(box);
        for (int y = w.y0; y < w.y1; ++y)
            for (int x = w.x0; x < w.x1; ++x)
                for (int c = 0; c < img.channels; ++c)
                    scene.background.at(x, y, c) = 0;
    }
    return {std::move(sprites), std::move(scene)};
}

Sprite import_mask(const Sprite& sprite, const BinaryMask& mask,
                   int min_foreground_pixels) {
    if (mask.width != sprite.patch.width || mask.height != sprite.patch.height)
        throw MaskShapeError("mask " + std::to_string(mask.width) + "x" +
                             std::to_string(mask.height) + " does not match patch " +
                             std::to_string(sprite.patch.width) + "x" +
                             std::to_string(sprite.patch.height));
    if (mask.foreground_count() < static_cast<size_t>(min_foreground_pixels))
        throw MaskTooSmall("mask has " + std::to_string(mask.foreground_count()) +
                           " foreground pixels, need " +
                           std::to_string(min_foreground_pixels));
    Sprite out = sprite;
    out.mask = mask;
    return out;
}

namespace {

// Per-channel mean and covariance of the ring of pixels just inside the
// patch border. Falls back to floored per-channel variances when the
// covariance is degenerate.
struct ColorModel {
    double mean[3] = {0, 0, 0};
    double inv[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    int channels = 3;

    double mahalanobis2(const double* p) const {
        double d[3] = {0, 0, 0};
        for (int c = 0; c < channels; ++c) d[c] = p[c] - mean[c];
        double q = 0;
        for (int i = 0; i < channels; ++i)
            for (int j = 0; j < channels; ++j) q += d[i] * inv[i][j] * d[j];
        return q;
    }
};

ColorModel fit_border_model(const RasterImage& patch, int ring) {
    const int w = patch.width, h = patch.height, ch = patch.channels;
    ColorModel m;
    m.channels = ch;
    double sum[3] = {0, 0, 0};
    double cov[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    size_t n = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            bool in_ring = x < ring || y < ring || x >= w - ring || y >= h - ring;
            if (!in_ring) continue;
            for (int c = 0; c < ch; ++c) sum[c] += patch.at(x, y, c);
            ++n;
        }
    }
    for (int c = 0; c < ch; ++c) m.mean[c] = sum[c] / double(n);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            bool in_ring = x < ring || y < ring || x >= w - ring || y >= h - ring;
            if (!in_ring) continue;
            double d[3];
            for (int c = 0; c < ch; ++c) d[c] = patch.at(x, y, c) - m.mean[c];
            for (int i = 0; i < ch; ++i)
                for (int j = 0; j < ch; ++j) cov[i][j] += d[i] * d[j];
        }
    }
    for (int i = 0; i < ch; ++i)
        for (int j = 0; j < ch; ++j) cov[i][j] /= double(n);

    // invert; 1x1 and 3x3 are the only channel counts here
    if (ch == 1) {
        double v = std::max(cov[0][0], 1.0);
        m.inv[0][0] = 1.0 / v;
        return m;
    }
    double det = cov[0][0] * (cov[1][1] * cov[2][2] - cov[1][2] * cov[2][1]) -
                 cov[0][1] * (cov[1][0] * cov[2][2] - cov[1][2] * cov[2][0]) +
                 cov[0][2] * (cov[1][0] * cov[2][1] - cov[1][1] * cov[2][0]);
    if (std::fabs(det) < 1e-6) {
        // degenerate: diagonal model with variance floor 1.0
        for (int c = 0; c < ch; ++c) m.inv[c][c] = 1.0 / std::max(cov[c][c], 1.0);
        return m;
    }
    double adj[3][3];
    adj[0][0] = cov[1][1] * cov[2][2] - cov[1][2] * cov[2][1];
    adj[0][1] = cov[0][2] * cov[2][1] - cov[0][1] * cov[2][2];
    adj[0][2] = cov[0][1] * cov[1][2] - cov[0][2] * cov[1][1];
    adj[1][0] = cov[1][2] * cov[2][0] - cov[1][0] * cov[2][2];
    adj[1][1] = cov[0][0] * cov[2][2] - cov[0][2] * cov[2][0];
    adj[1][2] = cov[0][2] * cov[1][0] - cov[0][0] * cov[1][2];
    adj[2][0] = cov[1][0] * cov[2][1] - cov[1][1] * cov[2][0];
    adj[2][1] = cov[0][1] * cov[2][0] - cov[0][0] * cov[2][1];
    adj[2][2] = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m.inv[i][j] = adj[i][j] / det;
    return m;
}

BinaryMask cleanup_mask(BinaryMask fg) {
    fg = open3x3(fg);
    fg = close3x3(fg);
    return largest_component(fg);
}

} // namespace

Sprite baseline_segment(const Sprite& sprite, int border_ring, double tau,
                        int min_foreground_pixels) {
    const RasterImage& patch = sprite.patch;
    int min_dim = std::min(patch.width, patch.height);
    if (border_ring < 1 || border_ring >= (min_dim + 1) / 2)
        throw Error("baseline_segment: border_ring " + std::to_string(border_ring) +
                    " invalid for " + std::to_string(patch.width) + "x" +
                    std::to_string(patch.height) + " patch");

    ColorModel model = fit_border_model(patch, border_ring);
    BinaryMask fg(patch.width, patch.height);
    const double tau2 = tau * tau;
    for (int y = 0; y < patch.height; ++y) {
        for (int x = 0; x < patch.width; ++x) {
            double p[3] = {0, 0, 0};
            for (int c = 0; c < patch.channels; ++c) p[c] = patch.at(x, y, c);
            fg.at(x, y) = model.mahalanobis2(p) > tau2 ? 1 : 0;
        }
    }
    fg = cleanup_mask(fg);
    if (fg.foreground_count() == 0) throw SegmentationEmpty();

    Sprite out = sprite;
    out.mask = fg;
    if (fg.foreground_count() < static_cast<size_t>(min_foreground_pixels))
        throw MaskTooSmall("segmented mask has " +
                           std::to_string(fg.foreground_count()) + " foreground pixels");
    return out;
}

BinaryMask luminance_segment(const RasterImage& patch, int border_ring,
                             double threshold) {
    const int w = patch.width, h = patch.height;
    auto luminance = [&](int x, int y) {
        if (patch.channels == 1) return double(patch.at(x, y, 0));
        return 0.299 * patch.at(x, y, 0) + 0.587 * patch.at(x, y, 1) +
               0.114 * patch.at(x, y, 2);
    };
    double sum = 0;
    size_t n = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            bool in_ring =
                x < border_ring || y < border_ring || x >= w - border_ring || y >= h - border_ring;
            if (!in_ring) continue;
            sum += luminance(x, y);
            ++n;
        }
    }
    double mean = sum / double(n);
    BinaryMask fg(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            fg.at(x, y) = std::fabs(luminance(x, y) - mean) > threshold ? 1 : 0;
    return cleanup_mask(fg);
}

} // namespace herdgen
