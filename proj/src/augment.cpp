#include "herdgen/augment.hpp"

#include <algorithm>
#include <cmath>

#include "herdgen/rng.hpp"
#include "herdgen/warp.hpp"

namespace herdgen {

Sprite hflip(const Sprite& sprite) {
    Sprite out = sprite;
    const int w = sprite.patch.width, h = sprite.patch.height, ch = sprite.patch.channels;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c)
                out.patch.at(w - 1 - x, y, c) = sprite.patch.at(x, y, c);
            out.mask.at(w - 1 - x, y) = sprite.mask.at(x, y);
        }
    }
    out.transform_log.push_back({"hflip", 1.0});
    return out;
}

Sprite adjust_contrast(const Sprite& sprite, double factor) {
    if (!(factor > 0) && factor != 0.0) throw Error("adjust_contrast: factor must be >= 0");
    Sprite out = sprite;
    const int w = sprite.patch.width, h = sprite.patch.height, ch = sprite.patch.channels;
    double mean[3] = {0, 0, 0};
    size_t n = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (sprite.mask.at(x, y)) {
                for (int c = 0; c < ch; ++c) mean[c] += sprite.patch.at(x, y, c);
                ++n;
            }
    if (n == 0) return out; // nothing to adjust
    for (int c = 0; c < ch; ++c) mean[c] /= double(n);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (sprite.mask.at(x, y))
                for (int c = 0; c < ch; ++c) {
                    double v = mean[c] + factor * (sprite.patch.at(x, y, c) - mean[c]);
                    out.patch.at(x, y, c) =
                        static_cast<uint8_t>(std::clamp(std::lround(v), 0l, 255l));
                }
    out.transform_log.push_back({"contrast", factor});
    return out;
}

Sprite rotate_sprite(const Sprite& sprite, double degrees) {
    double mag = std::fabs(degrees);
    if (degrees != 0.0 && (mag < 10.0 || mag > 20.0)) throw AngleOutOfRange(degrees);
    if (degrees == 0.0) return sprite;

    const double rad = degrees * 3.141592653589793 / 180.0;
    const double cx = sprite.patch.width / 2.0, cy = sprite.patch.height / 2.0;
    AffineTransform t = AffineTransform::compose(
        AffineTransform::compose(AffineTransform::translation(cx, cy),
                                 AffineTransform::rotation(rad)),
        AffineTransform::translation(-cx, -cy));
    WarpResult res = warp_raster(sprite.patch, sprite.mask, t);
    Sprite out = sprite;
    out.patch = std::move(res.image);
    out.mask = std::move(res.mask);
    out.transform_log.push_back({"rotate", degrees});
    return out;
}

Sprite apply_spec(const Sprite& sprite, const AugmentationSpec& spec) {
    Sprite out = sprite;
    if (spec.flip) out = hflip(out);
    if (spec.contrast_factor != 1.0) out = adjust_contrast(out, spec.contrast_factor);
    if (spec.rotation_deg != 0.0) out = rotate_sprite(out, spec.rotation_deg);
    return out;
}

AugmentationSpec sample_spec(uint64_t seed, const AugmentConfig& cfg) {
    Rng rng(mix_seed(seed, 0xa09u));
    AugmentationSpec spec;
    spec.seed = seed;
    spec.flip = rng.coin(cfg.p_flip);
    spec.contrast_factor =
        rng.coin(cfg.p_contrast) ? rng.uniform(cfg.contrast_min, cfg.contrast_max) : 1.0;
    if (rng.coin(cfg.p_rotate)) {
        double mag = rng.uniform(cfg.rotation_min_deg, cfg.rotation_max_deg);
        spec.rotation_deg = rng.coin(0.5) ? mag : -mag;
    }
    return spec;
}

} // namespace herdgen
