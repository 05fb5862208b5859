#include "herdgen/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "herdgen/warp.hpp"

namespace herdgen {

namespace {

constexpr uint8_t kMidGray = 128;

RasterImage composite_on_gray(const Sprite& sprite) {
    RasterImage out(sprite.patch.width, sprite.patch.height, 3);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            bool fg = sprite.mask.at(x, y);
            for (int c = 0; c < 3; ++c) {
                out.at(x, y, c) = fg ? sprite.patch.at(x, y, c) : kMidGray;
            }
        }
    }
    return out;
}

} // namespace

Tensor sprite_to_tensor(const Sprite& sprite, int resolution) {
    if (resolution <= 0) throw Error("tensor resolution must be positive");
    if (sprite.patch.channels != 3) throw Error("sprite patch must be RGB");
    if (sprite.patch.width <= 0 || sprite.patch.height <= 0)
        throw Error("empty sprite patch");

    const RasterImage gray_patch = composite_on_gray(sprite);

    const double s = double(resolution) /
                     double(std::max(sprite.patch.width, sprite.patch.height));
    const double ox = (resolution - sprite.patch.width * s) / 2.0;
    const double oy = (resolution - sprite.patch.height * s) / 2.0;
    const AffineTransform t = AffineTransform::compose(
        AffineTransform::translation(ox, oy), AffineTransform::scaling(s, s));

    const WarpResult wr =
        warp_raster_onto(gray_patch, sprite.mask, t, resolution, resolution);

    Tensor out(3, resolution, resolution);
    for (int y = 0; y < resolution; ++y) {
        for (int x = 0; x < resolution; ++x) {
            for (int c = 0; c < 3; ++c) {
                uint8_t px = wr.mask.at(x, y) ? wr.image.at(x, y, c) : kMidGray;
                out.at(c, y, x) = px / 127.5 - 1.0;
            }
        }
    }
    return out;
}

Sprite tensor_to_sprite(const Tensor& x, const TensorToSpriteOptions& opt) {
    if (x.c != 3) throw Error("tensor must have 3 channels");
    if (x.h <= 0 || x.w <= 0) throw Error("empty tensor");
    if (opt.border_ring < 1 || 2 * opt.border_ring >= std::min(x.h, x.w))
        throw Error("border ring does not fit tensor");

    RasterImage img(x.w, x.h, 3);
    for (int y = 0; y < x.h; ++y) {
        for (int xx = 0; xx < x.w; ++xx) {
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(x.at(c, y, xx), -1.0, 1.0);
                img.at(xx, y, c) = uint8_t(std::lround((v + 1.0) * 127.5));
            }
        }
    }

    BinaryMask fg = luminance_segment(img, opt.border_ring, opt.luminance_threshold);
    if (fg.foreground_count() == 0)
        throw SpriteRejected("no foreground after segmentation");
    if (fg.foreground_count() < size_t(opt.min_foreground_pixels))
        throw SpriteRejected("foreground below minimum pixel count");

    int min_x = x.w, min_y = x.h, max_x = -1, max_y = -1;
    for (int y = 0; y < x.h; ++y) {
        for (int xx = 0; xx < x.w; ++xx) {
            if (!fg.at(xx, y)) continue;
            min_x = std::min(min_x, xx);
            min_y = std::min(min_y, y);
            max_x = std::max(max_x, xx);
            max_y = std::max(max_y, y);
        }
    }

    Sprite out;
    out.patch = RasterImage(max_x - min_x + 1, max_y - min_y + 1, 3);
    out.mask = BinaryMask(out.patch.width, out.patch.height);
    for (int y = 0; y < out.patch.height; ++y) {
        for (int xx = 0; xx < out.patch.width; ++xx) {
            out.mask.at(xx, y) = fg.at(min_x + xx, min_y + y);
            for (int c = 0; c < 3; ++c)
                out.patch.at(xx, y, c) = img.at(min_x + xx, min_y + y, c);
        }
    }
    out.source_image = "diffusion";
    out.source_index = 0;
    out.source_box = AxisBox{double(min_x), double(min_y), double(max_x + 1), double(max_y + 1)};
    out.transform_log.push_back({"diffusion_sample", 0.0});
    return out;
}

} // namespace herdgen
