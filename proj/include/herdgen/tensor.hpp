#pragma once

#include <vector>

#include "herdgen/sprite.hpp"

namespace herdgen {

struct SpriteRejected : Error {
    explicit SpriteRejected(const std::string& msg) : Error(msg) {}
};

// Channel-major double tensor, values nominally in [-1, 1] for sprite data.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(size_t(c_) * h_ * w_, 0.0) {}

    double& at(int ci, int y, int x) { return v[(size_t(ci) * h + y) * w + x]; }
    double at(int ci, int y, int x) const { return v[(size_t(ci) * h + y) * w + x]; }
    size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

// Letterboxes the masked sprite (background composited to mid-gray) onto an
// R x R canvas and normalizes to [-1, 1].
Tensor sprite_to_tensor(const Sprite& sprite, int resolution);

struct TensorToSpriteOptions {
    int border_ring = 2;
    double luminance_threshold = 25.0; // 8-bit levels
    int min_foreground_pixels = kDefaultMinForegroundPixels;
};

// Maps [-1,1] back to 8-bit and derives a foreground mask from luminance
// deviation against the border ring. Throws SpriteRejected when no usable
// foreground remains.
Sprite tensor_to_sprite(const Tensor& x, const TensorToSpriteOptions& opt = {});

} // namespace herdgen
