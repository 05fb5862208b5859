#pragma once

#include <cstdint>

#include "herdgen/sprite.hpp"

namespace herdgen {

struct AngleOutOfRange : Error {
    explicit AngleOutOfRange(double deg)
        : Error("rotation " + std::to_string(deg) + " deg outside |10..20| or 0") {}
};

// Sampled pose/lighting recipe: flip, then contrast, then rotation.
struct AugmentationSpec {
    bool flip = false;
    double contrast_factor = 1.0;
    double rotation_deg = 0.0; // |deg| in [10,20] or exactly 0
    uint64_t seed = 0;
};

struct AugmentConfig {
    double contrast_min = 0.7;
    double contrast_max = 1.3;
    double rotation_min_deg = 10.0;
    double rotation_max_deg = 20.0;
    double p_flip = 0.5;
    double p_contrast = 1.0;
    double p_rotate = 1.0;
};

Sprite hflip(const Sprite& sprite);

// Contrast about the per-channel foreground mean; masked-out pixels and the
// mask itself are untouched.
Sprite adjust_contrast(const Sprite& sprite, double factor);

Sprite rotate_sprite(const Sprite& sprite, double degrees);

Sprite apply_spec(const Sprite& sprite, const AugmentationSpec& spec);

AugmentationSpec sample_spec(uint64_t seed, const AugmentConfig& cfg);

} // namespace herdgen
