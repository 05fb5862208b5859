#include <cmath>

#include <doctest.h>

#include "herdgen/augment.hpp"
#include "herdgen/rng.hpp"

using namespace herdgen;

namespace {

Sprite blob_sprite(int w, int h, uint64_t seed) {
    Sprite s;
    s.patch = RasterImage(w, h, 3, 190);
    s.mask = BinaryMask(w, h);
    const double cx = w / 2.0, cy = h / 2.0;
    Rng rng(seed);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double dx = (x + 0.5 - cx) / (w * 0.33), dy = (y + 0.5 - cy) / (h * 0.33);
            if (dx * dx + dy * dy <= 1.0) {
                s.mask.at(x, y) = 1;
                for (int c = 0; c < 3; ++c)
                    s.patch.at(x, y, c) = uint8_t(60 + rng.bounded(60));
            }
        }
    s.source_image = "test";
    return s;
}

} // namespace

TEST_CASE("hflip is an involution and mirrors pixels") {
    const Sprite s = blob_sprite(21, 15, 1);
    const Sprite f = hflip(s);
    CHECK(f.mask.foreground_count() == s.mask.foreground_count());
    for (int y = 0; y < 15; ++y)
        for (int x = 0; x < 21; ++x) {
            CHECK(f.mask.at(20 - x, y) == s.mask.at(x, y));
            for (int c = 0; c < 3; ++c) CHECK(f.patch.at(20 - x, y, c) == s.patch.at(x, y, c));
        }
    const Sprite ff = hflip(f);
    CHECK(ff.patch == s.patch);
    CHECK(ff.mask == s.mask);
}

TEST_CASE("adjust_contrast stated cases") {
    Sprite s = blob_sprite(20, 20, 2);

    const Sprite same = adjust_contrast(s, 1.0);
    CHECK(same.patch == s.patch);
    CHECK(same.mask == s.mask);

    // direct formula: p=100, mu=128, factor 1.5 -> 86
    Sprite flat;
    flat.patch = RasterImage(4, 1, 3, 0);
    flat.mask = BinaryMask(4, 1, 1);
    // foreground values 100,156,100,156 -> mu=128 per channel
    for (int x = 0; x < 4; ++x)
        for (int c = 0; c < 3; ++c) flat.patch.at(x, 0, c) = (x % 2 == 0) ? 100 : 156;
    const Sprite adj = adjust_contrast(flat, 1.5);
    CHECK(adj.patch.at(0, 0, 0) == 86);
    CHECK(adj.patch.at(1, 0, 0) == 170);

    // factor 0 -> every foreground pixel equals the rounded channel mean
    const Sprite zero = adjust_contrast(flat, 0.0);
    for (int x = 0; x < 4; ++x) CHECK(zero.patch.at(x, 0, 0) == 128);
}

TEST_CASE("adjust_contrast leaves background pixels and mask alone") {
    const Sprite s = blob_sprite(24, 24, 3);
    const Sprite adj = adjust_contrast(s, 1.3);
    CHECK(adj.mask == s.mask);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x)
            if (!s.mask.at(x, y))
                for (int c = 0; c < 3; ++c) CHECK(adj.patch.at(x, y, c) == s.patch.at(x, y, c));
}

TEST_CASE("rotate_sprite bounds and round trip") {
    const Sprite s = blob_sprite(30, 22, 4);
    CHECK_THROWS_AS(rotate_sprite(s, 25.0), AngleOutOfRange);
    CHECK_THROWS_AS(rotate_sprite(s, 9.99), AngleOutOfRange);
    CHECK_THROWS_AS(rotate_sprite(s, -21.0), AngleOutOfRange);

    const Sprite zero = rotate_sprite(s, 0.0);
    CHECK(zero.patch == s.patch);

    const double before = double(s.mask.foreground_count());
    const Sprite r = rotate_sprite(s, 15.0);
    CHECK(std::abs(double(r.mask.foreground_count()) - before) / before <= 0.02);

    // 15 then -15: compare against original in the common centered frame.
    // Each pass resamples the mask, flipping boundary pixels, so agreement
    // scales with the perimeter/area ratio of the sprite.
    const auto round_trip_iou = [](const Sprite& base) {
        const Sprite rr = rotate_sprite(rotate_sprite(base, 15.0), -15.0);
        long inter = 0, uni = 0;
        const int ox = (rr.mask.width - base.mask.width) / 2;
        const int oy = (rr.mask.height - base.mask.height) / 2;
        for (int y = 0; y < rr.mask.height; ++y)
            for (int x = 0; x < rr.mask.width; ++x) {
                const int sx = x - ox, sy = y - oy;
                const bool a = rr.mask.at(x, y) != 0;
                const bool b = sx >= 0 && sx < base.mask.width && sy >= 0 &&
                               sy < base.mask.height && base.mask.at(sx, sy) != 0;
                inter += a && b;
                uni += a || b;
            }
        return double(inter) / double(uni);
    };
    CHECK(round_trip_iou(s) >= 0.85);
    CHECK(round_trip_iou(blob_sprite(120, 88, 4)) >= 0.95);
}

TEST_CASE("apply_spec composes flip, contrast, rotation in order") {
    const Sprite s = blob_sprite(26, 18, 5);

    AugmentationSpec id;
    const Sprite same = apply_spec(s, id);
    CHECK(same.patch == s.patch);
    CHECK(same.mask == s.mask);

    AugmentationSpec spec;
    spec.flip = true;
    spec.contrast_factor = 1.2;
    spec.rotation_deg = 12.0;
    const Sprite a = apply_spec(s, spec);
    const Sprite b = apply_spec(s, spec);
    CHECK(a.patch == b.patch);
    CHECK(a.mask == b.mask);

    const Sprite manual = rotate_sprite(adjust_contrast(hflip(s), 1.2), 12.0);
    CHECK(a.patch == manual.patch);
    CHECK(a.mask == manual.mask);

    // transform_log carries the two geometric entries in order
    int flips = 0, rotates = 0;
    bool flip_before_rotate = false;
    for (size_t i = 0; i < a.transform_log.size(); ++i) {
        if (a.transform_log[i].kind == "hflip") flips++;
        if (a.transform_log[i].kind == "rotate") {
            rotates++;
            for (size_t j = 0; j < i; ++j)
                if (a.transform_log[j].kind == "hflip") flip_before_rotate = true;
        }
    }
    CHECK(flips == 1);
    CHECK(rotates == 1);
    CHECK(flip_before_rotate);
}

TEST_CASE("sample_spec respects configured ranges and is deterministic") {
    AugmentConfig cfg;
    for (uint64_t seed = 0; seed < 300; ++seed) {
        const AugmentationSpec spec = sample_spec(seed, cfg);
        CHECK(spec.contrast_factor >= cfg.contrast_min);
        CHECK(spec.contrast_factor <= cfg.contrast_max);
        const double a = std::abs(spec.rotation_deg);
        CHECK((a == 0.0 || (a >= 10.0 && a <= 20.0)));
        const AugmentationSpec again = sample_spec(seed, cfg);
        CHECK(again.flip == spec.flip);
        CHECK(again.contrast_factor == spec.contrast_factor);
        CHECK(again.rotation_deg == spec.rotation_deg);
    }
    // both flip outcomes occur
    bool saw_flip = false, saw_noflip = false;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        (sample_spec(seed, cfg).flip ? saw_flip : saw_noflip) = true;
    }
    CHECK(saw_flip);
    CHECK(saw_noflip);
}
