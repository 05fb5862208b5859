#include <cmath>

#include <doctest.h>

#include "herdgen/rng.hpp"
#include "herdgen/tensor.hpp"

using namespace herdgen;

namespace {

Sprite square_sprite(int w, int h, uint8_t value) {
    Sprite s;
    s.patch = RasterImage(w, h, 3, value);
    s.mask = BinaryMask(w, h, 1);
    s.source_image = "test";
    return s;
}

} // namespace

TEST_CASE("sprite_to_tensor shape, range, and gray padding") {
    Sprite s = square_sprite(20, 10, 200);
    const Tensor x = sprite_to_tensor(s, 16);
    CHECK(x.c == 3);
    CHECK(x.h == 16);
    CHECK(x.w == 16);
    for (double v : x.v) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    // wide sprite scaled to width 16 -> height 8; rows above/below are the
    // mid-gray canvas: 128/127.5 - 1
    const double gray = 128.0 / 127.5 - 1.0;
    CHECK(x.at(0, 0, 0) == doctest::Approx(gray).epsilon(1e-12));
    CHECK(x.at(0, 15, 8) == doctest::Approx(gray).epsilon(1e-12));
    // center row holds the sprite value
    CHECK(x.at(0, 8, 8) == doctest::Approx(200.0 / 127.5 - 1.0).epsilon(1e-9));
}

TEST_CASE("masked-out pixels read as mid gray") {
    Sprite s = square_sprite(12, 12, 255);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 6; ++x) s.mask.at(x, y) = 0;
    const Tensor t = sprite_to_tensor(s, 12);
    const double gray = 128.0 / 127.5 - 1.0;
    CHECK(t.at(0, 6, 2) == doctest::Approx(gray).epsilon(1e-12));
    CHECK(t.at(0, 6, 9) == doctest::Approx(255.0 / 127.5 - 1.0).epsilon(1e-9));
}

TEST_CASE("tensor_to_sprite endpoint mapping") {
    // bright blob on dark field; corners carry the extremes
    Tensor x;
    x.c = 3;
    x.h = 16;
    x.w = 16;
    x.v.assign(3 * 16 * 16, -0.8);
    for (int c = 0; c < 3; ++c)
        for (int y = 5; y < 11; ++y)
            for (int xx = 5; xx < 11; ++xx) x.at(c, y, xx) = 0.9;
    for (int c = 0; c < 3; ++c) {
        x.at(c, 7, 7) = 1.0;  // -> 255
        x.at(c, 7, 8) = -1.0; // -> 0
    }
    const Sprite s = tensor_to_sprite(x);
    bool saw255 = false, saw0 = false;
    for (int y = 0; y < s.patch.height; ++y)
        for (int xx = 0; xx < s.patch.width; ++xx) {
            if (s.patch.at(xx, y, 0) == 255) saw255 = true;
            if (s.patch.at(xx, y, 0) == 0) saw0 = true;
        }
    CHECK(saw255);
    CHECK(saw0);
}

TEST_CASE("tensor_to_sprite recovers a centered blob") {
    Tensor x;
    x.c = 3;
    x.h = 24;
    x.w = 24;
    x.v.assign(size_t(3) * 24 * 24, -0.7); // dark field
    BinaryMask truth(24, 24);
    for (int y = 7; y < 17; ++y)
        for (int xx = 7; xx < 17; ++xx) {
            truth.at(xx, y) = 1;
            for (int c = 0; c < 3; ++c) x.at(c, y, xx) = 0.8; // bright blob
        }
    const Sprite s = tensor_to_sprite(x);
    // sprite is cropped to the tight box; blob is 10x10
    CHECK(s.patch.width == 10);
    CHECK(s.patch.height == 10);
    long inter = 0, uni = 0;
    for (int y = 0; y < 10; ++y)
        for (int xx = 0; xx < 10; ++xx) {
            const bool a = s.mask.at(xx, y) != 0;
            inter += a; // truth is all-foreground within the crop
            uni += 1;
        }
    CHECK(double(inter) / double(uni) >= 0.9);
    CHECK(s.source_image == "diffusion");
}

TEST_CASE("tensor_to_sprite rejects constant and tiny-foreground tensors") {
    Tensor flat;
    flat.c = 3;
    flat.h = 16;
    flat.w = 16;
    flat.v.assign(3 * 16 * 16, 0.25);
    CHECK_THROWS_AS(tensor_to_sprite(flat), SpriteRejected);

    // a 2x2 bright spot is foreground but below min_foreground_pixels
    Tensor tiny = flat;
    for (int c = 0; c < 3; ++c)
        for (int y = 7; y < 9; ++y)
            for (int xx = 7; xx < 9; ++xx) tiny.at(c, y, xx) = 1.0;
    CHECK_THROWS_AS(tensor_to_sprite(tiny), SpriteRejected);
}

TEST_CASE("sprite_to_tensor round trip through tensor_to_sprite") {
    // bright 8x14 box sprite against the gray canvas survives the round trip
    Sprite s = square_sprite(14, 8, 230);
    const Tensor x = sprite_to_tensor(s, 16);
    const Sprite back = tensor_to_sprite(x);
    CHECK(back.patch.width >= 12);
    CHECK(back.patch.height >= 6);
    CHECK(back.mask.foreground_count() >= 60);
}
