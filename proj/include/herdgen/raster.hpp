#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace herdgen {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Row-major interleaved 8-bit raster. channels is 1 for grayscale, 3 for RGB.
// Pixel convention: origin top-left, x rightward, y downward.
struct RasterImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<uint8_t> data;

    RasterImage() = default;
    RasterImage(int w, int h, int c, uint8_t fill = 0)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {
        if (w <= 0 || h <= 0 || (c != 1 && c != 3))
            throw Error("RasterImage: bad dimensions " + std::to_string(w) + "x" +
                        std::to_string(h) + "x" + std::to_string(c));
    }

    uint8_t& at(int x, int y, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    uint8_t at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }

    bool operator==(const RasterImage& o) const = default;
};

// One boolean per pixel; 1 = foreground.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> bits;

    BinaryMask() = default;
    BinaryMask(int w, int h, uint8_t fill = 0)
        : width(w), height(h), bits(static_cast<size_t>(w) * h, fill ? 1 : 0) {
        if (w <= 0 || h <= 0)
            throw Error("BinaryMask: bad dimensions");
    }

    uint8_t& at(int x, int y) { return bits[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int x, int y) const { return bits[static_cast<size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }

    size_t foreground_count() const {
        size_t n = 0;
        for (uint8_t b : bits) n += b;
        return n;
    }

    bool operator==(const BinaryMask& o) const = default;
};

// 4-connected components of the foreground. Components are returned as pixel
// index lists (y*width+x), in scan order of their first pixel.
std::vector<std::vector<uint32_t>> connected_components(const BinaryMask& mask);

// Keeps only the largest 4-connected component (ties broken by scan order).
BinaryMask largest_component(const BinaryMask& mask);

// 3x3 morphology. Pixels outside the canvas count as background.
BinaryMask erode3x3(const BinaryMask& mask);
BinaryMask dilate3x3(const BinaryMask& mask);
inline BinaryMask open3x3(const BinaryMask& m) { return dilate3x3(erode3x3(m)); }
inline BinaryMask close3x3(const BinaryMask& m) { return erode3x3(dilate3x3(m)); }

// Chebyshev dilation by radius r (separable run-max).
BinaryMask dilate_chebyshev(const BinaryMask& mask, int radius);

} // namespace herdgen
