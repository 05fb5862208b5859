#pragma once

#include <cstdint>
#include <vector>

#include "herdgen/sprite.hpp"

namespace herdgen {

struct NoBorderAvailable : Error {
    NoBorderAvailable() : Error("masked region has no border pixels to sample") {}
};

// A MaskedScene with its holes filled from border samples.
struct FilledBackground {
    RasterImage image;
    // connected masked regions as pixel index lists (y*width+x), scan-ordered
    std::vector<std::vector<uint32_t>> filled_regions;
    std::string source_image;
    uint64_t fill_seed = 0;
};

// Partition of all hole pixels into 4-connected components; boxes that touch
// or overlap merge into one region.
std::vector<std::vector<uint32_t>> find_connected_regions(const MaskedScene& scene);

// Every hole pixel takes the value of a uniformly sampled pixel from its
// region's border set (the non-hole pixels 8-adjacent to the region).
// Deterministic per seed; region index is mixed into the per-region stream.
FilledBackground fill_from_borders(const MaskedScene& scene,
                                   const std::vector<std::vector<uint32_t>>& regions,
                                   uint64_t seed, int border_width = 1);

// Separable Gaussian blur over each filled region dilated by kernel_radius.
// Pixels outside every dilated region are untouched.
FilledBackground blur_regions(const FilledBackground& bg, double sigma,
                              int kernel_radius);

std::vector<double> gaussian_kernel(double sigma, int radius);

} // namespace herdgen
