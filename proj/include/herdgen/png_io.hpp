#pragma once

#include <string>

#include "herdgen/raster.hpp"

namespace herdgen {

// Reads any PNG into an 8-bit raster: color inputs become 3-channel RGB,
// grayscale stays single-channel; palettes and 16-bit depths are expanded,
// alpha is dropped.
RasterImage read_png(const std::string& path);

void write_png(const std::string& path, const RasterImage& img);

// Mask convention: single-channel PNG, 0 = background, 255 = foreground.
// Reading thresholds at 128.
BinaryMask read_mask_png(const std::string& path);
void write_mask_png(const std::string& path, const BinaryMask& mask);

} // namespace herdgen
