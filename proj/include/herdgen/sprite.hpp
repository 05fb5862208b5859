#pragma once

#include <string>
#include <vector>

#include "herdgen/geometry.hpp"
#include "herdgen/labels.hpp"
#include "herdgen/raster.hpp"

namespace herdgen {

struct BoxOutOfBounds : Error {
    int index;
    BoxOutOfBounds(int idx, const std::string& msg) : Error(msg), index(idx) {}
};
struct MaskShapeError : Error {
    explicit MaskShapeError(const std::string& msg) : Error(msg) {}
};
struct MaskTooSmall : Error {
    explicit MaskTooSmall(const std::string& msg) : Error(msg) {}
};
struct SegmentationEmpty : Error {
    SegmentationEmpty() : Error("segmentation produced no foreground") {}
};

// One recorded transform, for provenance.
struct TransformRecord {
    std::string kind; // "hflip", "contrast", "rotate", "scale"
    double value = 0.0;
};

// Extracted animal patch plus its foreground mask.
struct Sprite {
    RasterImage patch;
    BinaryMask mask;
    std::string source_image;
    int source_index = 0; // box index within the source label set
    AxisBox source_box;
    std::vector<TransformRecord> transform_log;
};

// Source image with every annotated box zeroed out.
struct MaskedScene {
    RasterImage background;
    std::vector<AxisBox> holes;
    std::string source_image;
};

// Integer pixel window of a continuous box (round-to-nearest bounds).
struct PixelWindow {
    int x0, y0, x1, y1; // half-open
    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
};
PixelWindow rasterize_box(const AxisBox& box);

// Crops one sprite per label box (mask initially all-foreground) and zeroes
// the union of the boxes in the returned scene.
std::pair<std::vector<Sprite>, MaskedScene> extract_sprites(const RasterImage& img,
                                                            const LabelSet& labels);

inline constexpr int kDefaultMinForegroundPixels = 25;

// Replaces the sprite mask with an externally produced one.
Sprite import_mask(const Sprite& sprite, const BinaryMask& mask,
                   int min_foreground_pixels = kDefaultMinForegroundPixels);

// Stand-in segmenter: models the background from the ring of pixels just
// inside the patch border, marks pixels whose Mahalanobis distance exceeds
// tau as foreground, then opens, closes and keeps the largest component.
Sprite baseline_segment(const Sprite& sprite, int border_ring = 2, double tau = 3.0,
                        int min_foreground_pixels = kDefaultMinForegroundPixels);

// Mask from luminance deviation against the border-ring mean; shares the
// cleanup path with baseline_segment. Used for generated sprites.
BinaryMask luminance_segment(const RasterImage& patch, int border_ring,
                             double threshold);

} // namespace herdgen
