#pragma once

#include <utility>

#include "herdgen/geometry.hpp"
#include "herdgen/raster.hpp"

namespace herdgen {

struct WarpResult {
    RasterImage image;
    BinaryMask mask;
    // translation applied on top of the requested transform so the warped
    // extent starts at the output origin (auto-extent mode only)
    double offset_x = 0.0;
    double offset_y = 0.0;
};

// Resamples image (bilinear) and mask (nearest-neighbor, thresholded) under an
// affine transform. The output canvas is sized to the transformed bounding
// extent of the input rectangle and re-origined; offset_* report the shift.
// Rejects singular transforms.
WarpResult warp_raster(const RasterImage& img, const BinaryMask& mask,
                       const AffineTransform& t);

// Same resampling onto a caller-sized canvas with no re-origin. Source pixels
// mapping outside the input read as zero / background.
WarpResult warp_raster_onto(const RasterImage& img, const BinaryMask& mask,
                            const AffineTransform& t, int out_w, int out_h);

} // namespace herdgen
