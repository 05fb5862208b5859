#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "herdgen/geometry.hpp"

namespace herdgen {

struct ParseError : Error {
    int line;
    ParseError(int line_no, const std::string& msg)
        : Error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

struct RangeError : Error {
    int line;
    RangeError(int line_no, const std::string& msg)
        : Error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

enum class LabelKind { axis, obb };

// One annotated object, held in pixel space. Oriented labels keep the exact
// corner quad alongside the fitted rectangle so file round-trips and IoU are
// not distorted by non-square images.
struct Label {
    int class_id = 0;
    bool oriented = false;
    bool normalized = false; // pixel space everywhere after parsing
    AxisBox abox;
    OrientedBox obox;
    std::array<Vec2, 4> corners{};

    // axis box enclosing the label regardless of kind
    AxisBox bounding_axis() const;
};

struct LabelSet {
    double img_w = 0;
    double img_h = 0;
    std::vector<Label> labels;
};

// Line grammars, normalized coordinates in [0,1]:
//   axis: class cx cy w h
//   obb:  class x1 y1 x2 y2 x3 y3 x4 y4
// With confidences != nullptr each line may carry one trailing confidence
// field (defaulted to 1.0 when absent); otherwise the field count is strict.
LabelSet parse_labels(const std::string& text, double img_w, double img_h,
                      LabelKind kind, std::vector<double>* confidences = nullptr);

std::string write_labels(const LabelSet& labels, LabelKind kind);

// Builds an oriented Label from a rectangle (corners derived from it).
Label make_oriented_label(int class_id, const OrientedBox& box);
Label make_axis_label(int class_id, const AxisBox& box);

} // namespace herdgen
