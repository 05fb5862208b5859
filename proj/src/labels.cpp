#include "herdgen/labels.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace herdgen {

AxisBox Label::bounding_axis() const {
    if (!oriented) return abox;
    double min_x = corners[0].x, max_x = corners[0].x;
    double min_y = corners[0].y, max_y = corners[0].y;
    for (const Vec2& c : corners) {
        min_x = std::min(min_x, c.x);
        max_x = std::max(max_x, c.x);
        min_y = std::min(min_y, c.y);
        max_y = std::max(max_y, c.y);
    }
    return {min_x, min_y, max_x, max_y};
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

double parse_coord(const std::string& tok, int line_no) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0' || !std::isfinite(v))
        throw ParseError(line_no, "bad number '" + tok + "'");
    if (v < 0.0 || v > 1.0)
        throw RangeError(line_no, "coordinate " + tok + " outside [0,1]");
    return v;
}

int parse_class(const std::string& tok, int line_no) {
    char* end = nullptr;
    long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0' || v < 0)
        throw ParseError(line_no, "bad class id '" + tok + "'");
    return static_cast<int>(v);
}

// Fits the rectangle parameters back out of a (possibly rounded) corner quad.
OrientedBox fit_rect(const std::array<Vec2, 4>& c) {
    Vec2 e1 = 0.5 * ((c[1] - c[0]) + (c[2] - c[3]));
    Vec2 e2 = 0.5 * ((c[3] - c[0]) + (c[2] - c[1]));
    OrientedBox ob;
    ob.center_x = (c[0].x + c[1].x + c[2].x + c[3].x) / 4.0;
    ob.center_y = (c[0].y + c[1].y + c[2].y + c[3].y) / 4.0;
    ob.width = std::sqrt(dot(e1, e1));
    ob.height = std::sqrt(dot(e2, e2));
    ob.angle = std::atan2(e1.y, e1.x);
    while (ob.angle > 1.5707963267948966) ob.angle -= 3.141592653589793;
    while (ob.angle <= -1.5707963267948966) ob.angle += 3.141592653589793;
    return ob;
}

} // namespace

LabelSet parse_labels(const std::string& text, double img_w, double img_h,
                      LabelKind kind, std::vector<double>* confidences) {
    LabelSet set;
    set.img_w = img_w;
    set.img_h = img_h;
    std::istringstream stream(text);
    std::string line;
    int line_no = 0;
    const size_t base = kind == LabelKind::axis ? 5 : 9;
    while (std::getline(stream, line)) {
        ++line_no;
        auto fields = split_fields(line);
        if (fields.empty()) continue;
        size_t allowed_max = confidences ? base + 1 : base;
        if (fields.size() < base || fields.size() > allowed_max)
            throw ParseError(line_no, "expected " + std::to_string(base) +
                                          " fields, got " + std::to_string(fields.size()));
        Label lab;
        lab.class_id = parse_class(fields[0], line_no);
        if (kind == LabelKind::axis) {
            double cx = parse_coord(fields[1], line_no) * img_w;
            double cy = parse_coord(fields[2], line_no) * img_h;
            double w = parse_coord(fields[3], line_no) * img_w;
            double h = parse_coord(fields[4], line_no) * img_h;
            lab.abox = {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
            lab.oriented = false;
        } else {
            for (int i = 0; i < 4; ++i) {
                lab.corners[i].x = parse_coord(fields[1 + 2 * i], line_no) * img_w;
                lab.corners[i].y = parse_coord(fields[2 + 2 * i], line_no) * img_h;
            }
            lab.obox = fit_rect(lab.corners);
            lab.oriented = true;
        }
        if (confidences) {
            double conf = 1.0;
            if (fields.size() == base + 1) {
                char* end = nullptr;
                conf = std::strtod(fields[base].c_str(), &end);
                if (end == fields[base].c_str() || *end != '\0' || conf < 0.0 || conf > 1.0)
                    throw ParseError(line_no, "bad confidence '" + fields[base] + "'");
            }
            confidences->push_back(conf);
        }
        set.labels.push_back(lab);
    }
    return set;
}

std::string write_labels(const LabelSet& labels, LabelKind kind) {
    std::string out;
    char buf[64];
    for (const Label& lab : labels.labels) {
        std::snprintf(buf, sizeof buf, "%d", lab.class_id);
        out += buf;
        if (kind == LabelKind::axis) {
            AxisBox b = lab.bounding_axis();
            double vals[4] = {(b.x_min + b.x_max) / 2 / labels.img_w,
                              (b.y_min + b.y_max) / 2 / labels.img_h,
                              b.width() / labels.img_w, b.height() / labels.img_h};
            for (double v : vals) {
                std::snprintf(buf, sizeof buf, " %.6f", v);
                out += buf;
            }
        } else {
            std::array<Vec2, 4> c = lab.oriented ? lab.corners
                                                 : std::array<Vec2, 4>{Vec2{lab.abox.x_min, lab.abox.y_min},
                                                                       Vec2{lab.abox.x_max, lab.abox.y_min},
                                                                       Vec2{lab.abox.x_max, lab.abox.y_max},
                                                                       Vec2{lab.abox.x_min, lab.abox.y_max}};
            for (const Vec2& p : c) {
                std::snprintf(buf, sizeof buf, " %.6f %.6f", p.x / labels.img_w,
                              p.y / labels.img_h);
                out += buf;
            }
        }
        out += '\n';
    }
    return out;
}

Label make_oriented_label(int class_id, const OrientedBox& box) {
    Label lab;
    lab.class_id = class_id;
    lab.oriented = true;
    lab.obox = box;
    auto c = box.corners();
    for (int i = 0; i < 4; ++i) lab.corners[i] = c[i];
    return lab;
}

Label make_axis_label(int class_id, const AxisBox& box) {
    Label lab;
    lab.class_id = class_id;
    lab.abox = box;
    return lab;
}

} // namespace herdgen
