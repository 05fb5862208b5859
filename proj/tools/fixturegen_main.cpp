#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "herdgen/labels.hpp"
#include "herdgen/png_io.hpp"
#include "herdgen/rng.hpp"

using namespace herdgen;
namespace fs = std::filesystem;

namespace {

struct Animal {
    double cx, cy;   // center
    double a, b;     // half axes, a along the body
    double theta;    // body direction, radians in [0, pi)
    uint8_t color[3];
    double shade;    // lengthwise brightness ramp
};

uint8_t clamp_u8(double v) {
    return uint8_t(std::clamp(v, 0.0, 255.0));
}

void draw_grass(RasterImage& img, Rng& rng) {
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double sway = 9.0 * std::sin(x * 0.013) + 7.0 * std::cos(y * 0.017) +
                                5.0 * std::sin((x + y) * 0.006);
            const double n = rng.uniform(-8.0, 8.0);
            img.at(x, y, 0) = clamp_u8(68 + sway + n);
            img.at(x, y, 1) = clamp_u8(105 + sway + n);
            img.at(x, y, 2) = clamp_u8(55 + 0.6 * sway + n);
        }
    }
}

void draw_animal(RasterImage& img, const Animal& an, Rng& rng) {
    const double ct = std::cos(an.theta), st = std::sin(an.theta);
    const double ex = std::sqrt(an.a * an.a * ct * ct + an.b * an.b * st * st);
    const double ey = std::sqrt(an.a * an.a * st * st + an.b * an.b * ct * ct);
    const int x0 = std::max(0, int(std::floor(an.cx - ex)) - 1);
    const int x1 = std::min(img.width - 1, int(std::ceil(an.cx + ex)) + 1);
    const int y0 = std::max(0, int(std::floor(an.cy - ey)) - 1);
    const int y1 = std::min(img.height - 1, int(std::ceil(an.cy + ey)) + 1);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const double dx = x + 0.5 - an.cx, dy = y + 0.5 - an.cy;
            const double u = dx * ct + dy * st;   // along the body
            const double v = -dx * st + dy * ct;  // across
            if ((u * u) / (an.a * an.a) + (v * v) / (an.b * an.b) > 1.0) continue;
            const double ramp = an.shade * (u / an.a);
            const double n = rng.uniform(-5.0, 5.0);
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = clamp_u8(an.color[c] + ramp + n);
        }
    }
}

OrientedBox animal_obb(const Animal& an, double pad) {
    OrientedBox box;
    box.center_x = an.cx;
    box.center_y = an.cy;
    box.width = 2.0 * (an.a + pad);
    box.height = 2.0 * (an.b + pad);
    box.angle = an.theta > M_PI / 2 ? an.theta - M_PI : an.theta; // (-pi/2, pi/2]
    return box;
}

AxisBox animal_abox(const Animal& an, double pad) {
    const double ct = std::cos(an.theta), st = std::sin(an.theta);
    const double a = an.a + pad, b = an.b + pad;
    const double ex = std::sqrt(a * a * ct * ct + b * b * st * st);
    const double ey = std::sqrt(a * a * st * st + b * b * ct * ct);
    return {an.cx - ex, an.cy - ey, an.cx + ex, an.cy + ey};
}

std::string default_config(const std::string& dataset_root, const std::string& output_root) {
    nlohmann::json j = {
        {"dataset_root", dataset_root},
        {"output_root", output_root},
        {"master_seed", 7},
        {"workers", 1},
        {"dataset", {{"label_kind", "obb"}, {"test_fraction", 0.1}}},
        {"extract",
         {{"min_foreground_pixels", 25},
          {"tau", 3.0},
          {"border_ring", 2},
          {"segmenter", "baseline"}}},
        {"background", {{"blur_sigma", 2.0}, {"blur_radius", 6}, {"border_width", 1}}},
        {"augment",
         {{"contrast_min", 0.7},
          {"contrast_max", 1.3},
          {"rotation_min_deg", 10.0},
          {"rotation_max_deg", 20.0},
          {"p_flip", 0.5},
          {"p_contrast", 1.0},
          {"p_rotate", 1.0},
          {"variants_per_sprite", 4}}},
        {"diffusion",
         {{"resolution", 64},
          {"timesteps", 1000},
          {"beta_start", 1e-4},
          {"beta_end", 0.02},
          {"base_channels", 12},
          {"levels", 3},
          {"temb_dim", 32},
          {"lr", 2e-4},
          {"batch_size", 128},
          {"train_steps", 2000},
          {"sample_count", 64}}},
        {"compose",
         {{"scene_count", 1000},
          {"p_group", 0.7},
          {"group_min", 6},
          {"group_max", 10},
          {"individual_min", 1},
          {"individual_max", 5},
          {"scale_jitter", 0.05},
          {"spacing_min", 0.6},
          {"spacing_max", 1.5},
          {"min_visibility", 0.1},
          {"max_occluded_visibility", 0.9},
          {"max_repair_attempts", 20},
          {"feather_edges", true},
          {"fields",
           {{{"name", "near"}, {"min_px", 450.0}, {"max_px", 500.0}, {"weight", 1.0}},
            {{"name", "mid"}, {"min_px", 300.0}, {"max_px", 350.0}, {"weight", 1.0}},
            {{"name", "far"}, {"min_px", 180.0}, {"max_px", 200.0}, {"weight", 1.0}}}}}},
        {"eval", {{"iou_threshold", 0.5}, {"kind", "obb"}}},
    };
    return j.dump(2) + "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fixturegen: deterministic annotated aerial-pasture test corpus"};
    std::string out_dir;
    std::string output_root;
    int images = 5, width = 1280, height = 960;
    uint64_t seed = 77;
    app.add_option("out_dir", out_dir, "corpus directory to create")->required();
    app.add_option("--images", images, "image count")->check(CLI::PositiveNumber);
    app.add_option("--width", width, "image width")->check(CLI::Range(256, 8192));
    app.add_option("--height", height, "image height")->check(CLI::Range(256, 8192));
    app.add_option("--seed", seed, "corpus seed");
    app.add_option("--output-root", output_root, "output_root for the emitted config");
    CLI11_PARSE(app, argc, argv);

    try {
        const fs::path root = out_dir;
        fs::create_directories(root / "images");
        fs::create_directories(root / "labels");
        fs::create_directories(root / "labels_obb");

        const double margin = 130.0, min_sep = 230.0, pad = 4.0;
        for (int i = 0; i < images; ++i) {
            Rng rng(mix_seed(seed, 0xf1c5u, uint64_t(i)));
            RasterImage img(width, height, 3);
            draw_grass(img, rng);

            const int n = int(rng.range_int(5, 8));
            std::vector<Animal> herd;
            while (int(herd.size()) < n) {
                Animal an;
                an.cx = rng.uniform(margin, width - margin);
                an.cy = rng.uniform(margin, height - margin);
                bool ok = true;
                for (const Animal& other : herd) {
                    const double d = std::hypot(an.cx - other.cx, an.cy - other.cy);
                    if (d < min_sep) { ok = false; break; }
                }
                if (!ok) continue;
                an.a = rng.uniform(45.0, 65.0);
                an.b = rng.uniform(20.0, 30.0);
                an.theta = rng.uniform(0.0, M_PI);
                if (rng.coin(0.5)) {
                    an.color[0] = 215; an.color[1] = 210; an.color[2] = 200; // sheep
                } else {
                    an.color[0] = 95; an.color[1] = 62; an.color[2] = 42; // cattle
                }
                an.shade = rng.uniform(8.0, 16.0);
                herd.push_back(an);
            }

            LabelSet ax, ob;
            ax.img_w = ob.img_w = width;
            ax.img_h = ob.img_h = height;
            for (const Animal& an : herd) {
                draw_animal(img, an, rng);
                ax.labels.push_back(make_axis_label(0, animal_abox(an, pad)));
                ob.labels.push_back(make_oriented_label(0, animal_obb(an, pad)));
            }

            char stem[32];
            std::snprintf(stem, sizeof stem, "scene_%03d", i);
            write_png((root / "images" / (std::string(stem) + ".png")).string(), img);
            std::ofstream la(root / "labels" / (std::string(stem) + ".txt"));
            la << write_labels(ax, LabelKind::axis);
            std::ofstream lo(root / "labels_obb" / (std::string(stem) + ".txt"));
            lo << write_labels(ob, LabelKind::obb);
        }

        if (output_root.empty()) output_root = (root / "out").generic_string();
        std::ofstream cf(root / "config.json");
        cf << default_config(root.generic_string(), output_root);
        std::printf("fixture: %d images at %dx%d under %s\n", images, width, height,
                    root.generic_string().c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
