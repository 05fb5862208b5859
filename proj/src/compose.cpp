#include "herdgen/compose.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "herdgen/rng.hpp"
#include "herdgen/warp.hpp"

namespace herdgen {

namespace {

struct WarpedSprite {
    WarpResult wr;
    double centroid_x = 0.0, centroid_y = 0.0;
};

WarpedSprite warp_placement(const Sprite& sprite, double scale,
                            double orientation_deg) {
    const double longer = std::max(sprite.patch.width, sprite.patch.height);
    const double s = scale / longer;
    const AffineTransform t = AffineTransform::compose(
        AffineTransform::rotation(orientation_deg * M_PI / 180.0),
        AffineTransform::scaling(s, s));
    WarpedSprite out;
    out.wr = warp_raster(sprite.patch, sprite.mask, t);
    double sx = 0.0, sy = 0.0;
    size_t n = 0;
    for (int y = 0; y < out.wr.mask.height; ++y)
        for (int x = 0; x < out.wr.mask.width; ++x)
            if (out.wr.mask.at(x, y)) {
                sx += x + 0.5;
                sy += y + 0.5;
                ++n;
            }
    if (n == 0) throw EmptyMask("sprite mask vanished under warp");
    out.centroid_x = sx / double(n);
    out.centroid_y = sy / double(n);
    return out;
}

// Closed anchor interval that keeps the whole warped sprite on the canvas.
struct AnchorDomain {
    double x_lo, x_hi, y_lo, y_hi;
    bool empty;
};

AnchorDomain anchor_domain(const WarpedSprite& ws, int canvas_w, int canvas_h) {
    AnchorDomain d{};
    d.empty = ws.wr.image.width > canvas_w || ws.wr.image.height > canvas_h;
    if (d.empty) return d;
    d.x_lo = ws.centroid_x;
    d.x_hi = ws.centroid_x + (canvas_w - ws.wr.image.width);
    d.y_lo = ws.centroid_y;
    d.y_hi = ws.centroid_y + (canvas_h - ws.wr.image.height);
    return d;
}

bool in_domain(const AnchorDomain& d, double x, double y) {
    return !d.empty && x >= d.x_lo && x <= d.x_hi && y >= d.y_lo && y <= d.y_hi;
}

// Integer paste offset for an anchor; the centroid lands within half a pixel.
void paste_offset(const WarpedSprite& ws, double ax, double ay, int canvas_w,
                  int canvas_h, int& ox, int& oy) {
    ox = int(std::lround(ax - ws.centroid_x));
    oy = int(std::lround(ay - ws.centroid_y));
    ox = std::clamp(ox, std::min(0, canvas_w - ws.wr.image.width),
                    std::max(0, canvas_w - ws.wr.image.width));
    oy = std::clamp(oy, std::min(0, canvas_h - ws.wr.image.height),
                    std::max(0, canvas_h - ws.wr.image.height));
}

BinaryMask canvas_mask_at(const WarpedSprite& ws, int ox, int oy, int canvas_w,
                          int canvas_h) {
    BinaryMask out(canvas_w, canvas_h);
    const int x0 = std::max(0, ox), x1 = std::min(canvas_w, ox + ws.wr.mask.width);
    const int y0 = std::max(0, oy), y1 = std::min(canvas_h, oy + ws.wr.mask.height);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            out.at(x, y) = ws.wr.mask.at(x - ox, y - oy);
    return out;
}

struct VisCount {
    size_t total = 0;
    size_t visible = 0;
};

VisCount count_visibility(const BinaryMask& fg, const BinaryMask& nearer) {
    VisCount c;
    for (size_t i = 0; i < fg.bits.size(); ++i) {
        if (!fg.bits[i]) continue;
        ++c.total;
        if (!nearer.bits[i]) ++c.visible;
    }
    return c;
}

// Exact band check on integer counts: v = 1 or 0.10 <= v <= 0.90. The band
// bounds are spec constants; the rational comparison avoids float rounding.
bool visibility_ok(const VisCount& c, const ScenePlan& plan) {
    if (c.total == 0) return false;
    if (c.visible == c.total) return true;
    const double v = double(c.visible) / double(c.total);
    return v >= plan.min_visibility - 1e-12 &&
           v <= plan.max_occluded_visibility + 1e-12;
}

bool label_in_bounds(const BinaryMask& canvas_mask, int canvas_w, int canvas_h,
                     OrientedBox* rect_out) {
    OrientedBox rect = min_area_rect_from_mask(canvas_mask);
    if (rect_out) *rect_out = rect;
    for (const Vec2& c : rect.corners()) {
        if (c.x < 0.0 || c.x > canvas_w || c.y < 0.0 || c.y > canvas_h) return false;
    }
    return true;
}

void composite_sprite(RasterImage& canvas, const WarpedSprite& ws, int ox, int oy,
                      bool feather) {
    const BinaryMask& m = ws.wr.mask;
    const RasterImage& p = ws.wr.image;
    const int x0 = std::max(0, ox), x1 = std::min(canvas.width, ox + m.width);
    const int y0 = std::max(0, oy), y1 = std::min(canvas.height, oy + m.height);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const int lx = x - ox, ly = y - oy;
            if (!m.at(lx, ly)) continue;
            double alpha = 1.0;
            if (feather) {
                const bool interior =
                    lx > 0 && m.at(lx - 1, ly) && lx + 1 < m.width && m.at(lx + 1, ly) &&
                    ly > 0 && m.at(lx, ly - 1) && ly + 1 < m.height && m.at(lx, ly + 1);
                if (!interior) alpha = 0.5;
            }
            for (int c = 0; c < canvas.channels; ++c) {
                const double v = alpha * p.at(lx, ly, c) + (1.0 - alpha) * canvas.at(x, y, c);
                canvas.at(x, y, c) = uint8_t(std::clamp<long>(std::lround(v), 0, 255));
            }
        }
    }
}

std::vector<int> depth_order(const std::vector<Placement>& ps) {
    std::vector<int> order(ps.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return ps[a].depth_rank < ps[b].depth_rank; });
    return order;
}

} // namespace

const char* pattern_name(Pattern p) {
    return p == Pattern::group ? "group" : "individual";
}

double compute_visibility(const BinaryMask& fg, const BinaryMask& nearer_union) {
    if (fg.width != nearer_union.width || fg.height != nearer_union.height)
        throw Error("visibility masks must share canvas dimensions");
    VisCount c = count_visibility(fg, nearer_union);
    if (c.total == 0) throw EmptyMask("visibility of an empty foreground");
    return double(c.visible) / double(c.total);
}

ScenePlan plan_scene(const RasterImage& background, int background_id,
                     const std::vector<Sprite>& bank, Pattern pattern, uint64_t seed,
                     const ComposeConfig& cfg) {
    if (bank.empty()) throw Error("empty sprite bank");
    if (background.width < 1 || background.height < 1)
        throw Error("empty background");
    if (cfg.fields.empty()) throw Error("no scale fields configured");
    if (cfg.field_weights.size() != cfg.fields.size())
        throw Error("field_weights must match fields");
    double weight_total = 0.0;
    for (double w : cfg.field_weights) {
        if (w < 0.0) throw Error("field weights must be non-negative");
        weight_total += w;
    }
    if (weight_total <= 0.0) throw Error("field weights sum to zero");

    Rng rng(mix_seed(seed, 0x9c3du));
    auto draw_field = [&]() {
        double u = rng.uniform() * weight_total;
        for (size_t i = 0; i + 1 < cfg.field_weights.size(); ++i) {
            if (u < cfg.field_weights[i]) return i;
            u -= cfg.field_weights[i];
        }
        return cfg.field_weights.size() - 1;
    };
    ScenePlan plan;
    plan.background_id = background_id;
    plan.pattern = pattern;
    plan.seed = seed;
    plan.min_visibility = cfg.min_visibility;
    plan.max_occluded_visibility = cfg.max_occluded_visibility;

    const int n = pattern == Pattern::group
                      ? int(rng.range_int(cfg.group_min, cfg.group_max))
                      : int(rng.range_int(cfg.individual_min, cfg.individual_max));
    const size_t group_field = draw_field();

    plan.placements.resize(size_t(n));
    for (int i = 0; i < n; ++i) {
        Placement& pl = plan.placements[size_t(i)];
        const ScaleField& field =
            cfg.fields[pattern == Pattern::group ? group_field : draw_field()];
        pl.sprite_id = int(rng.bounded(bank.size()));
        const double base = rng.uniform(field.min_px, field.max_px);
        pl.scale = base * rng.uniform(1.0 - cfg.scale_jitter, 1.0 + cfg.scale_jitter);
        pl.orientation_deg = rng.uniform(0.0, 360.0);
        pl.field = field.name;
    }

    double mean_scale = 0.0;
    for (const Placement& pl : plan.placements) mean_scale += pl.scale;
    mean_scale /= double(n);

    // anchors, drawn against each placement's exact on-canvas extent
    std::vector<AnchorDomain> domains(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const Placement& pl = plan.placements[size_t(i)];
        WarpedSprite ws =
            warp_placement(bank[size_t(pl.sprite_id)], pl.scale, pl.orientation_deg);
        domains[size_t(i)] = anchor_domain(ws, background.width, background.height);
        if (domains[size_t(i)].empty)
            throw SceneInfeasible("background too small for field " + pl.field);
    }

    if (pattern == Pattern::group) {
        const double gc_x = rng.uniform(0.0, double(background.width));
        const double gc_y = rng.uniform(0.0, double(background.height));
        for (int i = 0; i < n; ++i) {
            Placement& pl = plan.placements[size_t(i)];
            const AnchorDomain& d = domains[size_t(i)];
            if (i == 0) {
                pl.anchor_x = std::clamp(gc_x, d.x_lo, d.x_hi);
                pl.anchor_y = std::clamp(gc_y, d.y_lo, d.y_hi);
                continue;
            }
            const Placement& prev = plan.placements[size_t(i) - 1];
            bool placed = false;
            for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
                const double r =
                    rng.uniform(cfg.spacing_min, cfg.spacing_max) * mean_scale;
                const double phi = rng.uniform(0.0, 2.0 * M_PI);
                const double cx = prev.anchor_x + r * std::cos(phi);
                const double cy = prev.anchor_y + r * std::sin(phi);
                if (in_domain(d, cx, cy)) {
                    pl.anchor_x = cx;
                    pl.anchor_y = cy;
                    placed = true;
                }
            }
            if (!placed) { // spacing unsatisfiable here; keep the scene alive
                pl.anchor_x = rng.uniform(d.x_lo, d.x_hi);
                pl.anchor_y = rng.uniform(d.y_lo, d.y_hi);
            }
        }
    } else {
        for (int i = 0; i < n; ++i) {
            Placement& pl = plan.placements[size_t(i)];
            const AnchorDomain& d = domains[size_t(i)];
            pl.anchor_x = rng.uniform(d.x_lo, d.x_hi);
            pl.anchor_y = rng.uniform(d.y_lo, d.y_hi);
        }
    }

    // larger sprite = nearer; ties keep placement order
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return plan.placements[size_t(a)].scale > plan.placements[size_t(b)].scale;
    });
    for (int rank = 0; rank < n; ++rank)
        plan.placements[size_t(order[size_t(rank)])].depth_rank = rank;
    return plan;
}

CompositeScene render_scene(const ScenePlan& plan, const std::vector<Sprite>& bank,
                            const RasterImage& background, const ComposeConfig& cfg) {
    if (plan.placements.empty()) throw SceneRejected("plan has no placements");
    for (const Placement& pl : plan.placements)
        if (pl.sprite_id < 0 || size_t(pl.sprite_id) >= bank.size())
            throw Error("placement references unknown sprite");

    const int W = background.width, H = background.height;
    const size_t n = plan.placements.size();

    std::vector<WarpedSprite> warped(n);
    for (size_t i = 0; i < n; ++i)
        warped[i] = warp_placement(bank[size_t(plan.placements[i].sprite_id)],
                                   plan.placements[i].scale,
                                   plan.placements[i].orientation_deg);

    CompositeScene scene;
    scene.plan = plan;
    scene.plan.placements.clear();

    // nearest first: accepted visibilities can never change afterwards
    std::vector<int> order = depth_order(plan.placements);
    std::vector<bool> accepted(n, false);
    std::vector<BinaryMask> masks(n);
    std::vector<OrientedBox> rects(n);
    std::vector<double> anchors_x(n), anchors_y(n);
    std::vector<double> vis(n, 0.0);
    BinaryMask nearer(W, H);

    for (int idx : order) {
        const Placement& pl = plan.placements[size_t(idx)];
        const WarpedSprite& ws = warped[size_t(idx)];
        const AnchorDomain dom = anchor_domain(ws, W, H);

        double ax = pl.anchor_x, ay = pl.anchor_y;
        Rng repair_rng(mix_seed(plan.seed, 0x4e4au, uint64_t(idx)));
        bool ok = false;
        std::string reason = "visibility";
        for (int attempt = 0; attempt <= cfg.max_repair_attempts; ++attempt) {
            if (attempt > 0) {
                if (dom.empty) {
                    reason = "no feasible anchor";
                    break;
                }
                ax = repair_rng.uniform(dom.x_lo, dom.x_hi);
                ay = repair_rng.uniform(dom.y_lo, dom.y_hi);
            }
            int ox, oy;
            paste_offset(ws, ax, ay, W, H, ox, oy);
            BinaryMask cm = canvas_mask_at(ws, ox, oy, W, H);
            VisCount c = count_visibility(cm, nearer);
            if (c.total == 0) {
                reason = "offscreen";
                continue;
            }
            if (!visibility_ok(c, plan)) continue;
            OrientedBox rect;
            if (!label_in_bounds(cm, W, H, &rect)) {
                reason = "label out of bounds";
                continue;
            }
            masks[size_t(idx)] = std::move(cm);
            rects[size_t(idx)] = rect;
            anchors_x[size_t(idx)] = ax;
            anchors_y[size_t(idx)] = ay;
            vis[size_t(idx)] = double(c.visible) / double(c.total);
            ok = true;
            break;
        }
        if (!ok) {
            scene.drops.push_back({idx, reason});
            continue;
        }
        accepted[size_t(idx)] = true;
        for (size_t i = 0; i < nearer.bits.size(); ++i)
            nearer.bits[i] |= masks[size_t(idx)].bits[i];
    }

    size_t survivors = 0;
    for (size_t i = 0; i < n; ++i) survivors += accepted[i] ? 1 : 0;
    if (survivors == 0) throw SceneRejected("all placements dropped");

    // paint farthest to nearest
    scene.image = background;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int idx = *it;
        if (!accepted[size_t(idx)]) continue;
        int ox, oy;
        paste_offset(warped[size_t(idx)], anchors_x[size_t(idx)],
                     anchors_y[size_t(idx)], W, H, ox, oy);
        composite_sprite(scene.image, warped[size_t(idx)], ox, oy, cfg.feather_edges);
    }

    scene.labels.img_w = W;
    scene.labels.img_h = H;
    for (size_t i = 0; i < n; ++i) {
        if (!accepted[i]) continue;
        Placement pl = plan.placements[i];
        pl.anchor_x = anchors_x[i];
        pl.anchor_y = anchors_y[i];
        scene.plan.placements.push_back(pl);
        Label lab = make_oriented_label(0, rects[i]);
        lab.abox = tight_box_from_mask(masks[i]);
        scene.labels.labels.push_back(lab);
        scene.visibility.push_back(vis[i]);
    }
    return scene;
}

std::string serialize_plan(const ScenePlan& plan) {
    std::string out = "scene_plan v1\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "background %d\n", plan.background_id);
    out += buf;
    std::snprintf(buf, sizeof buf, "pattern %s\n", pattern_name(plan.pattern));
    out += buf;
    std::snprintf(buf, sizeof buf, "seed %llu\n", (unsigned long long)plan.seed);
    out += buf;
    std::snprintf(buf, sizeof buf, "visibility %.17g %.17g\n", plan.min_visibility,
                  plan.max_occluded_visibility);
    out += buf;
    std::snprintf(buf, sizeof buf, "placements %zu\n", plan.placements.size());
    out += buf;
    for (const Placement& pl : plan.placements) {
        std::snprintf(buf, sizeof buf, "p %d %.17g %.17g %.17g %.17g %d %s\n",
                      pl.sprite_id, pl.anchor_x, pl.anchor_y, pl.scale,
                      pl.orientation_deg, pl.depth_rank, pl.field.c_str());
        out += buf;
    }
    return out;
}

ScenePlan parse_plan(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    auto next_line = [&](const char* what) {
        if (!std::getline(in, line)) throw Error(std::string("plan truncated at ") + what);
        return line;
    };
    if (next_line("header") != "scene_plan v1") throw Error("bad plan header");

    ScenePlan plan;
    std::istringstream ls;
    std::string tag;

    ls.str(next_line("background"));
    ls >> tag >> plan.background_id;
    if (!ls || tag != "background") throw Error("bad plan background line");

    ls.clear();
    ls.str(next_line("pattern"));
    std::string pat;
    ls >> tag >> pat;
    if (!ls || tag != "pattern" || (pat != "group" && pat != "individual"))
        throw Error("bad plan pattern line");
    plan.pattern = pat == "group" ? Pattern::group : Pattern::individual;

    ls.clear();
    ls.str(next_line("seed"));
    ls >> tag >> plan.seed;
    if (!ls || tag != "seed") throw Error("bad plan seed line");

    ls.clear();
    ls.str(next_line("visibility"));
    ls >> tag >> plan.min_visibility >> plan.max_occluded_visibility;
    if (!ls || tag != "visibility") throw Error("bad plan visibility line");

    ls.clear();
    ls.str(next_line("placements"));
    size_t count = 0;
    ls >> tag >> count;
    if (!ls || tag != "placements") throw Error("bad plan placement count");

    plan.placements.resize(count);
    for (size_t i = 0; i < count; ++i) {
        Placement& pl = plan.placements[i];
        ls.clear();
        ls.str(next_line("placement"));
        ls >> tag >> pl.sprite_id >> pl.anchor_x >> pl.anchor_y >> pl.scale >>
            pl.orientation_deg >> pl.depth_rank >> pl.field;
        if (!ls || tag != "p") throw Error("bad placement line");
    }
    return plan;
}

BatchStats generate_batch(const std::vector<RasterImage>& backgrounds,
                          const std::vector<Sprite>& bank, int count,
                          uint64_t master_seed, const ComposeConfig& cfg,
                          const std::function<void(int, const CompositeScene&)>& sink,
                          int workers) {
    if (count < 1) throw Error("scene count must be >= 1");
    if (backgrounds.empty()) throw Error("no backgrounds");
    if (bank.empty()) throw Error("empty sprite bank");

    BatchStats stats;
    stats.attempted = count;
    std::mutex mu;

    auto run_index = [&](int i) {
        const uint64_t scene_seed = mix_seed(master_seed, 0xcab5u, uint64_t(i));
        Rng rng(mix_seed(scene_seed, 0x77u));
        const Pattern pat = rng.coin(cfg.p_group) ? Pattern::group : Pattern::individual;
        const int bg = int(rng.bounded(backgrounds.size()));
        try {
            ScenePlan plan = plan_scene(backgrounds[size_t(bg)], bg, bank, pat,
                                        mix_seed(scene_seed, 0x88u), cfg);
            CompositeScene scene = render_scene(plan, bank, backgrounds[size_t(bg)], cfg);
            std::lock_guard<std::mutex> lock(mu);
            stats.rendered += 1;
            stats.placements_dropped += int(scene.drops.size());
            sink(i, scene);
        } catch (const SceneInfeasible&) {
            std::lock_guard<std::mutex> lock(mu);
            stats.rejected += 1;
        } catch (const SceneRejected&) {
            std::lock_guard<std::mutex> lock(mu);
            stats.rejected += 1;
        }
    };

    const int nw = std::max(1, std::min(workers, count));
    if (nw == 1) {
        for (int i = 0; i < count; ++i) run_index(i);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(size_t(nw));
        for (int w = 0; w < nw; ++w) {
            pool.emplace_back([&, w]() {
                for (int i = w; i < count; i += nw) run_index(i);
            });
        }
        for (auto& th : pool) th.join();
    }
    return stats;
}

} // namespace herdgen
