#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <doctest.h>

#include "herdgen/compose.hpp"
#include "herdgen/rng.hpp"

using namespace herdgen;

namespace {

Sprite solid_sprite(int side, uint8_t r, uint8_t g, uint8_t b) {
    Sprite s;
    s.patch = RasterImage(side, side, 3);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            s.patch.at(x, y, 0) = r;
            s.patch.at(x, y, 1) = g;
            s.patch.at(x, y, 2) = b;
        }
    s.mask = BinaryMask(side, side, 1);
    s.source_image = "unit";
    return s;
}

RasterImage flat_background(int w, int h, uint8_t r, uint8_t g, uint8_t b) {
    RasterImage img(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            img.at(x, y, 0) = r;
            img.at(x, y, 1) = g;
            img.at(x, y, 2) = b;
        }
    return img;
}

// small-scale config so plan sweeps stay cheap
ComposeConfig small_cfg() {
    ComposeConfig cfg;
    cfg.fields = {{"near", 40.0, 60.0}, {"mid", 25.0, 35.0}, {"far", 16.0, 20.0}};
    cfg.field_weights = {1.0, 1.0, 1.0};
    return cfg;
}

Placement make_placement(int sprite_id, double ax, double ay, double scale, int rank) {
    Placement pl;
    pl.sprite_id = sprite_id;
    pl.anchor_x = ax;
    pl.anchor_y = ay;
    pl.scale = scale;
    pl.orientation_deg = 0.0;
    pl.depth_rank = rank;
    pl.field = "near";
    return pl;
}

ScenePlan make_plan(std::vector<Placement> ps, uint64_t seed = 1) {
    ScenePlan plan;
    plan.background_id = 0;
    plan.pattern = Pattern::individual;
    plan.placements = std::move(ps);
    plan.seed = seed;
    return plan;
}

} // namespace

TEST_CASE("plan_scene draws counts, fields, and scales inside the configured ranges") {
    const RasterImage bg = flat_background(200, 200, 90, 120, 80);
    const std::vector<Sprite> bank{solid_sprite(20, 200, 50, 50),
                                   solid_sprite(24, 50, 200, 50)};
    const ComposeConfig cfg = small_cfg();
    std::map<std::string, std::pair<double, double>> ranges;
    for (const ScaleField& f : cfg.fields) ranges[f.name] = {f.min_px, f.max_px};

    bool saw_multi_field = false;
    for (int k = 0; k < 120; ++k) {
        const Pattern pat = k % 2 == 0 ? Pattern::group : Pattern::individual;
        const ScenePlan plan = plan_scene(bg, 3, bank, pat, mix_seed(900, k), cfg);
        CHECK(plan.background_id == 3);
        CHECK(plan.pattern == pat);
        const int n = int(plan.placements.size());
        if (pat == Pattern::group) {
            CHECK(n >= cfg.group_min);
            CHECK(n <= cfg.group_max);
        } else {
            CHECK(n >= cfg.individual_min);
            CHECK(n <= cfg.individual_max);
        }
        std::set<std::string> fields_used;
        for (const Placement& pl : plan.placements) {
            REQUIRE(ranges.count(pl.field) == 1);
            fields_used.insert(pl.field);
            const auto [lo, hi] = ranges[pl.field];
            CHECK(pl.scale >= lo * (1.0 - cfg.scale_jitter) - 1e-9);
            CHECK(pl.scale <= hi * (1.0 + cfg.scale_jitter) + 1e-9);
            CHECK(pl.orientation_deg >= 0.0);
            CHECK(pl.orientation_deg < 360.0);
            CHECK(pl.sprite_id >= 0);
            CHECK(pl.sprite_id < int(bank.size()));
        }
        // a group scene shares one field across all members
        if (pat == Pattern::group) CHECK(fields_used.size() == 1);
        if (pat == Pattern::individual && fields_used.size() > 1) saw_multi_field = true;

        // depth ranks form a permutation ordered by descending scale
        std::vector<int> ranks;
        for (const Placement& pl : plan.placements) ranks.push_back(pl.depth_rank);
        std::sort(ranks.begin(), ranks.end());
        for (int i = 0; i < n; ++i) CHECK(ranks[size_t(i)] == i);
        for (const Placement& a : plan.placements)
            for (const Placement& b : plan.placements)
                if (a.depth_rank < b.depth_rank) CHECK(a.scale >= b.scale);
    }
    CHECK(saw_multi_field);
}

TEST_CASE("plan_scene is deterministic in the seed") {
    const RasterImage bg = flat_background(200, 200, 90, 120, 80);
    const std::vector<Sprite> bank{solid_sprite(20, 200, 50, 50)};
    const ScenePlan a = plan_scene(bg, 0, bank, Pattern::group, 77, small_cfg());
    const ScenePlan b = plan_scene(bg, 0, bank, Pattern::group, 77, small_cfg());
    CHECK(serialize_plan(a) == serialize_plan(b));
    const ScenePlan c = plan_scene(bg, 0, bank, Pattern::group, 78, small_cfg());
    CHECK(serialize_plan(a) != serialize_plan(c));
}

TEST_CASE("plan_scene rejects backgrounds smaller than the drawn scale") {
    const RasterImage tiny = flat_background(25, 25, 90, 120, 80);
    const std::vector<Sprite> bank{solid_sprite(20, 200, 50, 50)};
    ComposeConfig cfg = small_cfg();
    cfg.fields = {{"near", 40.0, 60.0}};
    cfg.field_weights = {1.0};
    CHECK_THROWS_AS(plan_scene(tiny, 0, bank, Pattern::individual, 5, cfg), SceneInfeasible);
}

TEST_CASE("single unrotated placement lands exactly and is fully visible") {
    const RasterImage bg = flat_background(100, 100, 10, 20, 30);
    const std::vector<Sprite> bank{solid_sprite(20, 240, 10, 10)};
    ComposeConfig cfg = small_cfg();
    cfg.feather_edges = false;

    const double ax = 50.25, ay = 41.75; // centroid of a 20x20 solid square is (10,10)
    const ScenePlan plan = make_plan({make_placement(0, ax, ay, 20.0, 0)});
    const CompositeScene scene = render_scene(plan, bank, bg, cfg);

    REQUIRE(scene.labels.labels.size() == 1);
    REQUIRE(scene.visibility.size() == 1);
    CHECK(scene.visibility[0] == 1.0);
    CHECK(scene.drops.empty());

    const int ox = int(std::lround(ax - 10.0)), oy = int(std::lround(ay - 10.0));
    const AxisBox& ab = scene.labels.labels[0].abox;
    CHECK(ab.x_min == doctest::Approx(ox).epsilon(1e-12));
    CHECK(ab.y_min == doctest::Approx(oy).epsilon(1e-12));
    CHECK(ab.x_max == doctest::Approx(ox + 20).epsilon(1e-12));
    CHECK(ab.y_max == doctest::Approx(oy + 20).epsilon(1e-12));

    // pasted pixels carry the sprite color, everything else the background
    for (int y = 0; y < 100; ++y)
        for (int x = 0; x < 100; ++x) {
            const bool inside = x >= ox && x < ox + 20 && y >= oy && y < oy + 20;
            CHECK(scene.image.at(x, y, 0) == (inside ? 240 : 10));
        }

    // oriented corners stay inside the canvas
    for (const Vec2& c : scene.labels.labels[0].corners) {
        CHECK(c.x >= 0.0);
        CHECK(c.x <= 100.0);
        CHECK(c.y >= 0.0);
        CHECK(c.y <= 100.0);
    }
}

TEST_CASE("painter order puts lower depth_rank on top and visibility is exact") {
    const RasterImage bg = flat_background(100, 100, 0, 0, 0);
    const std::vector<Sprite> bank{solid_sprite(40, 200, 0, 0),  // far, red
                                   solid_sprite(20, 0, 200, 0)}; // near, green
    ComposeConfig cfg = small_cfg();
    cfg.feather_edges = false;

    const ScenePlan plan = make_plan({
        make_placement(0, 50.0, 50.0, 40.0, 1), // far
        make_placement(1, 50.0, 50.0, 20.0, 0), // near, same center
    });
    const CompositeScene scene = render_scene(plan, bank, bg, cfg);

    REQUIRE(scene.labels.labels.size() == 2);
    // labels keep plan order: index 0 is the far placement
    CHECK(scene.visibility[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(scene.visibility[1] == 1.0);
    CHECK(scene.plan.placements[0].depth_rank == 1);

    CHECK(scene.image.at(50, 50, 1) == 200); // near sprite wins the overlap
    CHECK(scene.image.at(50, 50, 0) == 0);
    CHECK(scene.image.at(32, 32, 0) == 200); // far-only pixel stays red
    CHECK(scene.image.at(5, 5, 0) == 0);     // background untouched
}

TEST_CASE("half overlap at integer offsets yields visibility one half") {
    const RasterImage bg = flat_background(100, 100, 0, 0, 0);
    const std::vector<Sprite> bank{solid_sprite(20, 200, 0, 0), solid_sprite(20, 0, 200, 0)};
    ComposeConfig cfg = small_cfg();
    cfg.feather_edges = false;

    const ScenePlan plan = make_plan({
        make_placement(0, 40.0, 50.0, 20.0, 1),
        make_placement(1, 50.0, 50.0, 20.0, 0), // shifted 10 px: covers half
    });
    const CompositeScene scene = render_scene(plan, bank, bg, cfg);
    REQUIRE(scene.visibility.size() == 2);
    CHECK(scene.visibility[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(scene.visibility[1] == 1.0);
}

TEST_CASE("fully hidden placement is dropped after exhausting repairs") {
    // the near sprite covers the whole canvas, so no repair anchor can help
    const RasterImage bg = flat_background(30, 30, 0, 0, 0);
    const std::vector<Sprite> bank{solid_sprite(30, 200, 0, 0), solid_sprite(10, 0, 200, 0)};
    const ScenePlan plan = make_plan({
        make_placement(0, 15.0, 15.0, 30.0, 0),
        make_placement(1, 15.0, 15.0, 10.0, 1),
    });
    const CompositeScene scene = render_scene(plan, bank, bg, small_cfg());
    REQUIRE(scene.drops.size() == 1);
    CHECK(scene.drops[0].placement_index == 1);
    CHECK(scene.drops[0].reason == "visibility");
    CHECK(scene.labels.labels.size() == 1);
    CHECK(scene.plan.placements.size() == 1);
    CHECK(scene.visibility[0] == 1.0);
}

TEST_CASE("render_scene rejects an empty plan") {
    const RasterImage bg = flat_background(50, 50, 0, 0, 0);
    const std::vector<Sprite> bank{solid_sprite(10, 1, 2, 3)};
    CHECK_THROWS_AS(render_scene(make_plan({}), bank, bg, small_cfg()), SceneRejected);
}

TEST_CASE("compute_visibility counts covered foreground exactly") {
    BinaryMask fg(8, 8), cover(8, 8);
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) fg.at(x, y) = 1;
    CHECK(compute_visibility(fg, cover) == 1.0);

    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) cover.at(x, y) = 1;
    CHECK(compute_visibility(fg, cover) == 0.0);

    BinaryMask checker(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) checker.at(x, y) = uint8_t((x + y) % 2);
    CHECK(compute_visibility(fg, checker) == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(compute_visibility(BinaryMask(8, 8), cover), EmptyMask);
    CHECK_THROWS_AS(compute_visibility(fg, BinaryMask(4, 4)), Error);
}

TEST_CASE("feathering averages boundary pixels with the background") {
    const RasterImage bg = flat_background(60, 60, 100, 100, 100);
    const std::vector<Sprite> bank{solid_sprite(20, 200, 200, 200)};
    const ScenePlan plan = make_plan({make_placement(0, 30.0, 30.0, 20.0, 0)});

    ComposeConfig feathered = small_cfg();
    feathered.feather_edges = true;
    const CompositeScene on = render_scene(plan, bank, bg, feathered);
    const int ox = int(std::lround(30.0 - 10.0));
    CHECK(on.image.at(ox, ox, 0) == 150);          // corner: 0.5*200 + 0.5*100
    CHECK(on.image.at(ox + 5, ox + 5, 0) == 200);  // interior untouched

    ComposeConfig hard = small_cfg();
    hard.feather_edges = false;
    const CompositeScene off = render_scene(plan, bank, bg, hard);
    CHECK(off.image.at(ox, ox, 0) == 200);
}

TEST_CASE("plan text round-trips exactly and rejects malformed input") {
    const RasterImage bg = flat_background(200, 200, 90, 120, 80);
    const std::vector<Sprite> bank{solid_sprite(20, 200, 50, 50),
                                   solid_sprite(24, 50, 200, 50)};
    const ScenePlan plan = plan_scene(bg, 5, bank, Pattern::group, 4242, small_cfg());
    const std::string text = serialize_plan(plan);
    const ScenePlan back = parse_plan(text);
    CHECK(back.background_id == plan.background_id);
    CHECK(back.pattern == plan.pattern);
    CHECK(back.seed == plan.seed);
    CHECK(back.min_visibility == plan.min_visibility);
    CHECK(back.max_occluded_visibility == plan.max_occluded_visibility);
    REQUIRE(back.placements.size() == plan.placements.size());
    for (size_t i = 0; i < plan.placements.size(); ++i) {
        CHECK(back.placements[i].sprite_id == plan.placements[i].sprite_id);
        CHECK(back.placements[i].anchor_x == plan.placements[i].anchor_x);
        CHECK(back.placements[i].anchor_y == plan.placements[i].anchor_y);
        CHECK(back.placements[i].scale == plan.placements[i].scale);
        CHECK(back.placements[i].orientation_deg == plan.placements[i].orientation_deg);
        CHECK(back.placements[i].depth_rank == plan.placements[i].depth_rank);
        CHECK(back.placements[i].field == plan.placements[i].field);
    }
    CHECK(serialize_plan(back) == text);

    CHECK_THROWS_AS(parse_plan("scene_plan v2\n"), Error);
    CHECK_THROWS_AS(parse_plan("scene_plan v1\nbackground 0\n"), Error);
    std::string bad = text;
    bad.replace(bad.find("\np "), 3, "\nq ");
    CHECK_THROWS_AS(parse_plan(bad), Error);
}

TEST_CASE("generate_batch is deterministic and worker-invariant") {
    const std::vector<RasterImage> backgrounds{flat_background(120, 120, 90, 120, 80),
                                               flat_background(120, 120, 70, 110, 60)};
    std::vector<Sprite> bank;
    bank.push_back(solid_sprite(16, 210, 205, 195));
    bank.push_back(solid_sprite(14, 95, 62, 42));
    bank.push_back(solid_sprite(18, 120, 120, 170));
    ComposeConfig cfg;
    cfg.fields = {{"near", 30.0, 40.0}, {"far", 18.0, 24.0}};
    cfg.field_weights = {1.0, 1.0};
    cfg.group_min = 3;
    cfg.group_max = 5;
    cfg.individual_min = 1;
    cfg.individual_max = 3;

    struct Captured {
        std::vector<uint8_t> pixels;
        std::string plan;
        std::vector<double> vis;
    };
    auto run = [&](int workers) {
        std::map<int, Captured> out;
        const BatchStats st = generate_batch(
            backgrounds, bank, 20, 31337, cfg,
            [&](int idx, const CompositeScene& scene) {
                out[idx] = {scene.image.data, serialize_plan(scene.plan), scene.visibility};
            },
            workers);
        CHECK(st.attempted == 20);
        CHECK(st.rendered + st.rejected == 20);
        CHECK(int(out.size()) == st.rendered);
        return out;
    };

    const auto a = run(1);
    const auto b = run(1);
    const auto c = run(3);
    REQUIRE(!a.empty());
    REQUIRE(a.size() == b.size());
    REQUIRE(a.size() == c.size());
    for (const auto& [idx, cap] : a) {
        CHECK(idx >= 0);
        CHECK(idx < 20);
        REQUIRE(b.count(idx) == 1);
        REQUIRE(c.count(idx) == 1);
        CHECK(b.at(idx).pixels == cap.pixels);
        CHECK(b.at(idx).plan == cap.plan);
        CHECK(c.at(idx).pixels == cap.pixels);
        CHECK(c.at(idx).plan == cap.plan);
        CHECK(c.at(idx).vis == cap.vis);
        for (double v : cap.vis) {
            const bool unoccluded = v == 1.0;
            const bool banded = v >= cfg.min_visibility - 1e-12 &&
                                v <= cfg.max_occluded_visibility + 1e-12;
            CHECK((unoccluded || banded));
        }
    }
}

TEST_CASE("generate_batch handles a single scene and counts infeasible ones") {
    const std::vector<RasterImage> backgrounds{flat_background(120, 120, 90, 120, 80)};
    const std::vector<Sprite> bank{solid_sprite(16, 210, 205, 195)};
    ComposeConfig cfg;
    cfg.fields = {{"near", 30.0, 40.0}};
    cfg.field_weights = {1.0};
    cfg.group_min = 2;
    cfg.group_max = 3;

    int calls = 0;
    const BatchStats one = generate_batch(
        backgrounds, bank, 1, 7, cfg, [&](int, const CompositeScene&) { ++calls; }, 1);
    CHECK(one.attempted == 1);
    CHECK(one.rendered + one.rejected == 1);
    CHECK(calls == one.rendered);

    // canvas smaller than every drawable scale: every scene is infeasible
    const std::vector<RasterImage> tiny{flat_background(20, 20, 90, 120, 80)};
    int tiny_calls = 0;
    const BatchStats st = generate_batch(
        tiny, bank, 8, 7, cfg, [&](int, const CompositeScene&) { ++tiny_calls; }, 2);
    CHECK(st.rendered == 0);
    CHECK(st.rejected == 8);
    CHECK(tiny_calls == 0);
}
