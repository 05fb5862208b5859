#include <cmath>
#include <set>

#include <doctest.h>

#include "herdgen/labels.hpp"
#include "herdgen/manifest.hpp"
#include "herdgen/rng.hpp"

using namespace herdgen;

TEST_CASE("parse_labels axis grammar") {
    const LabelSet s = parse_labels("0 0.5 0.5 0.2 0.2\n", 100, 100, LabelKind::axis);
    REQUIRE(s.labels.size() == 1);
    const AxisBox b = s.labels[0].abox;
    CHECK(b.x_min == doctest::Approx(40));
    CHECK(b.y_min == doctest::Approx(40));
    CHECK(b.x_max == doctest::Approx(60));
    CHECK(b.y_max == doctest::Approx(60));
}

TEST_CASE("parse_labels empty file and range errors") {
    CHECK(parse_labels("", 100, 100, LabelKind::axis).labels.empty());
    CHECK_THROWS_AS(parse_labels("0 0.5 0.5 1.5 0.2\n", 100, 100, LabelKind::axis),
                    RangeError);
    CHECK_THROWS_AS(parse_labels("0 0.5 0.5\n", 100, 100, LabelKind::axis), ParseError);
    CHECK_THROWS_AS(parse_labels("x 0.5 0.5 0.2 0.2\n", 100, 100, LabelKind::axis),
                    ParseError);
}

TEST_CASE("write_labels round-trips randomized label sets") {
    Rng rng(11);
    for (int kind_i = 0; kind_i < 2; ++kind_i) {
        const LabelKind kind = kind_i == 0 ? LabelKind::axis : LabelKind::obb;
        LabelSet s;
        s.img_w = 640;
        s.img_h = 480;
        for (int i = 0; i < 12; ++i) {
            if (kind == LabelKind::axis) {
                AxisBox b;
                b.x_min = rng.uniform(0, 500);
                b.y_min = rng.uniform(0, 380);
                b.x_max = b.x_min + rng.uniform(5, 120);
                b.y_max = b.y_min + rng.uniform(5, 90);
                s.labels.push_back(make_axis_label(int(rng.bounded(3)), b));
            } else {
                OrientedBox b;
                b.center_x = rng.uniform(100, 540);
                b.center_y = rng.uniform(100, 380);
                b.width = rng.uniform(10, 120);
                b.height = rng.uniform(10, 90);
                b.angle = rng.uniform(-1.5, 1.5);
                s.labels.push_back(make_oriented_label(int(rng.bounded(3)), b));
            }
        }
        const std::string text = write_labels(s, kind);
        const LabelSet back = parse_labels(text, s.img_w, s.img_h, kind);
        REQUIRE(back.labels.size() == s.labels.size());
        // 6-decimal normalized formatting: pixel error bounded by 5e-7 * dim
        for (size_t i = 0; i < s.labels.size(); ++i) {
            CHECK(back.labels[i].class_id == s.labels[i].class_id);
            if (kind == LabelKind::axis) {
                CHECK(std::abs(back.labels[i].abox.x_min - s.labels[i].abox.x_min) < 1e-3);
                CHECK(std::abs(back.labels[i].abox.y_max - s.labels[i].abox.y_max) < 1e-3);
            } else {
                for (int c = 0; c < 4; ++c) {
                    CHECK(std::abs(back.labels[i].corners[c].x -
                                   s.labels[i].corners[c].x) < 1e-3);
                    CHECK(std::abs(back.labels[i].corners[c].y -
                                   s.labels[i].corners[c].y) < 1e-3);
                }
            }
        }
        // second pass is bit-stable (fixed formatting)
        CHECK(write_labels(back, kind) == text);
    }
}

TEST_CASE("write_labels stated trivials") {
    LabelSet empty;
    empty.img_w = empty.img_h = 10;
    CHECK(write_labels(empty, LabelKind::axis).empty());

    LabelSet one;
    one.img_w = one.img_h = 100;
    one.labels.push_back(make_axis_label(0, {10, 10, 30, 30}));
    const std::string text = write_labels(one, LabelKind::axis);
    CHECK(text.find('\n') == text.size() - 1);
    int fields = 1;
    for (char c : text)
        if (c == ' ') fields++;
    CHECK(fields == 5);
}

TEST_CASE("prediction confidences parse and default") {
    std::vector<double> conf;
    const LabelSet s = parse_labels("0 0.5 0.5 0.2 0.2 0.75\n0 0.2 0.2 0.1 0.1\n", 100,
                                    100, LabelKind::axis, &conf);
    REQUIRE(s.labels.size() == 2);
    REQUIRE(conf.size() == 2);
    CHECK(conf[0] == doctest::Approx(0.75));
    CHECK(conf[1] == doctest::Approx(1.0));
    // strict mode refuses the trailing field
    CHECK_THROWS_AS(parse_labels("0 0.5 0.5 0.2 0.2 0.75\n", 100, 100, LabelKind::axis),
                    ParseError);
}

TEST_CASE("manifest round-trip and sorted order") {
    DatasetManifest m;
    m.seed = 99;
    m.entries = {{"images/b.png", "labels/b.txt", Split::train},
                 {"images/a.png", "labels/a.txt", Split::test},
                 {"images/c.png", "labels/c.txt", Split::train}};
    const std::string text = write_manifest(m);
    const DatasetManifest back = parse_manifest(text);
    REQUIRE(back.entries.size() == 3);
    CHECK(back.seed == 99);
    CHECK(back.entries[0].image_path == "images/a.png");
    CHECK(back.entries[0].split == Split::test);
    CHECK(back.entries[1].image_path == "images/b.png");
    CHECK(back.entries[2].image_path == "images/c.png");
}

TEST_CASE("split_dataset stated counts") {
    DatasetManifest m;
    for (int i = 0; i < 137; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "images/img_%03d.png", i);
        m.entries.push_back({buf, "labels/x.txt", Split::train});
    }
    const DatasetManifest s = split_dataset(m, 0.1, 2026);
    int train = 0, test = 0;
    for (const auto& e : s.entries) (e.split == Split::train ? train : test)++;
    CHECK(train == 123);
    CHECK(test == 14);

    // determinism: same seed -> identical assignment
    const DatasetManifest s2 = split_dataset(m, 0.1, 2026);
    for (size_t i = 0; i < s.entries.size(); ++i)
        CHECK(s.entries[i].split == s2.entries[i].split);

    // partition: train ∪ test = all, train ∩ test = ∅ (by construction each
    // entry has exactly one split; check the sets of paths)
    std::set<std::string> all;
    for (const auto& e : s.entries) all.insert(e.image_path);
    CHECK(all.size() == 137);
}

TEST_CASE("split_dataset N=10 fraction 0.1 and tiny-input error") {
    DatasetManifest m;
    for (int i = 0; i < 10; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "images/i%d.png", i);
        m.entries.push_back({buf, "labels/x.txt", Split::train});
    }
    const DatasetManifest s = split_dataset(m, 0.1, 5);
    int test = 0;
    for (const auto& e : s.entries)
        if (e.split == Split::test) test++;
    CHECK(test == 1);

    DatasetManifest one;
    one.entries = {{"images/only.png", "labels/only.txt", Split::train}};
    CHECK_THROWS_AS(split_dataset(one, 0.1, 5), TooFewImages);
}
