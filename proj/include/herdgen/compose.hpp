#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "herdgen/labels.hpp"
#include "herdgen/sprite.hpp"

namespace herdgen {

struct SceneInfeasible : Error {
    explicit SceneInfeasible(const std::string& msg) : Error(msg) {}
};
struct SceneRejected : Error {
    explicit SceneRejected(const std::string& msg) : Error(msg) {}
};

enum class Pattern { group, individual };

const char* pattern_name(Pattern p);

// Pixel interval for a sprite's longer side, before jitter.
struct ScaleField {
    std::string name;
    double min_px = 0.0;
    double max_px = 0.0;
};

struct ComposeConfig {
    std::vector<ScaleField> fields = {
        {"near", 450.0, 500.0}, {"mid", 300.0, 350.0}, {"far", 180.0, 200.0}};
    std::vector<double> field_weights = {1.0, 1.0, 1.0};
    double scale_jitter = 0.05;          // +/- ratio applied to the drawn scale
    int group_min = 6, group_max = 10;   // animals per group scene
    int individual_min = 1, individual_max = 5;
    double spacing_min = 0.6, spacing_max = 1.5; // x mean scale, center distances
    double p_group = 0.7;                // pattern mix
    double min_visibility = 0.10;
    double max_occluded_visibility = 0.90;
    int max_repair_attempts = 20;
    bool feather_edges = true; // 1-px alpha ramp at mask boundaries
};

struct Placement {
    int sprite_id = 0;
    double anchor_x = 0.0, anchor_y = 0.0; // canvas position of mask centroid
    double scale = 0.0;                    // longer-side target, pixels
    double orientation_deg = 0.0;          // [0, 360)
    int depth_rank = 0;                    // lower = nearer, drawn last
    std::string field;                     // scale field the placement drew from
};

struct ScenePlan {
    int background_id = 0;
    Pattern pattern = Pattern::group;
    std::vector<Placement> placements;
    uint64_t seed = 0;
    double min_visibility = 0.10;
    double max_occluded_visibility = 0.90;
};

struct DropRecord {
    int placement_index = 0;
    std::string reason;
};

struct CompositeScene {
    RasterImage image;
    LabelSet labels;                // one entry per surviving placement
    std::vector<double> visibility; // aligned with labels
    ScenePlan plan;                 // survivors only, post-repair anchors
    std::vector<DropRecord> drops;
};

ScenePlan plan_scene(const RasterImage& background, int background_id,
                     const std::vector<Sprite>& bank, Pattern pattern, uint64_t seed,
                     const ComposeConfig& cfg = {});

CompositeScene render_scene(const ScenePlan& plan, const std::vector<Sprite>& bank,
                            const RasterImage& background,
                            const ComposeConfig& cfg = {});

// Fraction of `fg` left uncovered by the union of strictly nearer foregrounds.
double compute_visibility(const BinaryMask& fg, const BinaryMask& nearer_union);

std::string serialize_plan(const ScenePlan& plan);
ScenePlan parse_plan(const std::string& text);

struct BatchStats {
    int attempted = 0;
    int rendered = 0;
    int rejected = 0;
    int placements_dropped = 0;
};

// Generates scenes for indices [0, count); per-scene streams derive from
// (master_seed, index) so any worker count yields identical scenes. The sink
// runs under a lock; rejected indices are skipped and counted.
BatchStats generate_batch(const std::vector<RasterImage>& backgrounds,
                          const std::vector<Sprite>& bank, int count,
                          uint64_t master_seed, const ComposeConfig& cfg,
                          const std::function<void(int, const CompositeScene&)>& sink,
                          int workers = 1);

} // namespace herdgen
