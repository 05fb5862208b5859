#pragma once

#include <cstdint>
#include <string>

#include "herdgen/augment.hpp"
#include "herdgen/compose.hpp"
#include "herdgen/labels.hpp"

namespace herdgen {

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct DatasetConfig {
    LabelKind label_kind = LabelKind::obb;
    double test_fraction = 0.1;
};

struct ExtractConfig {
    int min_foreground_pixels = kDefaultMinForegroundPixels;
    double tau = 3.0;
    int border_ring = 2;
    std::string segmenter = "baseline"; // "baseline" or "import"
    std::string mask_dir;               // required for "import"
};

struct BackgroundConfig {
    double blur_sigma = 2.0;
    int blur_radius = 6;
    int border_width = 1;
};

struct DiffusionTrainConfig {
    int resolution = 64;
    int timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    int base_channels = 12;
    int levels = 3;
    int temb_dim = 32;
    double lr = 2e-4;
    int batch_size = 128;
    int train_steps = 2000;
    int sample_count = 64;
};

struct EvalConfig {
    double iou_threshold = 0.5;
    LabelKind kind = LabelKind::obb;
};

struct PipelineConfig {
    std::string dataset_root;
    std::string output_root;
    uint64_t master_seed = 0;
    int workers = 1;
    DatasetConfig dataset;
    ExtractConfig extract;
    BackgroundConfig background;
    AugmentConfig augment;
    int augment_variants = 4; // augmented copies per extracted sprite
    DiffusionTrainConfig diffusion;
    ComposeConfig compose;
    int scene_count = 1000;
    EvalConfig eval;
};

// Strict loader: unknown keys and out-of-range values are ConfigError. The
// bound-type parameters (visibility band, scale fields, contrast/rotation
// ranges, noise schedule) must be stated explicitly in the file.
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::string& path);

// "paper" is a no-op; "desk" shrinks the diffusion stage and scene count to
// CI scale (R=16, T=100, 200 steps, batch 32, lr 1e-3, 50 scenes).
void apply_preset(PipelineConfig& cfg, const std::string& name);

// HERDGEN_SEED, HERDGEN_WORKERS, HERDGEN_DATASET_ROOT, HERDGEN_OUTPUT_ROOT.
void apply_env_overrides(PipelineConfig& cfg);

// Canonical JSON dump of every output-determining value (sorted keys);
// hashed into the stage manifests. Roots and worker count are excluded —
// they locate artifacts or split work without changing bytes.
std::string canonical_config(const PipelineConfig& cfg);
uint64_t config_hash(const PipelineConfig& cfg);

} // namespace herdgen
