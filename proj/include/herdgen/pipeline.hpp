#pragma once

#include <string>
#include <vector>

#include "herdgen/compose.hpp"
#include "herdgen/config.hpp"
#include "herdgen/eval.hpp"

namespace herdgen {

struct MissingInput : Error {
    explicit MissingInput(const std::string& msg) : Error(msg) {}
};

// Output tree under output_root:
//   dataset_manifest.txt            split corpus index
//   masked/<stem>_masked.png/.txt   holes sidecar alongside each masked scene
//   sprites_raw/ sprites/ generated/  sprite stores (png + _mask.png + _prov.txt)
//   backgrounds/<stem>_bg.png
//   diffusion/checkpoint.bin
//   scenes/{images,labels,labels_obb,plans}/synth_NNNNNN.*
//   manifests/<stage>.txt           input/output hashes + config hash + seed
//   logs/                           timing and training curves; the only
//                                   directory whose bytes may differ between
//                                   identical runs
struct ExtractStats {
    int images = 0;
    int train_images = 0;
    int sprites = 0;
    int rejected = 0;
};
struct RecreateStats {
    int backgrounds = 0;
    int regions = 0;
};
struct AugmentStats {
    int originals = 0;
    int variants = 0;
};
struct TrainStats {
    int steps = 0;
    double first_loss = 0.0;
    double final_loss = 0.0;
};
struct SampleStats {
    int generated = 0;
    int rejected = 0;
    int diverged = 0;
};
struct ComposeStats {
    BatchStats batch;
    int bank_size = 0;
};

// Each stage validates its inputs (MissingInput names what is absent), wipes
// and rewrites its own output directories, and records a stage manifest, so
// a rerun with identical inputs is bit-identical.
ExtractStats run_extract(const PipelineConfig& cfg);
RecreateStats run_recreate(const PipelineConfig& cfg);
AugmentStats run_augment(const PipelineConfig& cfg);
TrainStats run_train(const PipelineConfig& cfg);
SampleStats run_sample(const PipelineConfig& cfg);
ComposeStats run_compose(const PipelineConfig& cfg, bool use_generated);
// gt_dir empty -> the label directory composed by this pipeline.
MetricsReport run_evaluate(const PipelineConfig& cfg, const std::string& pred_dir,
                           const std::string& gt_dir = "");

struct StageTiming {
    std::string stage;
    double wall_ms = 0.0;
};

// extract -> recreate -> augment -> [train -> sample] -> compose.
std::vector<StageTiming> run_pipeline(const PipelineConfig& cfg,
                                      bool skip_diffusion = false);

// Sprite store: <base>.png, <base>_mask.png, <base>_prov.txt.
void save_sprite_files(const std::string& dir, const std::string& base,
                       const Sprite& sprite);
Sprite load_sprite_files(const std::string& png_path);
// Every non-mask PNG in the directory, sorted by filename.
std::vector<Sprite> load_sprite_dir(const std::string& dir);

} // namespace herdgen
