#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "herdgen/pipeline.hpp"

using namespace herdgen;

namespace {

struct CliState {
    std::string config_path;
    std::string preset;
    uint64_t seed = 0;
    int workers = 0;
    int count = 0;
    bool skip_diffusion = false;
    std::string pred_dir;
    std::string gt_dir;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"herdgen: synthetic aerial-livestock detection dataset generator"};
    app.require_subcommand(1);
    app.fallthrough();

    CliState st;
    app.add_option("--config", st.config_path, "pipeline config (JSON)")->required();
    auto* seed_opt = app.add_option("--seed", st.seed, "override master seed");
    auto* workers_opt =
        app.add_option("--workers", st.workers, "worker threads")->check(CLI::Range(1, 256));
    app.add_option("--preset", st.preset, "parameter preset: paper | desk");

    CLI::App* c_extract = app.add_subcommand("extract", "crop sprites, mask scenes, split");
    CLI::App* c_recreate = app.add_subcommand("recreate", "fill masked holes into backgrounds");
    CLI::App* c_augment = app.add_subcommand("augment", "build the augmented sprite bank");
    CLI::App* c_train = app.add_subcommand("train-diffusion", "train the sprite denoiser");
    CLI::App* c_sample = app.add_subcommand("sample", "draw sprites from the checkpoint");
    CLI::App* c_compose = app.add_subcommand("compose", "render occlusion-aware scenes");
    CLI::App* c_eval = app.add_subcommand("evaluate", "score predictions against labels");
    CLI::App* c_pipe = app.add_subcommand("pipeline", "run every stage in order");

    auto* count_sample = c_sample->add_option("--count", st.count, "samples to draw")
                             ->check(CLI::PositiveNumber);
    auto* count_compose = c_compose->add_option("--count", st.count, "scenes to attempt")
                              ->check(CLI::PositiveNumber);
    auto* count_pipe = c_pipe->add_option("--count", st.count, "scenes to attempt")
                           ->check(CLI::PositiveNumber);
    c_compose->add_flag("--skip-diffusion", st.skip_diffusion,
                        "compose from augmented sprites only");
    c_pipe->add_flag("--skip-diffusion", st.skip_diffusion,
                     "omit the train/sample stages");
    c_eval->add_option("--pred", st.pred_dir, "prediction label directory")->required();
    c_eval->add_option("--gt", st.gt_dir, "ground-truth label directory (default: composed)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        PipelineConfig cfg = load_config(st.config_path);
        apply_preset(cfg, st.preset);
        apply_env_overrides(cfg);
        if (seed_opt->count()) cfg.master_seed = st.seed;
        if (workers_opt->count()) cfg.workers = st.workers;
        if (count_sample->count()) cfg.diffusion.sample_count = st.count;
        if (count_compose->count() || count_pipe->count()) cfg.scene_count = st.count;

        if (c_extract->parsed()) {
            const ExtractStats s = run_extract(cfg);
            std::printf("extract: %d images (%d train), %d sprites, %d rejected\n", s.images,
                        s.train_images, s.sprites, s.rejected);
        } else if (c_recreate->parsed()) {
            const RecreateStats s = run_recreate(cfg);
            std::printf("recreate: %d backgrounds, %d filled regions\n", s.backgrounds,
                        s.regions);
        } else if (c_augment->parsed()) {
            const AugmentStats s = run_augment(cfg);
            std::printf("augment: %d originals + %d variants\n", s.originals, s.variants);
        } else if (c_train->parsed()) {
            const TrainStats s = run_train(cfg);
            std::printf("train: %d steps, loss %.6g -> %.6g\n", s.steps, s.first_loss,
                        s.final_loss);
        } else if (c_sample->parsed()) {
            const SampleStats s = run_sample(cfg);
            std::printf("sample: %d generated, %d rejected, %d diverged\n", s.generated,
                        s.rejected, s.diverged);
        } else if (c_compose->parsed()) {
            const ComposeStats s = run_compose(cfg, !st.skip_diffusion);
            std::printf("compose: %d attempted, %d rendered, %d rejected, %d dropped "
                        "(bank %d)\n",
                        s.batch.attempted, s.batch.rendered, s.batch.rejected,
                        s.batch.placements_dropped, s.bank_size);
        } else if (c_eval->parsed()) {
            const MetricsReport r = run_evaluate(cfg, st.pred_dir, st.gt_dir);
            std::fputs(format_report(r).c_str(), stdout);
        } else if (c_pipe->parsed()) {
            const auto times = run_pipeline(cfg, st.skip_diffusion);
            double total = 0.0;
            for (const StageTiming& t : times) {
                std::printf("stage %-8s wall_ms %.3f\n", t.stage.c_str(), t.wall_ms);
                total += t.wall_ms;
            }
            std::printf("pipeline total wall_ms %.3f\n", total);
        }
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const MissingInput& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
