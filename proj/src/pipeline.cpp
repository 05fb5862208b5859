#include "herdgen/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "herdgen/augment.hpp"
#include "herdgen/background.hpp"
#include "herdgen/diffusion.hpp"
#include "herdgen/hashing.hpp"
#include "herdgen/manifest.hpp"
#include "herdgen/png_io.hpp"
#include "herdgen/rng.hpp"
#include "herdgen/tensor.hpp"

namespace fs = std::filesystem;

namespace herdgen {

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw MissingInput("missing stage input: " + p.generic_string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.generic_string());
    out << text;
    out.flush();
    if (!out) throw Error("write failed: " + p.generic_string());
}

void reset_dir(const fs::path& p) {
    fs::remove_all(p);
    fs::create_directories(p);
}

// `name` keeps the user-facing relative form (e.g. "backgrounds/") so the
// diagnostic says which stage output is absent.
void require_dir(const fs::path& p, const std::string& name, const std::string& hint) {
    if (!fs::is_directory(p))
        throw MissingInput("missing stage input: " + name + " under " +
                           p.parent_path().generic_string() + " (" + hint + ")");
}

void require_file(const fs::path& p, const std::string& name, const std::string& hint) {
    if (!fs::is_regular_file(p))
        throw MissingInput("missing stage input: " + name + " at " + p.generic_string() +
                           " (" + hint + ")");
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& suffix) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string name = e.path().filename().string();
        if (name.size() >= suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct StageRecord {
    std::string stage;
    uint64_t seed = 0;
    std::vector<std::pair<std::string, uint64_t>> inputs;
    std::vector<std::string> output_paths; // relative to output_root
    std::vector<std::pair<std::string, std::string>> stats;
};

void write_stage_record(const PipelineConfig& cfg, const StageRecord& rec) {
    const fs::path root = cfg.output_root;
    std::vector<std::pair<std::string, uint64_t>> outputs;
    for (const std::string& rel : rec.output_paths) {
        const fs::path p = root / rel;
        if (fs::is_regular_file(p)) {
            outputs.emplace_back(rel, hash_file(p.string()));
        } else if (fs::is_directory(p)) {
            for (const auto& e : fs::recursive_directory_iterator(p)) {
                if (!e.is_regular_file()) continue;
                outputs.emplace_back(fs::relative(e.path(), root).generic_string(),
                                     hash_file(e.path().string()));
            }
        }
    }
    std::sort(outputs.begin(), outputs.end());

    std::ostringstream ss;
    ss << "stage " << rec.stage << "\n";
    ss << "config " << hash_hex(config_hash(cfg)) << "\n";
    ss << "seed " << rec.seed << "\n";
    for (const auto& [name, h] : rec.inputs)
        ss << "input " << name << " " << hash_hex(h) << "\n";
    for (const auto& [rel, h] : outputs) ss << "output " << rel << " " << hash_hex(h) << "\n";
    for (const auto& [k, v] : rec.stats) ss << "stat " << k << " " << v << "\n";

    fs::create_directories(root / "manifests");
    spit(root / "manifests" / (rec.stage + ".txt"), ss.str());
}

std::string prov_text(const Sprite& s) {
    std::ostringstream ss;
    ss << "sprite v1\n";
    ss << "source " << s.source_image << "\n";
    ss << "index " << s.source_index << "\n";
    char buf[160];
    std::snprintf(buf, sizeof buf, "box %.17g %.17g %.17g %.17g\n", s.source_box.x_min,
                  s.source_box.y_min, s.source_box.x_max, s.source_box.y_max);
    ss << buf;
    ss << "transforms " << s.transform_log.size() << "\n";
    for (const auto& t : s.transform_log) {
        std::snprintf(buf, sizeof buf, "t %s %.17g\n", t.kind.c_str(), t.value);
        ss << buf;
    }
    return ss.str();
}

void parse_prov(const std::string& text, const std::string& path, Sprite& s) {
    std::istringstream in(text);
    std::string line;
    auto bad = [&](const std::string& why) -> Error {
        return Error("provenance " + path + ": " + why);
    };
    if (!std::getline(in, line) || line != "sprite v1") throw bad("bad header");
    if (!std::getline(in, line) || line.rfind("source ", 0) != 0) throw bad("bad source");
    s.source_image = line.substr(7);
    if (!std::getline(in, line) || line.rfind("index ", 0) != 0) throw bad("bad index");
    s.source_index = std::stoi(line.substr(6));
    if (!std::getline(in, line) ||
        std::sscanf(line.c_str(), "box %lg %lg %lg %lg", &s.source_box.x_min,
                    &s.source_box.y_min, &s.source_box.x_max, &s.source_box.y_max) != 4)
        throw bad("bad box");
    if (!std::getline(in, line) || line.rfind("transforms ", 0) != 0)
        throw bad("bad transform count");
    const int n = std::stoi(line.substr(11));
    s.transform_log.clear();
    for (int i = 0; i < n; ++i) {
        if (!std::getline(in, line)) throw bad("truncated transforms");
        char kind[64];
        double value = 0.0;
        if (std::sscanf(line.c_str(), "t %63s %lg", kind, &value) != 2)
            throw bad("bad transform line");
        s.transform_log.push_back({kind, value});
    }
}

fs::path mask_path_for(const fs::path& png) {
    fs::path p = png;
    p.replace_extension();
    return p.parent_path() / (p.filename().string() + "_mask.png");
}

fs::path prov_path_for(const fs::path& png) {
    fs::path p = png;
    p.replace_extension();
    return p.parent_path() / (p.filename().string() + "_prov.txt");
}

std::string holes_text(const MaskedScene& scene) {
    std::ostringstream ss;
    ss << "holes v1\n";
    ss << "source " << scene.source_image << "\n";
    ss << "n " << scene.holes.size() << "\n";
    char buf[160];
    for (const AxisBox& b : scene.holes) {
        std::snprintf(buf, sizeof buf, "h %.17g %.17g %.17g %.17g\n", b.x_min, b.y_min,
                      b.x_max, b.y_max);
        ss << buf;
    }
    return ss.str();
}

void parse_holes(const std::string& text, const std::string& path, MaskedScene& scene) {
    std::istringstream in(text);
    std::string line;
    auto bad = [&](const std::string& why) -> Error {
        return Error("holes file " + path + ": " + why);
    };
    if (!std::getline(in, line) || line != "holes v1") throw bad("bad header");
    if (!std::getline(in, line) || line.rfind("source ", 0) != 0) throw bad("bad source");
    scene.source_image = line.substr(7);
    if (!std::getline(in, line) || line.rfind("n ", 0) != 0) throw bad("bad count");
    const int n = std::stoi(line.substr(2));
    scene.holes.clear();
    for (int i = 0; i < n; ++i) {
        AxisBox b;
        if (!std::getline(in, line) ||
            std::sscanf(line.c_str(), "h %lg %lg %lg %lg", &b.x_min, &b.y_min, &b.x_max,
                        &b.y_max) != 4)
            throw bad("bad hole line");
        scene.holes.push_back(b);
    }
}

std::string index_name(const char* prefix, int index) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s_%05d", prefix, index);
    return buf;
}

} // namespace

void save_sprite_files(const std::string& dir, const std::string& base,
                       const Sprite& sprite) {
    const fs::path d = dir;
    write_png((d / (base + ".png")).string(), sprite.patch);
    write_mask_png((d / (base + "_mask.png")).string(), sprite.mask);
    spit(d / (base + "_prov.txt"), prov_text(sprite));
}

Sprite load_sprite_files(const std::string& png_path) {
    Sprite s;
    s.patch = read_png(png_path);
    s.mask = read_mask_png(mask_path_for(png_path).string());
    if (s.mask.width != s.patch.width || s.mask.height != s.patch.height)
        throw Error("sprite mask shape mismatch for " + png_path);
    parse_prov(slurp(prov_path_for(png_path)), png_path, s);
    return s;
}

std::vector<Sprite> load_sprite_dir(const std::string& dir) {
    std::vector<Sprite> out;
    for (const fs::path& p : sorted_files(dir, ".png")) {
        const std::string name = p.filename().string();
        if (name.size() > 9 && name.compare(name.size() - 9, 9, "_mask.png") == 0)
            continue;
        out.push_back(load_sprite_files(p.string()));
    }
    return out;
}

ExtractStats run_extract(const PipelineConfig& cfg) {
    const fs::path droot = cfg.dataset_root;
    const std::string label_dir =
        cfg.dataset.label_kind == LabelKind::obb ? "labels_obb" : "labels";
    require_dir(droot / "images", "images/", "dataset root needs images/ and labels");
    require_dir(droot / label_dir, label_dir + "/",
                "dataset root needs label files for kind " + label_dir);

    DatasetManifest m;
    m.seed = cfg.master_seed;
    for (const fs::path& img : sorted_files(droot / "images", ".png")) {
        const std::string stem = img.stem().string();
        const fs::path lab = droot / label_dir / (stem + ".txt");
        require_file(lab, label_dir + "/" + stem + ".txt", "every image needs a label file");
        ManifestEntry e;
        e.image_path = "images/" + img.filename().string();
        e.label_path = label_dir + "/" + stem + ".txt";
        m.entries.push_back(e);
    }
    if (m.entries.empty())
        throw MissingInput("missing stage input: no PNG images under " +
                           (droot / "images").generic_string());
    const DatasetManifest split = split_dataset(m, cfg.dataset.test_fraction, cfg.master_seed);

    const fs::path out = cfg.output_root;
    fs::create_directories(out);
    reset_dir(out / "masked");
    reset_dir(out / "sprites_raw");
    save_manifest((out / "dataset_manifest.txt").string(), split);

    ExtractStats stats;
    stats.images = int(split.entries.size());
    int sprite_idx = 0;
    for (const ManifestEntry& entry : split.entries) {
        if (entry.split != Split::train) continue;
        stats.train_images++;
        const RasterImage img = read_png((droot / entry.image_path).string());
        const LabelSet labels = parse_labels(slurp(droot / entry.label_path), img.width,
                                             img.height, cfg.dataset.label_kind);
        auto [sprites, scene] = extract_sprites(img, labels);
        scene.source_image = entry.image_path;

        for (Sprite& raw : sprites) {
            raw.source_image = entry.image_path;
            Sprite seg;
            try {
                if (cfg.extract.segmenter == "import") {
                    fs::path mdir = cfg.extract.mask_dir;
                    if (mdir.is_relative()) mdir = droot / mdir;
                    const std::string stem = fs::path(entry.image_path).stem().string();
                    const fs::path mp =
                        mdir / (stem + "_" + std::to_string(raw.source_index) + "_mask.png");
                    require_file(mp, mp.filename().string(),
                                 "segmenter \"import\" needs one mask per box");
                    seg = import_mask(raw, read_mask_png(mp.string()),
                                      cfg.extract.min_foreground_pixels);
                } else {
                    seg = baseline_segment(raw, cfg.extract.border_ring, cfg.extract.tau,
                                           cfg.extract.min_foreground_pixels);
                }
            } catch (const SegmentationEmpty&) {
                stats.rejected++;
                continue;
            } catch (const MaskTooSmall&) {
                stats.rejected++;
                continue;
            }
            save_sprite_files((out / "sprites_raw").string(),
                              index_name("sprite", sprite_idx++), seg);
            stats.sprites++;
        }

        const std::string stem = fs::path(entry.image_path).stem().string();
        write_png((out / "masked" / (stem + "_masked.png")).string(), scene.background);
        spit(out / "masked" / (stem + "_holes.txt"), holes_text(scene));
    }

    StageRecord rec;
    rec.stage = "extract";
    rec.seed = cfg.master_seed;
    rec.inputs = {{"dataset", hash_tree(droot.string())}};
    rec.output_paths = {"dataset_manifest.txt", "masked", "sprites_raw"};
    rec.stats = {{"images", std::to_string(stats.images)},
                 {"train_images", std::to_string(stats.train_images)},
                 {"sprites", std::to_string(stats.sprites)},
                 {"rejected", std::to_string(stats.rejected)}};
    write_stage_record(cfg, rec);
    return stats;
}

RecreateStats run_recreate(const PipelineConfig& cfg) {
    const fs::path out = cfg.output_root;
    require_dir(out / "masked", "masked/", "run extract first");
    reset_dir(out / "backgrounds");

    RecreateStats stats;
    int idx = 0;
    for (const fs::path& mp : sorted_files(out / "masked", "_masked.png")) {
        std::string stem = mp.filename().string();
        stem.resize(stem.size() - std::string("_masked.png").size());

        MaskedScene scene;
        scene.background = read_png(mp.string());
        const fs::path hp = out / "masked" / (stem + "_holes.txt");
        parse_holes(slurp(hp), hp.generic_string(), scene);

        const auto regions = find_connected_regions(scene);
        FilledBackground bg = fill_from_borders(scene, regions,
                                                mix_seed(cfg.master_seed, 0xb61u, idx),
                                                cfg.background.border_width);
        bg = blur_regions(bg, cfg.background.blur_sigma, cfg.background.blur_radius);
        write_png((out / "backgrounds" / (stem + "_bg.png")).string(), bg.image);
        stats.backgrounds++;
        stats.regions += int(regions.size());
        idx++;
    }
    if (stats.backgrounds == 0)
        throw MissingInput("missing stage input: no *_masked.png under " +
                           (out / "masked").generic_string());

    StageRecord rec;
    rec.stage = "recreate";
    rec.seed = cfg.master_seed;
    rec.inputs = {{"masked", hash_tree((out / "masked").string())}};
    rec.output_paths = {"backgrounds"};
    rec.stats = {{"backgrounds", std::to_string(stats.backgrounds)},
                 {"regions", std::to_string(stats.regions)}};
    write_stage_record(cfg, rec);
    return stats;
}

AugmentStats run_augment(const PipelineConfig& cfg) {
    const fs::path out = cfg.output_root;
    require_dir(out / "sprites_raw", "sprites_raw/", "run extract first");
    reset_dir(out / "sprites");

    const std::vector<Sprite> raw = load_sprite_dir((out / "sprites_raw").string());
    if (raw.empty())
        throw MissingInput("missing stage input: no sprites under " +
                           (out / "sprites_raw").generic_string());

    AugmentStats stats;
    int idx = 0;
    for (size_t i = 0; i < raw.size(); ++i) {
        save_sprite_files((out / "sprites").string(), index_name("sprite", idx++), raw[i]);
        stats.originals++;
        for (int v = 0; v < cfg.augment_variants; ++v) {
            const AugmentationSpec spec =
                sample_spec(mix_seed(cfg.master_seed, 0xa06u, i, uint64_t(v)), cfg.augment);
            save_sprite_files((out / "sprites").string(), index_name("sprite", idx++),
                              apply_spec(raw[i], spec));
            stats.variants++;
        }
    }

    StageRecord rec;
    rec.stage = "augment";
    rec.seed = cfg.master_seed;
    rec.inputs = {{"sprites_raw", hash_tree((out / "sprites_raw").string())}};
    rec.output_paths = {"sprites"};
    rec.stats = {{"originals", std::to_string(stats.originals)},
                 {"variants", std::to_string(stats.variants)}};
    write_stage_record(cfg, rec);
    return stats;
}

TrainStats run_train(const PipelineConfig& cfg) {
    const fs::path out = cfg.output_root;
    require_dir(out / "sprites", "sprites/", "run augment first");
    reset_dir(out / "diffusion");
    fs::create_directories(out / "logs");

    const std::vector<Sprite> bank = load_sprite_dir((out / "sprites").string());
    if (bank.empty())
        throw MissingInput("missing stage input: no sprites under " +
                           (out / "sprites").generic_string());

    std::vector<Tensor> tensors;
    tensors.reserve(bank.size());
    for (const Sprite& s : bank) tensors.push_back(sprite_to_tensor(s, cfg.diffusion.resolution));

    DenoiserConfig dc;
    dc.resolution = cfg.diffusion.resolution;
    dc.in_channels = 3;
    dc.base_channels = cfg.diffusion.base_channels;
    dc.levels = cfg.diffusion.levels;
    dc.temb_dim = cfg.diffusion.temb_dim;
    DenoiserParams params = init_denoiser(dc, mix_seed(cfg.master_seed, 0xd11u));
    AdamState adam = init_adam(params, cfg.diffusion.lr);
    const NoiseSchedule sched =
        make_schedule(cfg.diffusion.timesteps, cfg.diffusion.beta_start, cfg.diffusion.beta_end);

    std::ofstream log(out / "logs" / "train_log.txt", std::ios::trunc);
    log << "# step loss grad_norm wall_ms\n";

    TrainStats stats;
    for (int step = 0; step < cfg.diffusion.train_steps; ++step) {
        Rng pick(mix_seed(cfg.master_seed, 0xba7cu, uint64_t(step)));
        std::vector<Tensor> batch;
        batch.reserve(cfg.diffusion.batch_size);
        for (int b = 0; b < cfg.diffusion.batch_size; ++b)
            batch.push_back(tensors[pick.bounded(tensors.size())]);

        const auto t0 = std::chrono::steady_clock::now();
        const TrainStepResult res =
            train_step(params, adam, batch, sched,
                       mix_seed(cfg.master_seed, 0x57e9u, uint64_t(step)), cfg.workers);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();

        char line[160];
        std::snprintf(line, sizeof line, "%d %.17g %.17g %.3f\n", step + 1, res.loss,
                      res.grad_norm, ms);
        log << line;
        if (step == 0) stats.first_loss = res.loss;
        stats.final_loss = res.loss;
        stats.steps++;
    }
    log.flush();

    Checkpoint ckpt;
    ckpt.params = std::move(params);
    ckpt.adam = std::move(adam);
    ckpt.sched = sched;
    ckpt.train_seed = cfg.master_seed;
    ckpt.steps_done = uint64_t(stats.steps);
    save_checkpoint((out / "diffusion" / "checkpoint.bin").string(), ckpt);

    StageRecord rec;
    rec.stage = "train";
    rec.seed = cfg.master_seed;
    rec.inputs = {{"sprites", hash_tree((out / "sprites").string())}};
    rec.output_paths = {"diffusion"};
    rec.stats = {{"steps", std::to_string(stats.steps)},
                 {"final_loss", fmt("%.17g", stats.final_loss)}};
    write_stage_record(cfg, rec);
    return stats;
}

SampleStats run_sample(const PipelineConfig& cfg) {
    const fs::path out = cfg.output_root;
    const fs::path ckpt_path = out / "diffusion" / "checkpoint.bin";
    require_file(ckpt_path, "diffusion/checkpoint.bin", "run train-diffusion first");
    reset_dir(out / "generated");

    const Checkpoint ckpt = load_checkpoint(ckpt_path.string());
    TensorToSpriteOptions opt;
    opt.border_ring = cfg.extract.border_ring;
    opt.min_foreground_pixels = cfg.extract.min_foreground_pixels;

    SampleStats stats;
    int idx = 0;
    for (int i = 0; i < cfg.diffusion.sample_count; ++i) {
        try {
            const Tensor x =
                reverse_sample(ckpt.params, ckpt.sched, mix_seed(cfg.master_seed, 0x5a17u, i));
            const Sprite sp = tensor_to_sprite(x, opt);
            save_sprite_files((out / "generated").string(), index_name("gen", idx++), sp);
            stats.generated++;
        } catch (const SpriteRejected&) {
            stats.rejected++;
        } catch (const SamplingDiverged&) {
            stats.diverged++;
        }
    }

    StageRecord rec;
    rec.stage = "sample";
    rec.seed = cfg.master_seed;
    rec.inputs = {{"checkpoint", hash_file(ckpt_path.string())}};
    rec.output_paths = {"generated"};
    rec.stats = {{"generated", std::to_string(stats.generated)},
                 {"rejected", std::to_string(stats.rejected)},
                 {"diverged", std::to_string(stats.diverged)}};
    write_stage_record(cfg, rec);
    return stats;
}

ComposeStats run_compose(const PipelineConfig& cfg, bool use_generated) {
    const fs::path out = cfg.output_root;
    require_dir(out / "backgrounds", "backgrounds/", "run recreate first");
    require_dir(out / "sprites", "sprites/", "run augment first");
    if (use_generated)
        require_dir(out / "generated", "generated/",
                    "run sample first or pass --skip-diffusion");

    std::vector<RasterImage> backgrounds;
    for (const fs::path& p : sorted_files(out / "backgrounds", "_bg.png"))
        backgrounds.push_back(read_png(p.string()));
    if (backgrounds.empty())
        throw MissingInput("missing stage input: no *_bg.png under " +
                           (out / "backgrounds").generic_string());

    std::vector<Sprite> bank = load_sprite_dir((out / "sprites").string());
    if (use_generated) {
        std::vector<Sprite> gen = load_sprite_dir((out / "generated").string());
        bank.insert(bank.end(), std::make_move_iterator(gen.begin()),
                    std::make_move_iterator(gen.end()));
    }
    if (bank.empty())
        throw MissingInput("missing stage input: sprite bank is empty under " +
                           (out / "sprites").generic_string());

    reset_dir(out / "scenes");
    fs::create_directories(out / "scenes" / "images");
    fs::create_directories(out / "scenes" / "labels");
    fs::create_directories(out / "scenes" / "labels_obb");
    fs::create_directories(out / "scenes" / "plans");

    const auto sink = [&](int index, const CompositeScene& sc) {
        char base[32];
        std::snprintf(base, sizeof base, "synth_%06d", index);
        write_png((out / "scenes" / "images" / (std::string(base) + ".png")).string(),
                  sc.image);

        LabelSet obb;
        obb.img_w = sc.image.width;
        obb.img_h = sc.image.height;
        obb.labels = sc.labels.labels;
        spit(out / "scenes" / "labels_obb" / (std::string(base) + ".txt"),
             write_labels(obb, LabelKind::obb));

        LabelSet ax;
        ax.img_w = sc.image.width;
        ax.img_h = sc.image.height;
        for (const Label& lab : sc.labels.labels)
            ax.labels.push_back(make_axis_label(lab.class_id, lab.bounding_axis()));
        spit(out / "scenes" / "labels" / (std::string(base) + ".txt"),
             write_labels(ax, LabelKind::axis));

        spit(out / "scenes" / "plans" / (std::string(base) + ".plan"),
             serialize_plan(sc.plan));
    };

    ComposeStats stats;
    stats.bank_size = int(bank.size());
    stats.batch = generate_batch(backgrounds, bank, cfg.scene_count,
                                 mix_seed(cfg.master_seed, 0xc09eu), cfg.compose, sink,
                                 cfg.workers);

    StageRecord rec;
    rec.stage = "compose";
    rec.seed = cfg.master_seed;
    rec.inputs = {{"backgrounds", hash_tree((out / "backgrounds").string())},
                  {"sprites", hash_tree((out / "sprites").string())}};
    if (use_generated)
        rec.inputs.emplace_back("generated", hash_tree((out / "generated").string()));
    rec.output_paths = {"scenes"};
    rec.stats = {{"attempted", std::to_string(stats.batch.attempted)},
                 {"rendered", std::to_string(stats.batch.rendered)},
                 {"rejected", std::to_string(stats.batch.rejected)},
                 {"placements_dropped", std::to_string(stats.batch.placements_dropped)},
                 {"bank_size", std::to_string(stats.bank_size)}};
    write_stage_record(cfg, rec);
    return stats;
}

MetricsReport run_evaluate(const PipelineConfig& cfg, const std::string& pred_dir,
                           const std::string& gt_dir) {
    const fs::path out = cfg.output_root;
    fs::path gt = gt_dir;
    if (gt_dir.empty())
        gt = out / "scenes" /
             (cfg.eval.kind == LabelKind::obb ? "labels_obb" : "labels");
    require_dir(gt, gt.generic_string(), "compose scenes first or pass a label dir");
    require_dir(pred_dir, pred_dir, "prediction directory not found");

    std::vector<std::string> log;
    const MetricsReport report =
        evaluate_dataset(pred_dir, gt.string(), cfg.eval.kind, cfg.eval.iou_threshold, &log);

    reset_dir(out / "eval");
    spit(out / "eval" / "report.txt", report_key_values(report));

    StageRecord rec;
    rec.stage = "evaluate";
    rec.seed = cfg.master_seed;
    rec.inputs = {{"predictions", hash_tree(fs::path(pred_dir).string())},
                  {"ground_truth", hash_tree(gt.string())}};
    rec.output_paths = {"eval"};
    rec.stats = {{"tp", std::to_string(report.true_positives)},
                 {"fp", std::to_string(report.false_positives)},
                 {"fn", std::to_string(report.false_negatives)}};
    write_stage_record(cfg, rec);
    return report;
}

std::vector<StageTiming> run_pipeline(const PipelineConfig& cfg, bool skip_diffusion) {
    std::vector<StageTiming> times;
    const auto timed = [&](const char* name, auto&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        times.push_back({name, ms});
    };

    timed("extract", [&] { run_extract(cfg); });
    timed("recreate", [&] { run_recreate(cfg); });
    timed("augment", [&] { run_augment(cfg); });
    if (!skip_diffusion) {
        timed("train", [&] { run_train(cfg); });
        timed("sample", [&] { run_sample(cfg); });
    }
    timed("compose", [&] { run_compose(cfg, !skip_diffusion); });

    const fs::path logs = fs::path(cfg.output_root) / "logs";
    fs::create_directories(logs);
    std::ostringstream ss;
    for (const StageTiming& t : times)
        ss << t.stage << " " << fmt("%.3f", t.wall_ms) << "\n";
    spit(logs / "timing.txt", ss.str());
    return times;
}

} // namespace herdgen
