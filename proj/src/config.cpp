#include "herdgen/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "herdgen/hashing.hpp"

using nlohmann::json;

namespace herdgen {

namespace {

void reject_unknown(const json& obj, const std::string& scope,
                    const std::set<std::string>& allowed) {
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key()))
            throw ConfigError("unknown key " + scope + item.key());
    }
}

const json& need(const json& obj, const std::string& scope, const std::string& key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError("missing required key " + scope + key);
    return *it;
}

double get_num(const json& obj, const std::string& scope, const std::string& key,
               double fallback, bool required = false) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        if (required) throw ConfigError("missing required key " + scope + key);
        return fallback;
    }
    if (!it->is_number()) throw ConfigError(scope + key + " must be a number");
    return it->get<double>();
}

int get_int(const json& obj, const std::string& scope, const std::string& key,
            int fallback, bool required = false) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        if (required) throw ConfigError("missing required key " + scope + key);
        return fallback;
    }
    if (!it->is_number_integer()) throw ConfigError(scope + key + " must be an integer");
    return it->get<int>();
}

bool get_bool(const json& obj, const std::string& scope, const std::string& key,
              bool fallback) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_boolean()) throw ConfigError(scope + key + " must be a boolean");
    return it->get<bool>();
}

std::string get_str(const json& obj, const std::string& scope, const std::string& key,
                    const std::string& fallback, bool required = false) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        if (required) throw ConfigError("missing required key " + scope + key);
        return fallback;
    }
    if (!it->is_string()) throw ConfigError(scope + key + " must be a string");
    return it->get<std::string>();
}

LabelKind parse_kind(const std::string& s, const std::string& what) {
    if (s == "axis") return LabelKind::axis;
    if (s == "obb") return LabelKind::obb;
    throw ConfigError(what + " must be \"axis\" or \"obb\"");
}

void check(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

} // namespace

PipelineConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be an object");
    reject_unknown(root, "", {"dataset_root", "output_root", "master_seed", "workers",
                              "dataset", "extract", "background", "augment",
                              "diffusion", "compose", "eval"});

    PipelineConfig cfg;
    cfg.dataset_root = get_str(root, "", "dataset_root", "", true);
    cfg.output_root = get_str(root, "", "output_root", "", true);
    {
        const json& seed = need(root, "", "master_seed");
        if (!seed.is_number_unsigned() && !seed.is_number_integer())
            throw ConfigError("master_seed must be a non-negative integer");
        if (seed.is_number_integer() && seed.get<int64_t>() < 0)
            throw ConfigError("master_seed must be a non-negative integer");
        cfg.master_seed = seed.get<uint64_t>();
    }
    cfg.workers = get_int(root, "", "workers", 1);
    check(cfg.workers >= 1 && cfg.workers <= 256, "workers must be in [1, 256]");

    if (root.contains("dataset")) {
        const json& d = root["dataset"];
        reject_unknown(d, "dataset.", {"label_kind", "test_fraction"});
        cfg.dataset.label_kind =
            parse_kind(get_str(d, "dataset.", "label_kind", "obb"), "dataset.label_kind");
        cfg.dataset.test_fraction =
            get_num(d, "dataset.", "test_fraction", 0.1, true);
        check(cfg.dataset.test_fraction > 0.0 && cfg.dataset.test_fraction < 1.0,
              "dataset.test_fraction must be in (0, 1)");
    } else {
        throw ConfigError("missing required key dataset");
    }

    if (root.contains("extract")) {
        const json& e = root["extract"];
        reject_unknown(e, "extract.",
                       {"min_foreground_pixels", "tau", "border_ring", "segmenter",
                        "mask_dir"});
        cfg.extract.min_foreground_pixels =
            get_int(e, "extract.", "min_foreground_pixels", kDefaultMinForegroundPixels);
        cfg.extract.tau = get_num(e, "extract.", "tau", 3.0);
        cfg.extract.border_ring = get_int(e, "extract.", "border_ring", 2);
        cfg.extract.segmenter = get_str(e, "extract.", "segmenter", "baseline");
        cfg.extract.mask_dir = get_str(e, "extract.", "mask_dir", "");
        check(cfg.extract.min_foreground_pixels >= 1,
              "extract.min_foreground_pixels must be >= 1");
        check(cfg.extract.tau > 0.0, "extract.tau must be > 0");
        check(cfg.extract.border_ring >= 1, "extract.border_ring must be >= 1");
        check(cfg.extract.segmenter == "baseline" || cfg.extract.segmenter == "import",
              "extract.segmenter must be \"baseline\" or \"import\"");
        check(cfg.extract.segmenter != "import" || !cfg.extract.mask_dir.empty(),
              "extract.mask_dir required for segmenter \"import\"");
    }

    if (root.contains("background")) {
        const json& b = root["background"];
        reject_unknown(b, "background.", {"blur_sigma", "blur_radius", "border_width"});
        cfg.background.blur_sigma = get_num(b, "background.", "blur_sigma", 2.0);
        cfg.background.blur_radius = get_int(b, "background.", "blur_radius", 6);
        cfg.background.border_width = get_int(b, "background.", "border_width", 1);
        check(cfg.background.blur_sigma > 0.0, "background.blur_sigma must be > 0");
        check(cfg.background.blur_radius >= int(std::ceil(3.0 * cfg.background.blur_sigma)),
              "background.blur_radius must cover 3 sigma");
        check(cfg.background.border_width >= 1, "background.border_width must be >= 1");
    }

    {
        const json& a = need(root, "", "augment");
        reject_unknown(a, "augment.",
                       {"contrast_min", "contrast_max", "rotation_min_deg",
                        "rotation_max_deg", "p_flip", "p_contrast", "p_rotate",
                        "variants_per_sprite"});
        cfg.augment.contrast_min = get_num(a, "augment.", "contrast_min", 0.7, true);
        cfg.augment.contrast_max = get_num(a, "augment.", "contrast_max", 1.3, true);
        cfg.augment.rotation_min_deg =
            get_num(a, "augment.", "rotation_min_deg", 10.0, true);
        cfg.augment.rotation_max_deg =
            get_num(a, "augment.", "rotation_max_deg", 20.0, true);
        cfg.augment.p_flip = get_num(a, "augment.", "p_flip", 0.5);
        cfg.augment.p_contrast = get_num(a, "augment.", "p_contrast", 1.0);
        cfg.augment.p_rotate = get_num(a, "augment.", "p_rotate", 1.0);
        cfg.augment_variants = get_int(a, "augment.", "variants_per_sprite", 4);
        check(cfg.augment.contrast_min > 0.0 &&
                  cfg.augment.contrast_min <= cfg.augment.contrast_max,
              "augment contrast range invalid");
        check(cfg.augment.rotation_min_deg >= 10.0 &&
                  cfg.augment.rotation_min_deg <= cfg.augment.rotation_max_deg &&
                  cfg.augment.rotation_max_deg <= 20.0,
              "augment rotation range must stay within [10, 20] degrees");
        for (double p : {cfg.augment.p_flip, cfg.augment.p_contrast, cfg.augment.p_rotate})
            check(p >= 0.0 && p <= 1.0, "augment probabilities must be in [0, 1]");
        check(cfg.augment_variants >= 0, "augment.variants_per_sprite must be >= 0");
    }

    {
        const json& d = need(root, "", "diffusion");
        reject_unknown(d, "diffusion.",
                       {"resolution", "timesteps", "beta_start", "beta_end",
                        "base_channels", "levels", "temb_dim", "lr", "batch_size",
                        "train_steps", "sample_count"});
        cfg.diffusion.resolution = get_int(d, "diffusion.", "resolution", 64, true);
        cfg.diffusion.timesteps = get_int(d, "diffusion.", "timesteps", 1000, true);
        cfg.diffusion.beta_start = get_num(d, "diffusion.", "beta_start", 1e-4, true);
        cfg.diffusion.beta_end = get_num(d, "diffusion.", "beta_end", 0.02, true);
        cfg.diffusion.base_channels = get_int(d, "diffusion.", "base_channels", 12);
        cfg.diffusion.levels = get_int(d, "diffusion.", "levels", 3);
        cfg.diffusion.temb_dim = get_int(d, "diffusion.", "temb_dim", 32);
        cfg.diffusion.lr = get_num(d, "diffusion.", "lr", 2e-4);
        cfg.diffusion.batch_size = get_int(d, "diffusion.", "batch_size", 128);
        cfg.diffusion.train_steps = get_int(d, "diffusion.", "train_steps", 2000);
        cfg.diffusion.sample_count = get_int(d, "diffusion.", "sample_count", 64);
        check(cfg.diffusion.levels >= 1 && cfg.diffusion.levels <= 6,
              "diffusion.levels must be in [1, 6]");
        check(cfg.diffusion.resolution >= (1 << cfg.diffusion.levels) &&
                  cfg.diffusion.resolution % (1 << cfg.diffusion.levels) == 0,
              "diffusion.resolution must be a positive multiple of 2^levels");
        check(cfg.diffusion.timesteps >= 1, "diffusion.timesteps must be >= 1");
        check(cfg.diffusion.beta_start > 0.0 &&
                  cfg.diffusion.beta_start <= cfg.diffusion.beta_end &&
                  cfg.diffusion.beta_end < 1.0,
              "diffusion schedule requires 0 < beta_start <= beta_end < 1");
        check(cfg.diffusion.base_channels >= 1, "diffusion.base_channels must be >= 1");
        check(cfg.diffusion.temb_dim >= 2 && cfg.diffusion.temb_dim % 2 == 0,
              "diffusion.temb_dim must be even and >= 2");
        check(cfg.diffusion.lr > 0.0, "diffusion.lr must be > 0");
        check(cfg.diffusion.batch_size >= 1, "diffusion.batch_size must be >= 1");
        check(cfg.diffusion.train_steps >= 0, "diffusion.train_steps must be >= 0");
        check(cfg.diffusion.sample_count >= 0, "diffusion.sample_count must be >= 0");
    }

    {
        const json& c = need(root, "", "compose");
        reject_unknown(c, "compose.",
                       {"scene_count", "p_group", "group_min", "group_max",
                        "individual_min", "individual_max", "scale_jitter",
                        "spacing_min", "spacing_max", "min_visibility",
                        "max_occluded_visibility", "max_repair_attempts",
                        "feather_edges", "fields"});
        cfg.scene_count = get_int(c, "compose.", "scene_count", 1000);
        cfg.compose.p_group = get_num(c, "compose.", "p_group", 0.7);
        cfg.compose.group_min = get_int(c, "compose.", "group_min", 6);
        cfg.compose.group_max = get_int(c, "compose.", "group_max", 10);
        cfg.compose.individual_min = get_int(c, "compose.", "individual_min", 1);
        cfg.compose.individual_max = get_int(c, "compose.", "individual_max", 5);
        cfg.compose.scale_jitter = get_num(c, "compose.", "scale_jitter", 0.05);
        cfg.compose.spacing_min = get_num(c, "compose.", "spacing_min", 0.6);
        cfg.compose.spacing_max = get_num(c, "compose.", "spacing_max", 1.5);
        cfg.compose.min_visibility = get_num(c, "compose.", "min_visibility", 0.1, true);
        cfg.compose.max_occluded_visibility =
            get_num(c, "compose.", "max_occluded_visibility", 0.9, true);
        cfg.compose.max_repair_attempts =
            get_int(c, "compose.", "max_repair_attempts", 20);
        cfg.compose.feather_edges = get_bool(c, "compose.", "feather_edges", true);

        const json& fields = need(c, "compose.", "fields");
        if (!fields.is_array() || fields.empty())
            throw ConfigError("compose.fields must be a non-empty array");
        cfg.compose.fields.clear();
        cfg.compose.field_weights.clear();
        for (const json& f : fields) {
            if (!f.is_object()) throw ConfigError("compose.fields entries must be objects");
            reject_unknown(f, "compose.fields.", {"name", "min_px", "max_px", "weight"});
            ScaleField sf;
            sf.name = get_str(f, "compose.fields.", "name", "", true);
            sf.min_px = get_num(f, "compose.fields.", "min_px", 0.0, true);
            sf.max_px = get_num(f, "compose.fields.", "max_px", 0.0, true);
            check(sf.min_px > 0.0 && sf.min_px < sf.max_px,
                  "compose field " + sf.name + " needs 0 < min_px < max_px");
            const double w = get_num(f, "compose.fields.", "weight", 1.0);
            check(w >= 0.0, "compose field weight must be >= 0");
            cfg.compose.fields.push_back(sf);
            cfg.compose.field_weights.push_back(w);
        }
        double wsum = 0.0;
        for (double w : cfg.compose.field_weights) wsum += w;
        check(wsum > 0.0, "compose field weights sum to zero");

        check(cfg.scene_count >= 1, "compose.scene_count must be >= 1");
        check(cfg.compose.p_group >= 0.0 && cfg.compose.p_group <= 1.0,
              "compose.p_group must be in [0, 1]");
        check(cfg.compose.group_min >= 1 &&
                  cfg.compose.group_min <= cfg.compose.group_max,
              "compose group size range invalid");
        check(cfg.compose.individual_min >= 1 &&
                  cfg.compose.individual_min <= cfg.compose.individual_max,
              "compose individual size range invalid");
        check(cfg.compose.scale_jitter >= 0.0 && cfg.compose.scale_jitter <= 0.5,
              "compose.scale_jitter must be in [0, 0.5]");
        check(cfg.compose.spacing_min > 0.0 &&
                  cfg.compose.spacing_min <= cfg.compose.spacing_max,
              "compose spacing range invalid");
        check(cfg.compose.min_visibility >= 0.0 &&
                  cfg.compose.min_visibility <= cfg.compose.max_occluded_visibility &&
                  cfg.compose.max_occluded_visibility <= 1.0,
              "compose visibility band invalid");
        check(cfg.compose.max_repair_attempts >= 0,
              "compose.max_repair_attempts must be >= 0");
    }

    if (root.contains("eval")) {
        const json& e = root["eval"];
        reject_unknown(e, "eval.", {"iou_threshold", "kind"});
        cfg.eval.iou_threshold = get_num(e, "eval.", "iou_threshold", 0.5);
        cfg.eval.kind = parse_kind(get_str(e, "eval.", "kind", "obb"), "eval.kind");
        check(cfg.eval.iou_threshold > 0.0 && cfg.eval.iou_threshold <= 1.0,
              "eval.iou_threshold must be in (0, 1]");
    }

    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void apply_preset(PipelineConfig& cfg, const std::string& name) {
    if (name.empty() || name == "paper") return;
    if (name == "desk") {
        cfg.diffusion.resolution = 16;
        cfg.diffusion.timesteps = 100;
        cfg.diffusion.train_steps = 200;
        cfg.diffusion.batch_size = 32;
        cfg.diffusion.lr = 1e-3;
        cfg.diffusion.sample_count = 16;
        cfg.scene_count = 50;
        return;
    }
    throw ConfigError("unknown preset: " + name);
}

void apply_env_overrides(PipelineConfig& cfg) {
    if (const char* v = std::getenv("HERDGEN_SEED")) {
        char* end = nullptr;
        const unsigned long long seed = std::strtoull(v, &end, 10);
        if (end == v || *end != '\0') throw ConfigError("HERDGEN_SEED must be an integer");
        cfg.master_seed = seed;
    }
    if (const char* v = std::getenv("HERDGEN_WORKERS")) {
        char* end = nullptr;
        const long w = std::strtol(v, &end, 10);
        if (end == v || *end != '\0' || w < 1 || w > 256)
            throw ConfigError("HERDGEN_WORKERS must be in [1, 256]");
        cfg.workers = int(w);
    }
    if (const char* v = std::getenv("HERDGEN_DATASET_ROOT")) cfg.dataset_root = v;
    if (const char* v = std::getenv("HERDGEN_OUTPUT_ROOT")) cfg.output_root = v;
}

std::string canonical_config(const PipelineConfig& cfg) {
    json fields = json::array();
    for (size_t i = 0; i < cfg.compose.fields.size(); ++i) {
        fields.push_back({{"name", cfg.compose.fields[i].name},
                          {"min_px", cfg.compose.fields[i].min_px},
                          {"max_px", cfg.compose.fields[i].max_px},
                          {"weight", cfg.compose.field_weights[i]}});
    }
    // Roots and worker count locate artifacts or split work; they never
    // change output bytes, so they stay out of the canonical form.
    json j = {
        {"master_seed", cfg.master_seed},
        {"dataset",
         {{"label_kind", cfg.dataset.label_kind == LabelKind::obb ? "obb" : "axis"},
          {"test_fraction", cfg.dataset.test_fraction}}},
        {"extract",
         {{"min_foreground_pixels", cfg.extract.min_foreground_pixels},
          {"tau", cfg.extract.tau},
          {"border_ring", cfg.extract.border_ring},
          {"segmenter", cfg.extract.segmenter},
          {"mask_dir", cfg.extract.mask_dir}}},
        {"background",
         {{"blur_sigma", cfg.background.blur_sigma},
          {"blur_radius", cfg.background.blur_radius},
          {"border_width", cfg.background.border_width}}},
        {"augment",
         {{"contrast_min", cfg.augment.contrast_min},
          {"contrast_max", cfg.augment.contrast_max},
          {"rotation_min_deg", cfg.augment.rotation_min_deg},
          {"rotation_max_deg", cfg.augment.rotation_max_deg},
          {"p_flip", cfg.augment.p_flip},
          {"p_contrast", cfg.augment.p_contrast},
          {"p_rotate", cfg.augment.p_rotate},
          {"variants_per_sprite", cfg.augment_variants}}},
        {"diffusion",
         {{"resolution", cfg.diffusion.resolution},
          {"timesteps", cfg.diffusion.timesteps},
          {"beta_start", cfg.diffusion.beta_start},
          {"beta_end", cfg.diffusion.beta_end},
          {"base_channels", cfg.diffusion.base_channels},
          {"levels", cfg.diffusion.levels},
          {"temb_dim", cfg.diffusion.temb_dim},
          {"lr", cfg.diffusion.lr},
          {"batch_size", cfg.diffusion.batch_size},
          {"train_steps", cfg.diffusion.train_steps},
          {"sample_count", cfg.diffusion.sample_count}}},
        {"compose",
         {{"scene_count", cfg.scene_count},
          {"p_group", cfg.compose.p_group},
          {"group_min", cfg.compose.group_min},
          {"group_max", cfg.compose.group_max},
          {"individual_min", cfg.compose.individual_min},
          {"individual_max", cfg.compose.individual_max},
          {"scale_jitter", cfg.compose.scale_jitter},
          {"spacing_min", cfg.compose.spacing_min},
          {"spacing_max", cfg.compose.spacing_max},
          {"min_visibility", cfg.compose.min_visibility},
          {"max_occluded_visibility", cfg.compose.max_occluded_visibility},
          {"max_repair_attempts", cfg.compose.max_repair_attempts},
          {"feather_edges", cfg.compose.feather_edges},
          {"fields", fields}}},
        {"eval",
         {{"iou_threshold", cfg.eval.iou_threshold},
          {"kind", cfg.eval.kind == LabelKind::obb ? "obb" : "axis"}}},
    };
    return j.dump();
}

uint64_t config_hash(const PipelineConfig& cfg) {
    return fnv1a64(canonical_config(cfg));
}

} // namespace herdgen
