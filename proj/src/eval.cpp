#include "herdgen/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;

namespace herdgen {

namespace {

std::vector<Vec2> label_quad(const Label& lab) {
    if (lab.oriented) return {lab.corners.begin(), lab.corners.end()};
    return {{lab.abox.x_min, lab.abox.y_min},
            {lab.abox.x_max, lab.abox.y_min},
            {lab.abox.x_max, lab.abox.y_max},
            {lab.abox.x_min, lab.abox.y_max}};
}

double label_iou(const Label& a, const Label& b) {
    if (a.oriented || b.oriented) return convex_poly_iou(label_quad(a), label_quad(b));
    return iou_axis(a.abox, b.abox);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

MatchResult match_detections(const std::vector<Prediction>& preds, const LabelSet& gts,
                             double iou_threshold) {
    if (!(iou_threshold > 0.0) || iou_threshold > 1.0)
        throw Error("IoU threshold must be in (0, 1]");
    for (const Prediction& p : preds)
        if (p.confidence < 0.0 || p.confidence > 1.0)
            throw Error("prediction confidence out of [0, 1]");

    MatchResult res;
    res.assignment.assign(preds.size(), -1);

    std::vector<size_t> order(preds.size());
    std::iota(order.begin(), order.end(), size_t(0));
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return preds[a].confidence > preds[b].confidence;
    });

    std::vector<bool> gt_taken(gts.labels.size(), false);
    for (size_t pi : order) {
        const Prediction& p = preds[pi];
        double best_iou = 0.0;
        int best_gt = -1;
        for (size_t gi = 0; gi < gts.labels.size(); ++gi) {
            if (gt_taken[gi]) continue;
            if (gts.labels[gi].class_id != p.label.class_id) continue;
            const double iou = label_iou(p.label, gts.labels[gi]);
            if (iou >= iou_threshold && iou > best_iou) {
                best_iou = iou;
                best_gt = int(gi);
            }
        }
        if (best_gt >= 0) {
            gt_taken[size_t(best_gt)] = true;
            res.assignment[pi] = best_gt;
            res.tp += 1;
        } else {
            res.fp += 1;
        }
    }
    res.fn = long(gts.labels.size()) - res.tp;
    return res;
}

MetricsReport compute_metrics(long tp, long fp, long fn, double iou_threshold) {
    if (tp < 0 || fp < 0 || fn < 0) throw Error("negative count");
    MetricsReport r;
    r.true_positives = tp;
    r.false_positives = fp;
    r.false_negatives = fn;
    r.iou_threshold = iou_threshold;
    r.precision = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
    r.recall = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
    r.f1 = r.precision + r.recall > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

MetricsReport evaluate_dataset(const std::string& pred_dir, const std::string& gt_dir,
                               LabelKind kind, double iou_threshold,
                               std::vector<std::string>* log) {
    if (!fs::is_directory(gt_dir)) throw Error("not a directory: " + gt_dir);
    if (!fs::is_directory(pred_dir)) throw Error("not a directory: " + pred_dir);

    std::vector<fs::path> gt_files;
    for (const auto& entry : fs::directory_iterator(gt_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
            gt_files.push_back(entry.path());
    std::sort(gt_files.begin(), gt_files.end());

    long tp = 0, fp = 0, fn = 0;
    for (const fs::path& gt_path : gt_files) {
        LabelSet gts;
        try {
            // matching is resolution-free; parse against a unit square
            gts = parse_labels(read_file(gt_path), 1.0, 1.0, kind);
        } catch (const Error& e) {
            throw Error("ground truth " + gt_path.string() + ": " + e.what());
        }

        const fs::path pred_path = fs::path(pred_dir) / gt_path.filename();
        std::vector<Prediction> preds;
        if (!fs::exists(pred_path)) {
            if (log) log->push_back("missing predictions: " + pred_path.string());
        } else {
            LabelSet pls;
            std::vector<double> confs;
            try {
                pls = parse_labels(read_file(pred_path), 1.0, 1.0, kind, &confs);
            } catch (const Error& e) {
                throw Error("predictions " + pred_path.string() + ": " + e.what());
            }
            preds.resize(pls.labels.size());
            for (size_t i = 0; i < pls.labels.size(); ++i)
                preds[i] = {pls.labels[i], confs[i]};
        }

        MatchResult m = match_detections(preds, gts, iou_threshold);
        tp += m.tp;
        fp += m.fp;
        fn += m.fn;
    }
    return compute_metrics(tp, fp, fn, iou_threshold);
}

std::string format_report(const MetricsReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "IoU threshold %.2f: TP=%ld FP=%ld FN=%ld\n"
                  "precision %.4f  recall %.4f  f1 %.4f\n",
                  r.iou_threshold, r.true_positives, r.false_positives,
                  r.false_negatives, r.precision, r.recall, r.f1);
    return buf;
}

std::string report_key_values(const MetricsReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "iou_threshold=%.6f\ntp=%ld\nfp=%ld\nfn=%ld\n"
                  "precision=%.6f\nrecall=%.6f\nf1=%.6f\n",
                  r.iou_threshold, r.true_positives, r.false_positives,
                  r.false_negatives, r.precision, r.recall, r.f1);
    return buf;
}

} // namespace herdgen
