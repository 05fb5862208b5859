#pragma once

#include <string>
#include <vector>

#include "herdgen/labels.hpp"

namespace herdgen {

struct Prediction {
    Label label;
    double confidence = 1.0;
};

struct MetricsReport {
    long true_positives = 0;
    long false_positives = 0;
    long false_negatives = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double iou_threshold = 0.5;
};

struct MatchResult {
    long tp = 0, fp = 0, fn = 0;
    std::vector<int> assignment; // per prediction (input order): gt index or -1
};

// Greedy matching in descending confidence order; each prediction takes the
// unmatched same-class ground truth of highest IoU >= threshold.
MatchResult match_detections(const std::vector<Prediction>& preds, const LabelSet& gts,
                             double iou_threshold);

MetricsReport compute_metrics(long tp, long fp, long fn, double iou_threshold = 0.5);

// Scores every <stem>.txt in gt_dir against pred_dir/<stem>.txt. A missing
// prediction file counts as zero predictions (logged); an unparseable file is
// a hard error naming the path.
MetricsReport evaluate_dataset(const std::string& pred_dir, const std::string& gt_dir,
                               LabelKind kind, double iou_threshold,
                               std::vector<std::string>* log = nullptr);

std::string format_report(const MetricsReport& r);   // human-readable
std::string report_key_values(const MetricsReport& r); // machine-readable

} // namespace herdgen
