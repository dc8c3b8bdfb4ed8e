#pragma once

#include "pdp/grid.hpp"
#include "pdp/gt.hpp"

#include <utility>
#include <vector>

namespace pdp {

// ROC-AUC of heatmap scores against annotated cells. Positives are the
// evaluation-grid cells holding at least one annotation (nearest-cell
// mapping); computed via the Mann-Whitney U statistic with midranks for
// ties. The heatmap is bilinearly resized when the evaluation grid differs
// from its native grid.
double auc(const Grid& pred, const std::vector<GazeAnnotation>& annotations);
double auc_on_grid(const Grid& pred, const std::vector<GazeAnnotation>& annotations,
                   int eval_h, int eval_w);

struct DistanceResult {
    double avg = 0.0; // L2 from the argmax point to the annotation centroid
    double min = 0.0; // min per-annotation L2
};
DistanceResult distances(const Grid& pred, const std::vector<GazeAnnotation>& annotations);

// All-points average precision of out-of-frame detection. Each entry is
// (P_in, in_frame); the positive class is out-of-frame scored by 1 - P_in.
double ap_out_of_frame(const std::vector<std::pair<double, bool>>& scores);

struct QuantileRow {
    double var_lo = 0.0, var_hi = 0.0;
    double mean_var = 0.0;
    double mean_auc = 0.0;
    int count = 0;
};
// Sort by variance score, split into 10 equal-count parts (remainder spread
// over the first parts), mean AUC per part. Needs >= 10 samples.
std::vector<QuantileRow> quantile_breakdown(std::vector<std::pair<double, double>> var_auc);

// Patch distribution from a predicted heatmap: the ground-truth max-pool
// construction, with a min-shift first when the prediction has negative
// values. A flat heatmap yields the uniform inside distribution.
PatchDistribution pdph(const Grid& pred, int patches_h, int patches_w);

double bhattacharyya(const PatchDistribution& p, const PatchDistribution& q);
double js_divergence(const PatchDistribution& p, const PatchDistribution& q);

struct MetricReport {
    int n_samples = 0;
    int n_in_frame = 0;
    double auc = 0.0;
    double avg_dist = 0.0;
    double min_dist = 0.0;
    bool has_ap = false;
    double ap_out = 0.0;
    std::vector<QuantileRow> quantile_table; // empty when < 10 in-frame samples
    bool has_consistency = false;
    double bc_mean = 0.0;
    double js_mean = 0.0;
};

} // namespace pdp
