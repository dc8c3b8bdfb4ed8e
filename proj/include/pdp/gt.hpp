#pragma once

#include "pdp/grid.hpp"

#include <vector>

namespace pdp {

// One annotator's point in normalized [0,1]^2 image coordinates; the point
// is ignored when in_frame is false.
struct GazeAnnotation {
    double x = 0.0;
    double y = 0.0;
    bool in_frame = false;
};

struct GazeHeatmap {
    Grid grid;
    double sigma = 0.0;
};

// Probability vector over grid_h*grid_w inside patches (row-major) plus one
// outside bin; entries are nonnegative and sum to 1.
struct PatchDistribution {
    std::vector<double> inside;
    double outside = 0.0;
    int grid_h = 0;
    int grid_w = 0;

    std::vector<double> full() const {
        std::vector<double> f = inside;
        f.push_back(outside);
        return f;
    }
    static PatchDistribution from_full(const std::vector<double>& f, int h, int w);
    int argmax_inside() const; // index of the largest inside entry (first on ties)
};

enum class GtMode { maxpool, avgpool, onehot };

// Unnormalized Gaussian bump around the annotated point; peak value is
// 1/(sqrt(2*pi)*sigma). The point maps to pixel coordinates as g * (S-1)
// per axis with a continuous (non-rounded) center.
GazeHeatmap render_gaussian_heatmap(const GazeAnnotation& ann, int out_h, int out_w,
                                    double sigma);

// Ground-truth patch distribution. in_frame == false ignores the heatmap and
// puts all mass on the outside bin; otherwise the heatmap is pooled per
// patch (max, mean, or one-hot at the heatmap argmax) and normalized.
PatchDistribution patch_distribution_from_heatmap(const GazeHeatmap* heatmap,
                                                  bool in_frame, int patches_h,
                                                  int patches_w, GtMode mode);

// Mean L2 distance of each in-frame annotation to the annotation centroid.
double variance_score(const std::vector<GazeAnnotation>& annotations);

} // namespace pdp
