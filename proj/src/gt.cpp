#include "pdp/gt.hpp"

#include <cmath>
#include <stdexcept>

namespace pdp {

PatchDistribution PatchDistribution::from_full(const std::vector<double>& f, int h, int w) {
    if (static_cast<int>(f.size()) != h * w + 1)
        throw std::invalid_argument("PatchDistribution: full vector length must be h*w+1");
    PatchDistribution pd;
    pd.inside.assign(f.begin(), f.end() - 1);
    pd.outside = f.back();
    pd.grid_h = h;
    pd.grid_w = w;
    return pd;
}

int PatchDistribution::argmax_inside() const {
    int best = 0;
    for (size_t i = 1; i < inside.size(); ++i)
        if (inside[i] > inside[best]) best = static_cast<int>(i);
    return best;
}

GazeHeatmap render_gaussian_heatmap(const GazeAnnotation& ann, int out_h, int out_w,
                                    double sigma) {
    if (!ann.in_frame)
        throw std::invalid_argument("render_gaussian_heatmap: annotation is out of frame");
    if (sigma <= 0.0) throw std::invalid_argument("render_gaussian_heatmap: sigma must be > 0");
    GazeHeatmap hm;
    hm.sigma = sigma;
    hm.grid = Grid(out_h, out_w);
    const double gx = ann.x * (out_w - 1);
    const double gy = ann.y * (out_h - 1);
    const double coef = 1.0 / (std::sqrt(2.0 * M_PI) * sigma);
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (int r = 0; r < out_h; ++r) {
        for (int c = 0; c < out_w; ++c) {
            const double dx = c - gx;
            const double dy = r - gy;
            hm.grid.at(r, c) = coef * std::exp(-(dx * dx + dy * dy) * inv2s2);
        }
    }
    return hm;
}

PatchDistribution patch_distribution_from_heatmap(const GazeHeatmap* heatmap,
                                                  bool in_frame, int patches_h,
                                                  int patches_w, GtMode mode) {
    if (patches_h <= 0 || patches_w <= 0)
        throw std::invalid_argument("patch_distribution_from_heatmap: patch grid must be positive");
    PatchDistribution pd;
    pd.grid_h = patches_h;
    pd.grid_w = patches_w;
    pd.inside.assign(static_cast<size_t>(patches_h) * patches_w, 0.0);
    if (!in_frame) {
        pd.outside = 1.0;
        return pd;
    }
    if (!heatmap)
        throw std::invalid_argument("patch_distribution_from_heatmap: in-frame sample needs a heatmap");
    const Grid& g = heatmap->grid;
    if (g.rows % patches_h != 0 || g.cols % patches_w != 0)
        throw std::invalid_argument(
            "patch_distribution_from_heatmap: heatmap extents must be divisible by the patch grid");
    const int bh = g.rows / patches_h;
    const int bw = g.cols / patches_w;

    if (mode == GtMode::onehot) {
        // Patch containing the heatmap argmax, i.e. the pixel nearest the
        // annotated point; boundary pixels floor-map to the lower-index patch.
        int br = 0, bc = 0;
        double best = g.at(0, 0);
        for (int r = 0; r < g.rows; ++r)
            for (int c = 0; c < g.cols; ++c)
                if (g.at(r, c) > best) {
                    best = g.at(r, c);
                    br = r;
                    bc = c;
                }
        pd.inside[static_cast<size_t>(br / bh) * patches_w + bc / bw] = 1.0;
        pd.outside = 0.0;
        return pd;
    }

    double total = 0.0;
    for (int pr = 0; pr < patches_h; ++pr) {
        for (int pc = 0; pc < patches_w; ++pc) {
            double acc = mode == GtMode::maxpool ? -1.0 : 0.0;
            for (int r = pr * bh; r < (pr + 1) * bh; ++r)
                for (int c = pc * bw; c < (pc + 1) * bw; ++c) {
                    const double v = g.at(r, c);
                    if (mode == GtMode::maxpool) acc = std::max(acc, v);
                    else acc += v;
                }
            if (mode == GtMode::avgpool) acc /= bh * bw;
            pd.inside[static_cast<size_t>(pr) * patches_w + pc] = acc;
            total += acc;
        }
    }
    if (total <= 0.0)
        throw std::invalid_argument("patch_distribution_from_heatmap: heatmap has no positive mass");
    for (double& v : pd.inside) v /= total;
    pd.outside = 0.0;
    return pd;
}

double variance_score(const std::vector<GazeAnnotation>& annotations) {
    double cx = 0.0, cy = 0.0;
    int n = 0;
    for (const auto& a : annotations) {
        if (!a.in_frame) continue;
        cx += a.x;
        cy += a.y;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("variance_score: no in-frame annotations");
    cx /= n;
    cy /= n;
    double s = 0.0;
    for (const auto& a : annotations) {
        if (!a.in_frame) continue;
        s += std::hypot(a.x - cx, a.y - cy);
    }
    return s / n;
}

} // namespace pdp
