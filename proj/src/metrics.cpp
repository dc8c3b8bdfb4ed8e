#include "pdp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pdp {

namespace {

int nearest_cell(double coord, int extent) {
    int c = static_cast<int>(std::lround(coord * (extent - 1)));
    return std::clamp(c, 0, extent - 1);
}

double kl_terms(const std::vector<double>& p, const std::vector<double>& m) {
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        acc += p[i] * std::log(p[i] / m[i]);
    }
    return acc;
}

} // namespace

double auc(const Grid& pred, const std::vector<GazeAnnotation>& annotations) {
    return auc_on_grid(pred, annotations, pred.rows, pred.cols);
}

double auc_on_grid(const Grid& pred, const std::vector<GazeAnnotation>& annotations,
                   int eval_h, int eval_w) {
    const Grid scores = (eval_h == pred.rows && eval_w == pred.cols)
                            ? pred
                            : resize_bilinear(pred, eval_h, eval_w);
    std::vector<char> positive(static_cast<size_t>(eval_h) * eval_w, 0);
    int npos = 0;
    for (const auto& a : annotations) {
        if (!a.in_frame) continue;
        const size_t idx = static_cast<size_t>(nearest_cell(a.y, eval_h)) * eval_w +
                           nearest_cell(a.x, eval_w);
        if (!positive[idx]) {
            positive[idx] = 1;
            ++npos;
        }
    }
    if (npos == 0) throw std::invalid_argument("auc: no in-frame annotations");
    const int total = eval_h * eval_w;
    const int nneg = total - npos;
    if (nneg == 0) throw std::invalid_argument("auc: every cell is positive");

    // Mann-Whitney U with midranks for ties.
    std::vector<int> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores.v[a] < scores.v[b]; });
    double rank_sum_pos = 0.0;
    int i = 0;
    while (i < total) {
        int j = i;
        while (j < total && scores.v[order[j]] == scores.v[order[i]]) ++j;
        const double midrank = 0.5 * ((i + 1) + j); // ranks are 1-based
        for (int k = i; k < j; ++k)
            if (positive[order[k]]) rank_sum_pos += midrank;
        i = j;
    }
    const double u = rank_sum_pos - 0.5 * npos * (npos + 1);
    return u / (static_cast<double>(npos) * nneg);
}

DistanceResult distances(const Grid& pred, const std::vector<GazeAnnotation>& annotations) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(pred.size()); ++i)
        if (pred.v[i] > pred.v[best]) best = i;
    const int br = best / pred.cols;
    const int bc = best % pred.cols;
    const double px = pred.cols > 1 ? double(bc) / (pred.cols - 1) : 0.0;
    const double py = pred.rows > 1 ? double(br) / (pred.rows - 1) : 0.0;

    double cx = 0.0, cy = 0.0;
    int n = 0;
    double dmin = 0.0;
    bool first = true;
    for (const auto& a : annotations) {
        if (!a.in_frame) continue;
        cx += a.x;
        cy += a.y;
        ++n;
        const double d = std::hypot(px - a.x, py - a.y);
        if (first || d < dmin) {
            dmin = d;
            first = false;
        }
    }
    if (n == 0) throw std::invalid_argument("distances: no in-frame annotations");
    DistanceResult r;
    r.avg = std::hypot(px - cx / n, py - cy / n);
    r.min = dmin;
    return r;
}

double ap_out_of_frame(const std::vector<std::pair<double, bool>>& scores) {
    // detection score = 1 - P_in; positive class = out-of-frame
    std::vector<std::pair<double, bool>> ranked;
    ranked.reserve(scores.size());
    int npos = 0;
    for (const auto& [pin, in_frame] : scores) {
        ranked.emplace_back(1.0 - pin, !in_frame);
        if (!in_frame) ++npos;
    }
    if (npos == 0) throw std::invalid_argument("ap_out_of_frame: no out-of-frame samples");
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    double ap = 0.0;
    int tp = 0;
    for (size_t k = 0; k < ranked.size(); ++k) {
        if (!ranked[k].second) continue;
        ++tp;
        ap += static_cast<double>(tp) / static_cast<double>(k + 1);
    }
    return ap / npos;
}

std::vector<QuantileRow> quantile_breakdown(std::vector<std::pair<double, double>> var_auc) {
    const int n = static_cast<int>(var_auc.size());
    if (n < 10) throw std::invalid_argument("quantile_breakdown: need at least 10 samples");
    std::stable_sort(var_auc.begin(), var_auc.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<QuantileRow> table;
    table.reserve(10);
    const int base = n / 10;
    const int rem = n % 10;
    int idx = 0;
    for (int bin = 0; bin < 10; ++bin) {
        const int count = base + (bin < rem ? 1 : 0);
        QuantileRow row;
        row.count = count;
        row.var_lo = var_auc[idx].first;
        row.var_hi = var_auc[idx + count - 1].first;
        double sv = 0.0, sa = 0.0;
        for (int k = 0; k < count; ++k) {
            sv += var_auc[idx + k].first;
            sa += var_auc[idx + k].second;
        }
        row.mean_var = sv / count;
        row.mean_auc = sa / count;
        table.push_back(row);
        idx += count;
    }
    return table;
}

PatchDistribution pdph(const Grid& pred, int patches_h, int patches_w) {
    if (pred.rows % patches_h != 0 || pred.cols % patches_w != 0)
        throw std::invalid_argument("pdph: heatmap extents must be divisible by the patch grid");
    double mn = pred.v[0];
    for (double v : pred.v) mn = std::min(mn, v);
    const double shift = mn < 0.0 ? -mn : 0.0; // max-pool needs a nonnegative field

    PatchDistribution pd;
    pd.grid_h = patches_h;
    pd.grid_w = patches_w;
    pd.inside.assign(static_cast<size_t>(patches_h) * patches_w, 0.0);
    pd.outside = 0.0;
    const int bh = pred.rows / patches_h;
    const int bw = pred.cols / patches_w;
    double total = 0.0;
    for (int pr = 0; pr < patches_h; ++pr)
        for (int pc = 0; pc < patches_w; ++pc) {
            double mx = pred.at(pr * bh, pc * bw) + shift;
            for (int r = pr * bh; r < (pr + 1) * bh; ++r)
                for (int c = pc * bw; c < (pc + 1) * bw; ++c)
                    mx = std::max(mx, pred.at(r, c) + shift);
            pd.inside[static_cast<size_t>(pr) * patches_w + pc] = mx;
            total += mx;
        }
    if (total <= 0.0) {
        const double u = 1.0 / (patches_h * patches_w);
        std::fill(pd.inside.begin(), pd.inside.end(), u);
        return pd;
    }
    for (double& v : pd.inside) v /= total;
    return pd;
}

double bhattacharyya(const PatchDistribution& p, const PatchDistribution& q) {
    const auto pf = p.full();
    const auto qf = q.full();
    if (pf.size() != qf.size()) throw std::invalid_argument("bhattacharyya: length mismatch");
    double s = 0.0;
    for (size_t i = 0; i < pf.size(); ++i) s += std::sqrt(pf[i] * qf[i]);
    return s;
}

double js_divergence(const PatchDistribution& p, const PatchDistribution& q) {
    const auto pf = p.full();
    const auto qf = q.full();
    if (pf.size() != qf.size()) throw std::invalid_argument("js_divergence: length mismatch");
    std::vector<double> m(pf.size());
    for (size_t i = 0; i < pf.size(); ++i) m[i] = 0.5 * (pf[i] + qf[i]);
    return 0.5 * kl_terms(pf, m) + 0.5 * kl_terms(qf, m);
}

} // namespace pdp
