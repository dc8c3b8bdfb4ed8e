#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pdp {

// Plain dense rows x cols double matrix. Used on the data side (ground
// truth, metrics, file I/O); the autodiff Tensor lives in tensor.hpp.
struct Grid {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Grid() = default;
    Grid(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {
        if (r <= 0 || c <= 0) throw std::invalid_argument("Grid: extents must be positive");
    }

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return v.size(); }
};

// Bilinear resample to (out_rows x out_cols). Grid points are placed on the
// [0, rows-1] x [0, cols-1] lattice, matching the g_px = g * (S - 1)
// coordinate convention used everywhere else.
inline Grid resize_bilinear(const Grid& g, int out_rows, int out_cols) {
    if (out_rows <= 0 || out_cols <= 0)
        throw std::invalid_argument("resize_bilinear: extents must be positive");
    Grid out(out_rows, out_cols);
    const double sr = out_rows > 1 ? double(g.rows - 1) / (out_rows - 1) : 0.0;
    const double sc = out_cols > 1 ? double(g.cols - 1) / (out_cols - 1) : 0.0;
    for (int r = 0; r < out_rows; ++r) {
        double fr = r * sr;
        int r0 = static_cast<int>(fr);
        if (r0 >= g.rows - 1) r0 = g.rows - 2 >= 0 ? g.rows - 2 : 0;
        double wr = g.rows > 1 ? fr - r0 : 0.0;
        int r1 = g.rows > 1 ? r0 + 1 : r0;
        for (int c = 0; c < out_cols; ++c) {
            double fc = c * sc;
            int c0 = static_cast<int>(fc);
            if (c0 >= g.cols - 1) c0 = g.cols - 2 >= 0 ? g.cols - 2 : 0;
            double wc = g.cols > 1 ? fc - c0 : 0.0;
            int c1 = g.cols > 1 ? c0 + 1 : c0;
            out.at(r, c) = (1 - wr) * ((1 - wc) * g.at(r0, c0) + wc * g.at(r0, c1)) +
                           wr * ((1 - wc) * g.at(r1, c0) + wc * g.at(r1, c1));
        }
    }
    return out;
}

} // namespace pdp
