#include "pdp/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pdp::kernels {

namespace {

std::atomic<Backend>& backend_flag() {
    static std::atomic<Backend> b{Backend::openmp};
    return b;
}

std::atomic<long long>& grain_flag() {
    static std::atomic<long long> g{1 << 23};
    return g;
}

// Gather src patches into cols (C*k*k rows, out_h*out_w columns). Reads
// src[c][oy*stride + ky - pad][ox*stride + kx - pad], zero outside bounds.
inline void im2col_row(const double* src, int src_h, int src_w, int k, int stride,
                       int pad, int out_h, int out_w, int r, double* cols_row) {
    const int c = r / (k * k);
    const int ky = (r / k) % k;
    const int kx = r % k;
    const double* plane = src + static_cast<size_t>(c) * src_h * src_w;
    double* dst = cols_row;
    for (int oy = 0; oy < out_h; ++oy) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= src_h) {
            std::fill(dst, dst + out_w, 0.0);
            dst += out_w;
            continue;
        }
        const double* srow = plane + static_cast<size_t>(iy) * src_w;
        for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride + kx - pad;
            *dst++ = (ix >= 0 && ix < src_w) ? srow[ix] : 0.0;
        }
    }
}

// Scatter-add one channel block of cols back into dst; the inverse indexing
// of im2col_row. All writes for channel c land in dst plane c only.
inline void col2im_add_plane(const double* cols, int dst_h, int dst_w, int k,
                             int stride, int pad, int out_h, int out_w, int c,
                             double* dst) {
    double* plane = dst + static_cast<size_t>(c) * dst_h * dst_w;
    const size_t pcount = static_cast<size_t>(out_h) * out_w;
    for (int kk = 0; kk < k * k; ++kk) {
        const int ky = kk / k;
        const int kx = kk % k;
        const double* crow = cols + (static_cast<size_t>(c) * k * k + kk) * pcount;
        for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= dst_h) continue;
            double* drow = plane + static_cast<size_t>(iy) * dst_w;
            const double* cr = crow + static_cast<size_t>(oy) * out_w;
            for (int ox = 0; ox < out_w; ++ox) {
                const int ix = ox * stride + kx - pad;
                if (ix >= 0 && ix < dst_w) drow[ix] += cr[ox];
            }
        }
    }
}

inline void matmul_row(const double* a, const double* b, double* y, int k, int n,
                       int i, bool accumulate) {
    double* yr = y + static_cast<size_t>(i) * n;
    if (!accumulate) std::fill(yr, yr + n, 0.0);
    const double* ar = a + static_cast<size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
        const double av = ar[kk];
        const double* br = b + static_cast<size_t>(kk) * n;
        for (int j = 0; j < n; ++j) yr[j] += av * br[j];
    }
}

inline void matmul_tn_row(const double* a, const double* b, double* y, int m, int k,
                          int n, int i, bool accumulate) {
    double* yr = y + static_cast<size_t>(i) * n;
    if (!accumulate) std::fill(yr, yr + n, 0.0);
    for (int kk = 0; kk < k; ++kk) {
        const double av = a[static_cast<size_t>(kk) * m + i];
        const double* br = b + static_cast<size_t>(kk) * n;
        for (int j = 0; j < n; ++j) yr[j] += av * br[j];
    }
}

inline void matmul_nt_row(const double* a, const double* b, double* y, int k, int n,
                          int i, bool accumulate) {
    const double* ar = a + static_cast<size_t>(i) * k;
    double* yr = y + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
        const double* br = b + static_cast<size_t>(j) * k;
        double s = 0.0;
        for (int kk = 0; kk < k; ++kk) s += ar[kk] * br[kk];
        if (accumulate) yr[j] += s; else yr[j] = s;
    }
}

inline size_t conv_cols_rows(const Conv2dGeom& g) {
    return static_cast<size_t>(g.cin) * g.ksize * g.ksize;
}

inline size_t deconv_cols_rows(const Deconv2dGeom& g) {
    return static_cast<size_t>(g.cout) * g.ksize * g.ksize;
}

} // namespace

Backend backend() { return backend_flag().load(); }
void set_backend(Backend b) { backend_flag().store(b); }

long long parallel_grain() { return grain_flag().load(); }
void set_parallel_grain(long long mads) { grain_flag().store(mads); }

// ---------------------------------------------------------------------------
// serial lane
// ---------------------------------------------------------------------------

namespace serial {

void matmul(const double* a, const double* b, double* y, int m, int k, int n,
            bool accumulate) {
    for (int i = 0; i < m; ++i) matmul_row(a, b, y, k, n, i, accumulate);
}

void matmul_tn(const double* a, const double* b, double* y, int m, int k, int n,
               bool accumulate) {
    for (int i = 0; i < m; ++i) matmul_tn_row(a, b, y, m, k, n, i, accumulate);
}

void matmul_nt(const double* a, const double* b, double* y, int m, int k, int n,
               bool accumulate) {
    for (int i = 0; i < m; ++i) matmul_nt_row(a, b, y, k, n, i, accumulate);
}

void conv2d_fwd(const Conv2dGeom& g, const double* x, const double* w,
                const double* bias, double* y) {
    const int R = static_cast<int>(conv_cols_rows(g));
    const int P = g.hout * g.wout;
    std::vector<double> cols(static_cast<size_t>(R) * P);
    for (int r = 0; r < R; ++r)
        im2col_row(x, g.h, g.w, g.ksize, g.stride, g.pad, g.hout, g.wout, r,
                   cols.data() + static_cast<size_t>(r) * P);
    for (int co = 0; co < g.cout; ++co) {
        double* yr = y + static_cast<size_t>(co) * P;
        std::fill(yr, yr + P, bias ? bias[co] : 0.0);
    }
    matmul(w, cols.data(), y, g.cout, R, P, true);
}

void conv2d_bwd_input(const Conv2dGeom& g, const double* gy, const double* w,
                      double* gx_accum) {
    const int R = static_cast<int>(conv_cols_rows(g));
    const int P = g.hout * g.wout;
    std::vector<double> dcols(static_cast<size_t>(R) * P);
    matmul_tn(w, gy, dcols.data(), R, g.cout, P, false);
    for (int c = 0; c < g.cin; ++c)
        col2im_add_plane(dcols.data(), g.h, g.w, g.ksize, g.stride, g.pad, g.hout,
                         g.wout, c, gx_accum);
}

void conv2d_bwd_weight(const Conv2dGeom& g, const double* x, const double* gy,
                       double* gw_accum) {
    const int R = static_cast<int>(conv_cols_rows(g));
    const int P = g.hout * g.wout;
    std::vector<double> cols(static_cast<size_t>(R) * P);
    for (int r = 0; r < R; ++r)
        im2col_row(x, g.h, g.w, g.ksize, g.stride, g.pad, g.hout, g.wout, r,
                   cols.data() + static_cast<size_t>(r) * P);
    matmul_nt(gy, cols.data(), gw_accum, g.cout, P, R, true);
}

void conv2d_bwd_bias(const Conv2dGeom& g, const double* gy, double* gb_accum) {
    const size_t P = static_cast<size_t>(g.hout) * g.wout;
    for (int co = 0; co < g.cout; ++co) {
        const double* row = gy + co * P;
        double s = 0.0;
        for (size_t p = 0; p < P; ++p) s += row[p];
        gb_accum[co] += s;
    }
}

void deconv2d_fwd(const Deconv2dGeom& g, const double* x, const double* w,
                  const double* bias, double* y) {
    const int R = static_cast<int>(deconv_cols_rows(g));
    const int P = g.h * g.w;
    std::vector<double> dcols(static_cast<size_t>(R) * P);
    matmul_tn(w, x, dcols.data(), R, g.cin, P, false);
    for (int cb = 0; cb < g.cout; ++cb) {
        double* plane = y + static_cast<size_t>(cb) * g.hout * g.wout;
        std::fill(plane, plane + static_cast<size_t>(g.hout) * g.wout,
                  bias ? bias[cb] : 0.0);
        col2im_add_plane(dcols.data(), g.hout, g.wout, g.ksize, g.stride, g.pad,
                         g.h, g.w, cb, y);
    }
}

void deconv2d_bwd_input(const Deconv2dGeom& g, const double* gy, const double* w,
                        double* gx_accum) {
    const int R = static_cast<int>(deconv_cols_rows(g));
    const int P = g.h * g.w;
    std::vector<double> cols(static_cast<size_t>(R) * P);
    for (int r = 0; r < R; ++r)
        im2col_row(gy, g.hout, g.wout, g.ksize, g.stride, g.pad, g.h, g.w, r,
                   cols.data() + static_cast<size_t>(r) * P);
    matmul(w, cols.data(), gx_accum, g.cin, R, P, true);
}

void deconv2d_bwd_weight(const Deconv2dGeom& g, const double* x, const double* gy,
                         double* gw_accum) {
    const int R = static_cast<int>(deconv_cols_rows(g));
    const int P = g.h * g.w;
    std::vector<double> cols(static_cast<size_t>(R) * P);
    for (int r = 0; r < R; ++r)
        im2col_row(gy, g.hout, g.wout, g.ksize, g.stride, g.pad, g.h, g.w, r,
                   cols.data() + static_cast<size_t>(r) * P);
    matmul_nt(x, cols.data(), gw_accum, g.cin, P, R, true);
}

void deconv2d_bwd_bias(const Deconv2dGeom& g, const double* gy, double* gb_accum) {
    const size_t P = static_cast<size_t>(g.hout) * g.wout;
    for (int cb = 0; cb < g.cout; ++cb) {
        const double* row = gy + cb * P;
        double s = 0.0;
        for (size_t p = 0; p < P; ++p) s += row[p];
        gb_accum[cb] += s;
    }
}

} // namespace serial

// ---------------------------------------------------------------------------
// OpenMP lane. Work is split by output row / channel plane, so every output
// element is still produced by a single thread in the serial accumulation
// order; results match the serial lane bit-for-bit for any thread count.
// ---------------------------------------------------------------------------

namespace openmp {

void matmul(const double* a, const double* b, double* y, int m, int k, int n,
            bool accumulate) {
    if (m <= 1 || 1LL * m * k * n <= parallel_grain()) {
        serial::matmul(a, b, y, m, k, n, accumulate);
        return;
    }
    #pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) matmul_row(a, b, y, k, n, i, accumulate);
}

void matmul_tn(const double* a, const double* b, double* y, int m, int k, int n,
               bool accumulate) {
    if (m <= 1 || 1LL * m * k * n <= parallel_grain()) {
        serial::matmul_tn(a, b, y, m, k, n, accumulate);
        return;
    }
    #pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) matmul_tn_row(a, b, y, m, k, n, i, accumulate);
}

void matmul_nt(const double* a, const double* b, double* y, int m, int k, int n,
               bool accumulate) {
    if (m <= 1 || 1LL * m * k * n <= parallel_grain()) {
        serial::matmul_nt(a, b, y, m, k, n, accumulate);
        return;
    }
    #pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) matmul_nt_row(a, b, y, k, n, i, accumulate);
}

void conv2d_fwd(const Conv2dGeom& g, const double* x, const double* w,
                const double* bias, double* y) {
    const int R = static_cast<int>(conv_cols_rows(g));
    const int P = g.hout * g.wout;
    std::vector<double> cols(static_cast<size_t>(R) * P);
    if (R > 1 && 1LL * R * P > parallel_grain()) {
        #pragma omp parallel for schedule(static)
        for (int r = 0; r < R; ++r)
            im2col_row(x, g.h, g.w, g.ksize, g.stride, g.pad, g.hout, g.wout, r,
                       cols.data() + static_cast<size_t>(r) * P);
    } else {
        for (int r = 0; r < R; ++r)
            im2col_row(x, g.h, g.w, g.ksize, g.stride, g.pad, g.hout, g.wout, r,
                       cols.data() + static_cast<size_t>(r) * P);
    }
    for (int co = 0; co < g.cout; ++co) {
        double* yr = y + static_cast<size_t>(co) * P;
        std::fill(yr, yr + P, bias ? bias[co] : 0.0);
    }
    matmul(w, cols.data(), y, g.cout, R, P, true);
}

void conv2d_bwd_input(const Conv2dGeom& g, const double* gy, const double* w,
                      double* gx_accum) {
    const int R = static_cast<int>(conv_cols_rows(g));
    const int P = g.hout * g.wout;
    std::vector<double> dcols(static_cast<size_t>(R) * P);
    matmul_tn(w, gy, dcols.data(), R, g.cout, P, false);
    if (g.cin > 1 && 1LL * g.cin * g.ksize * g.ksize * P > parallel_grain()) {
        #pragma omp parallel for schedule(static)
        for (int c = 0; c < g.cin; ++c)
            col2im_add_plane(dcols.data(), g.h, g.w, g.ksize, g.stride, g.pad, g.hout,
                             g.wout, c, gx_accum);
    } else {
        for (int c = 0; c < g.cin; ++c)
            col2im_add_plane(dcols.data(), g.h, g.w, g.ksize, g.stride, g.pad, g.hout,
                             g.wout, c, gx_accum);
    }
}

void conv2d_bwd_weight(const Conv2dGeom& g, const double* x, const double* gy,
                       double* gw_accum) {
    const int R = static_cast<int>(conv_cols_rows(g));
    const int P = g.hout * g.wout;
    std::vector<double> cols(static_cast<size_t>(R) * P);
    if (R > 1 && 1LL * R * P > parallel_grain()) {
        #pragma omp parallel for schedule(static)
        for (int r = 0; r < R; ++r)
            im2col_row(x, g.h, g.w, g.ksize, g.stride, g.pad, g.hout, g.wout, r,
                       cols.data() + static_cast<size_t>(r) * P);
    } else {
        for (int r = 0; r < R; ++r)
            im2col_row(x, g.h, g.w, g.ksize, g.stride, g.pad, g.hout, g.wout, r,
                       cols.data() + static_cast<size_t>(r) * P);
    }
    matmul_nt(gy, cols.data(), gw_accum, g.cout, P, R, true);
}

void conv2d_bwd_bias(const Conv2dGeom& g, const double* gy, double* gb_accum) {
    serial::conv2d_bwd_bias(g, gy, gb_accum);
}

void deconv2d_fwd(const Deconv2dGeom& g, const double* x, const double* w,
                  const double* bias, double* y) {
    const int R = static_cast<int>(deconv_cols_rows(g));
    const int P = g.h * g.w;
    std::vector<double> dcols(static_cast<size_t>(R) * P);
    matmul_tn(w, x, dcols.data(), R, g.cin, P, false);
    if (g.cout > 1 && 1LL * g.cout * g.ksize * g.ksize * P > parallel_grain()) {
        #pragma omp parallel for schedule(static)
        for (int cb = 0; cb < g.cout; ++cb) {
            double* plane = y + static_cast<size_t>(cb) * g.hout * g.wout;
            std::fill(plane, plane + static_cast<size_t>(g.hout) * g.wout,
                      bias ? bias[cb] : 0.0);
            col2im_add_plane(dcols.data(), g.hout, g.wout, g.ksize, g.stride, g.pad,
                             g.h, g.w, cb, y);
        }
    } else {
        for (int cb = 0; cb < g.cout; ++cb) {
            double* plane = y + static_cast<size_t>(cb) * g.hout * g.wout;
            std::fill(plane, plane + static_cast<size_t>(g.hout) * g.wout,
                      bias ? bias[cb] : 0.0);
            col2im_add_plane(dcols.data(), g.hout, g.wout, g.ksize, g.stride, g.pad,
                             g.h, g.w, cb, y);
        }
    }
}

void deconv2d_bwd_input(const Deconv2dGeom& g, const double* gy, const double* w,
                        double* gx_accum) {
    const int R = static_cast<int>(deconv_cols_rows(g));
    const int P = g.h * g.w;
    std::vector<double> cols(static_cast<size_t>(R) * P);
    if (R > 1 && 1LL * R * P > parallel_grain()) {
        #pragma omp parallel for schedule(static)
        for (int r = 0; r < R; ++r)
            im2col_row(gy, g.hout, g.wout, g.ksize, g.stride, g.pad, g.h, g.w, r,
                       cols.data() + static_cast<size_t>(r) * P);
    } else {
        for (int r = 0; r < R; ++r)
            im2col_row(gy, g.hout, g.wout, g.ksize, g.stride, g.pad, g.h, g.w, r,
                       cols.data() + static_cast<size_t>(r) * P);
    }
    matmul(w, cols.data(), gx_accum, g.cin, R, P, true);
}

void deconv2d_bwd_weight(const Deconv2dGeom& g, const double* x, const double* gy,
                         double* gw_accum) {
    const int R = static_cast<int>(deconv_cols_rows(g));
    const int P = g.h * g.w;
    std::vector<double> cols(static_cast<size_t>(R) * P);
    if (R > 1 && 1LL * R * P > parallel_grain()) {
        #pragma omp parallel for schedule(static)
        for (int r = 0; r < R; ++r)
            im2col_row(gy, g.hout, g.wout, g.ksize, g.stride, g.pad, g.h, g.w, r,
                       cols.data() + static_cast<size_t>(r) * P);
    } else {
        for (int r = 0; r < R; ++r)
            im2col_row(gy, g.hout, g.wout, g.ksize, g.stride, g.pad, g.h, g.w, r,
                       cols.data() + static_cast<size_t>(r) * P);
    }
    matmul_nt(x, cols.data(), gw_accum, g.cin, P, R, true);
}

void deconv2d_bwd_bias(const Deconv2dGeom& g, const double* gy, double* gb_accum) {
    serial::deconv2d_bwd_bias(g, gy, gb_accum);
}

} // namespace openmp

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

#define PDP_DISPATCH(fn, ...)                                     \
    do {                                                          \
        if (backend() == Backend::serial) serial::fn(__VA_ARGS__); \
        else openmp::fn(__VA_ARGS__);                             \
    } while (0)

void matmul(const double* a, const double* b, double* y, int m, int k, int n,
            bool accumulate) {
    PDP_DISPATCH(matmul, a, b, y, m, k, n, accumulate);
}
void matmul_tn(const double* a, const double* b, double* y, int m, int k, int n,
               bool accumulate) {
    PDP_DISPATCH(matmul_tn, a, b, y, m, k, n, accumulate);
}
void matmul_nt(const double* a, const double* b, double* y, int m, int k, int n,
               bool accumulate) {
    PDP_DISPATCH(matmul_nt, a, b, y, m, k, n, accumulate);
}
void conv2d_fwd(const Conv2dGeom& g, const double* x, const double* w,
                const double* bias, double* y) {
    PDP_DISPATCH(conv2d_fwd, g, x, w, bias, y);
}
void conv2d_bwd_input(const Conv2dGeom& g, const double* gy, const double* w,
                      double* gx_accum) {
    PDP_DISPATCH(conv2d_bwd_input, g, gy, w, gx_accum);
}
void conv2d_bwd_weight(const Conv2dGeom& g, const double* x, const double* gy,
                       double* gw_accum) {
    PDP_DISPATCH(conv2d_bwd_weight, g, x, gy, gw_accum);
}
void conv2d_bwd_bias(const Conv2dGeom& g, const double* gy, double* gb_accum) {
    PDP_DISPATCH(conv2d_bwd_bias, g, gy, gb_accum);
}
void deconv2d_fwd(const Deconv2dGeom& g, const double* x, const double* w,
                  const double* bias, double* y) {
    PDP_DISPATCH(deconv2d_fwd, g, x, w, bias, y);
}
void deconv2d_bwd_input(const Deconv2dGeom& g, const double* gy, const double* w,
                        double* gx_accum) {
    PDP_DISPATCH(deconv2d_bwd_input, g, gy, w, gx_accum);
}
void deconv2d_bwd_weight(const Deconv2dGeom& g, const double* x, const double* gy,
                         double* gw_accum) {
    PDP_DISPATCH(deconv2d_bwd_weight, g, x, gy, gw_accum);
}
void deconv2d_bwd_bias(const Deconv2dGeom& g, const double* gy, double* gb_accum) {
    PDP_DISPATCH(deconv2d_bwd_bias, g, gy, gb_accum);
}

#undef PDP_DISPATCH

} // namespace pdp::kernels
