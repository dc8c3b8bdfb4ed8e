#pragma once

namespace pdp::kernels {

// The FLOP-heavy inner kernels come in two lanes: a serial reference and an
// OpenMP-parallel implementation. Both accumulate every output element in
// the same fixed order, and the parallel lane assigns each output row/plane
// to exactly one thread, so results are identical bit-for-bit regardless of
// thread count. The lane is selected at runtime; tests pin each lane
// explicitly and the benchmark target compares them.
enum class Backend { serial, openmp };

Backend backend();
void set_backend(Backend b);

// Minimum per-call work (multiply-adds) before the openmp lane actually
// forks; below it the parallel lane falls through to serial loops. Thread
// startup costs tens of microseconds here, which dwarfs small kernels.
long long parallel_grain();
void set_parallel_grain(long long mads);

struct Conv2dGeom {
    int cin, h, w;      // input planes
    int cout, ksize;    // square kernel
    int stride, pad;
    int hout, wout;     // hout = (h + 2*pad - ksize)/stride + 1 (floor)
};

struct Deconv2dGeom {
    int cin, h, w;      // input planes
    int cout, ksize;
    int stride, pad, outpad;
    int hout, wout;     // hout = (h-1)*stride - 2*pad + ksize + outpad
};

// y(m x n) = a(m x k) * b(k x n); accumulate adds into y instead of overwriting.
void matmul(const double* a, const double* b, double* y, int m, int k, int n,
            bool accumulate = false);
// y(m x n) = a^T * b with a stored (k x m), b stored (k x n).
void matmul_tn(const double* a, const double* b, double* y, int m, int k, int n,
               bool accumulate = false);
// y(m x n) = a * b^T with a stored (m x k), b stored (n x k).
void matmul_nt(const double* a, const double* b, double* y, int m, int k, int n,
               bool accumulate = false);

// w layout (cout, cin, k, k); bias may be null.
void conv2d_fwd(const Conv2dGeom& g, const double* x, const double* w,
                const double* bias, double* y);
void conv2d_bwd_input(const Conv2dGeom& g, const double* gy, const double* w,
                      double* gx_accum);
void conv2d_bwd_weight(const Conv2dGeom& g, const double* x, const double* gy,
                       double* gw_accum);
void conv2d_bwd_bias(const Conv2dGeom& g, const double* gy, double* gb_accum);

// w layout (cin, cout, k, k): deconv2d with weight w is the adjoint of
// conv2d with the same w (cin here = the conv's cout).
void deconv2d_fwd(const Deconv2dGeom& g, const double* x, const double* w,
                  const double* bias, double* y);
void deconv2d_bwd_input(const Deconv2dGeom& g, const double* gy, const double* w,
                        double* gx_accum);
void deconv2d_bwd_weight(const Deconv2dGeom& g, const double* x, const double* gy,
                         double* gw_accum);
void deconv2d_bwd_bias(const Deconv2dGeom& g, const double* gy, double* gb_accum);

namespace serial {
void matmul(const double* a, const double* b, double* y, int m, int k, int n, bool accumulate);
void matmul_tn(const double* a, const double* b, double* y, int m, int k, int n, bool accumulate);
void matmul_nt(const double* a, const double* b, double* y, int m, int k, int n, bool accumulate);
void conv2d_fwd(const Conv2dGeom& g, const double* x, const double* w, const double* bias, double* y);
void conv2d_bwd_input(const Conv2dGeom& g, const double* gy, const double* w, double* gx_accum);
void conv2d_bwd_weight(const Conv2dGeom& g, const double* x, const double* gy, double* gw_accum);
void conv2d_bwd_bias(const Conv2dGeom& g, const double* gy, double* gb_accum);
void deconv2d_fwd(const Deconv2dGeom& g, const double* x, const double* w, const double* bias, double* y);
void deconv2d_bwd_input(const Deconv2dGeom& g, const double* gy, const double* w, double* gx_accum);
void deconv2d_bwd_weight(const Deconv2dGeom& g, const double* x, const double* gy, double* gw_accum);
void deconv2d_bwd_bias(const Deconv2dGeom& g, const double* gy, double* gb_accum);
} // namespace serial

namespace openmp {
void matmul(const double* a, const double* b, double* y, int m, int k, int n, bool accumulate);
void matmul_tn(const double* a, const double* b, double* y, int m, int k, int n, bool accumulate);
void matmul_nt(const double* a, const double* b, double* y, int m, int k, int n, bool accumulate);
void conv2d_fwd(const Conv2dGeom& g, const double* x, const double* w, const double* bias, double* y);
void conv2d_bwd_input(const Conv2dGeom& g, const double* gy, const double* w, double* gx_accum);
void conv2d_bwd_weight(const Conv2dGeom& g, const double* x, const double* gy, double* gw_accum);
void conv2d_bwd_bias(const Conv2dGeom& g, const double* gy, double* gb_accum);
void deconv2d_fwd(const Deconv2dGeom& g, const double* x, const double* w, const double* bias, double* y);
void deconv2d_bwd_input(const Deconv2dGeom& g, const double* gy, const double* w, double* gx_accum);
void deconv2d_bwd_weight(const Deconv2dGeom& g, const double* x, const double* gy, double* gw_accum);
void deconv2d_bwd_bias(const Deconv2dGeom& g, const double* gy, double* gb_accum);
} // namespace openmp

} // namespace pdp::kernels
