#pragma once

#include "pdp/adam.hpp"
#include "pdp/rng.hpp"
#include "pdp/tensor.hpp"

#include <string>
#include <vector>

namespace pdp {

// Fan-in-scaled uniform init, U(+-sqrt(1/fan_in)); biases start at zero.
inline Tensor init_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    const double b = std::sqrt(1.0 / fan_in);
    for (double& v : t.data()) v = rng.uniform(-b, b);
    return t;
}

inline Tensor init_normal(std::vector<int> shape, double stddev, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (double& v : t.data()) v = rng.normal(0.0, stddev);
    return t;
}

struct ConvLayer {
    Parameter w, b;
    int stride = 1, pad = 0;

    static ConvLayer make(const std::string& prefix, int cin, int cout, int k,
                          int stride, int pad, Rng& rng) {
        ConvLayer l;
        l.w = {prefix + ".w", init_uniform({cout, cin, k, k}, cin * k * k, rng), false};
        l.b = {prefix + ".b", Tensor::zeros({cout}, true), false};
        l.stride = stride;
        l.pad = pad;
        return l;
    }
    Tensor forward(const Tensor& x) const { return conv2d(x, w.tensor, b.tensor, stride, pad); }
    void collect(std::vector<Parameter*>& out) { out.push_back(&w); out.push_back(&b); }
};

struct DeconvLayer {
    Parameter w, b;
    int stride = 1, pad = 0, out_pad = 0;

    static DeconvLayer make(const std::string& prefix, int cin, int cout, int k,
                            int stride, int pad, int out_pad, Rng& rng) {
        DeconvLayer l;
        l.w = {prefix + ".w", init_uniform({cin, cout, k, k}, cin * k * k, rng), false};
        l.b = {prefix + ".b", Tensor::zeros({cout}, true), false};
        l.stride = stride;
        l.pad = pad;
        l.out_pad = out_pad;
        return l;
    }
    Tensor forward(const Tensor& x) const {
        return deconv2d(x, w.tensor, b.tensor, stride, pad, out_pad);
    }
    void collect(std::vector<Parameter*>& out) { out.push_back(&w); out.push_back(&b); }
};

// y = x * w^T + b with w stored (out, in); x is (rows, in).
struct Linear {
    Parameter w, b;

    static Linear make(const std::string& prefix, int in, int out, Rng& rng) {
        Linear l;
        l.w = {prefix + ".w", init_uniform({out, in}, in, rng), false};
        l.b = {prefix + ".b", Tensor::zeros({out}, true), false};
        return l;
    }
    Tensor forward(const Tensor& x) const {
        return add_rowvec(matmul(x, transpose(w.tensor)), b.tensor);
    }
    void collect(std::vector<Parameter*>& out) { out.push_back(&w); out.push_back(&b); }
};

} // namespace pdp
