#include "pdp/heads.hpp"

#include <stdexcept>

namespace pdp {

PdpHead PdpHead::make(int c, int hidden, Rng& rng) {
    PdpHead h;
    h.h1 = Linear::make("pdp_head.h1", c, hidden, rng);
    h.h2 = Linear::make("pdp_head.h2", hidden, 1, rng);
    return h;
}

PdpHead::Result PdpHead::forward(const Tensor& tokens) const {
    Tensor pi = sigmoid(h2.forward(relu(h1.forward(tokens)))); // (N, 1)
    Tensor scores = reshape(pi, {tokens.dim(0)});
    return {scores, normalize_sum(scores)};
}

void PdpHead::collect(std::vector<Parameter*>& out) {
    h1.collect(out);
    h2.collect(out);
}

HeatmapHead HeatmapHead::make(int h, int w, int c, Rng& rng) {
    if (c % 8 != 0) throw std::invalid_argument("HeatmapHead: channels must be divisible by 8");
    HeatmapHead hh;
    hh.grid_h = h;
    hh.grid_w = w;
    hh.channels = c;
    hh.c_in = ConvLayer::make("heatmap_head.c_in", c, c / 2, 3, 1, 1, rng);
    hh.d1 = DeconvLayer::make("heatmap_head.d1", c / 2, c / 4, 3, 2, 1, 1, rng);
    hh.d2 = DeconvLayer::make("heatmap_head.d2", c / 4, c / 8, 3, 2, 1, 1, rng);
    hh.d3 = DeconvLayer::make("heatmap_head.d3", c / 8, c / 8, 3, 2, 1, 1, rng);
    hh.c_out = ConvLayer::make("heatmap_head.c_out", c / 8, 1, 1, 1, 0, rng);
    return hh;
}

Tensor HeatmapHead::forward(const Tensor& tokens) const {
    // Inside tokens only; the outside token never reaches the heatmap.
    Tensor inside = slice_rows(tokens, 0, grid_h * grid_w);
    Tensor fm = reshape(transpose(inside), {channels, grid_h, grid_w});
    Tensor x = c_in.forward(fm);
    x = relu(d1.forward(x));
    x = relu(d2.forward(x));
    x = relu(d3.forward(x));
    Tensor y = c_out.forward(x); // (1, 8H, 8W)
    return reshape(y, {y.dim(1), y.dim(2)});
}

void HeatmapHead::collect(std::vector<Parameter*>& out) {
    c_in.collect(out);
    d1.collect(out);
    d2.collect(out);
    d3.collect(out);
    c_out.collect(out);
}

InOutHead InOutHead::make(int c, Rng& rng) {
    InOutHead h;
    h.fc = Linear::make("inout_head.fc", c, 1, rng);
    return h;
}

Tensor InOutHead::forward(const Tensor& tokens) const {
    Tensor pooled = mean_rows(tokens);
    Tensor logits = fc.forward(reshape(pooled, {1, pooled.dim(0)}));
    return reshape(sigmoid(logits), {1});
}

void InOutHead::collect(std::vector<Parameter*>& out) { fc.collect(out); }

double in_probability(const std::vector<double>& dist_full) {
    return 1.0 - dist_full.back();
}

} // namespace pdp
