#pragma once

#include "pdp/layers.hpp"

#include <vector>

namespace pdp {

// Patch distribution head: per-token sigmoid score through two FC layers,
// normalized across tokens to a distribution.
struct PdpHead {
    Linear h1; // C -> C_h
    Linear h2; // C_h -> 1

    struct Result {
        Tensor scores; // (N) raw sigmoid outputs in (0,1)
        Tensor dist;   // (N) normalized, sums to 1
    };

    static PdpHead make(int c, int hidden, Rng& rng);
    Result forward(const Tensor& tokens) const;
    void collect(std::vector<Parameter*>& out);
};

// Conv -> 3 x (deconv + ReLU) -> 1x1 conv over the regrouped inside tokens;
// each deconv doubles the spatial extent, so the output is 8H x 8W.
struct HeatmapHead {
    ConvLayer c_in;
    DeconvLayer d1, d2, d3;
    ConvLayer c_out;
    int grid_h = 0, grid_w = 0, channels = 0;

    static HeatmapHead make(int h, int w, int c, Rng& rng);
    Tensor forward(const Tensor& tokens) const; // (8H, 8W)
    void collect(std::vector<Parameter*>& out);
};

// Ablation-harness replacement for the PDP head: one FC from the mean token
// to a sigmoid in/out probability.
struct InOutHead {
    Linear fc; // C -> 1

    static InOutHead make(int c, Rng& rng);
    Tensor forward(const Tensor& tokens) const; // (1) in (0,1)
    void collect(std::vector<Parameter*>& out);
};

// P_in = 1 - outside mass = sum of the inside entries.
double in_probability(const std::vector<double>& dist_full);

} // namespace pdp
