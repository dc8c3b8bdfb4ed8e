#pragma once

#include "pdp/layers.hpp"

#include <vector>

namespace pdp {

// Flattens f_enc (C,H,W) into H*W row-major patch tokens, appends the
// learnable outside token, and adds positional embeddings.
struct Tokenizer {
    Parameter x_out;   // (1, C)
    Parameter pos_emb; // (H*W+1, C)
    int grid_h = 0, grid_w = 0, channels = 0;

    static Tokenizer make(int h, int w, int c, Rng& rng);
    Tensor forward(const Tensor& f_enc) const; // (H*W+1, C)
    void collect(std::vector<Parameter*>& out);
};

// Dot-product self attention over tokens with a residual connection:
// out = x + softmax(q k^T) v. No 1/sqrt(C) scaling unless `scaled` is set.
struct PatchAttention {
    Parameter wq, wk, wv; // (C, C)
    bool scaled = false;

    struct Result {
        Tensor out; // (N, C)
        Tensor att; // (N, N), rows sum to 1
    };

    static PatchAttention make(int c, bool scaled, Rng& rng);
    Result forward(const Tensor& tokens) const;
    void collect(std::vector<Parameter*>& out);
};

// Attention across the frames of a clip on per-token compressed (C -> 1)
// features, with a learned 1 -> C expansion back and a LayerNorm on the
// residual sum. A single frame bypasses the module entirely.
struct TemporalAttention {
    Parameter compress_w; // (C, 1)
    Parameter compress_b; // (1)
    Parameter wq, wk, wv; // (N, N) with N = H*W+1
    Parameter expand_w;   // (1, C)
    Parameter expand_b;   // (C)
    Parameter ln_gain, ln_bias; // (C)
    double ln_eps = 1e-5;

    struct Result {
        std::vector<Tensor> frames;
        Tensor att; // (T, T); undefined for T == 1
    };

    static TemporalAttention make(int tokens, int c, Rng& rng);
    Result forward(const std::vector<Tensor>& frames) const;
    void collect(std::vector<Parameter*>& out);
};

} // namespace pdp
