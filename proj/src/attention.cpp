#include "pdp/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace pdp {

Tokenizer Tokenizer::make(int h, int w, int c, Rng& rng) {
    Tokenizer t;
    t.grid_h = h;
    t.grid_w = w;
    t.channels = c;
    t.x_out = {"tokenizer.x_out", init_normal({1, c}, 0.02, rng), false};
    t.pos_emb = {"tokenizer.pos_emb", init_normal({h * w + 1, c}, 0.02, rng), false};
    return t;
}

Tensor Tokenizer::forward(const Tensor& f_enc) const {
    if (f_enc.rank() != 3 || f_enc.dim(0) != channels || f_enc.dim(1) != grid_h ||
        f_enc.dim(2) != grid_w)
        throw std::invalid_argument("Tokenizer: feature grid shape mismatch");
    // (C,H,W) -> (C,H*W) -> (H*W,C); grid cell (r,c) becomes token r*W+c.
    Tensor tokens = transpose(reshape(f_enc, {channels, grid_h * grid_w}));
    return add(concat_rows({tokens, x_out.tensor}), pos_emb.tensor);
}

void Tokenizer::collect(std::vector<Parameter*>& out) {
    out.push_back(&x_out);
    out.push_back(&pos_emb);
}

PatchAttention PatchAttention::make(int c, bool scaled, Rng& rng) {
    PatchAttention a;
    a.wq = {"patch_attn.wq", init_uniform({c, c}, c, rng), false};
    a.wk = {"patch_attn.wk", init_uniform({c, c}, c, rng), false};
    a.wv = {"patch_attn.wv", init_uniform({c, c}, c, rng), false};
    a.scaled = scaled;
    return a;
}

PatchAttention::Result PatchAttention::forward(const Tensor& tokens) const {
    Tensor q = matmul(tokens, transpose(wq.tensor));
    Tensor k = matmul(tokens, transpose(wk.tensor));
    Tensor v = matmul(tokens, transpose(wv.tensor));
    Tensor scores = matmul(q, transpose(k));
    if (scaled) scores = mul_scalar(scores, 1.0 / std::sqrt(double(tokens.dim(1))));
    Tensor att = softmax(scores, 1);
    return {add(tokens, matmul(att, v)), att};
}

void PatchAttention::collect(std::vector<Parameter*>& out) {
    out.push_back(&wq);
    out.push_back(&wk);
    out.push_back(&wv);
}

TemporalAttention TemporalAttention::make(int tokens, int c, Rng& rng) {
    TemporalAttention t;
    t.compress_w = {"temporal_attn.compress.w", init_uniform({c, 1}, c, rng), false};
    t.compress_b = {"temporal_attn.compress.b", Tensor::zeros({1}, true), false};
    t.wq = {"temporal_attn.wq", init_uniform({tokens, tokens}, tokens, rng), false};
    t.wk = {"temporal_attn.wk", init_uniform({tokens, tokens}, tokens, rng), false};
    t.wv = {"temporal_attn.wv", init_uniform({tokens, tokens}, tokens, rng), false};
    t.expand_w = {"temporal_attn.expand.w", init_uniform({1, c}, 1, rng), false};
    t.expand_b = {"temporal_attn.expand.b", Tensor::zeros({c}, true), false};
    t.ln_gain = {"temporal_attn.ln.gain", Tensor::full({c}, 1.0, true), false};
    t.ln_bias = {"temporal_attn.ln.bias", Tensor::zeros({c}, true), false};
    return t;
}

TemporalAttention::Result TemporalAttention::forward(const std::vector<Tensor>& frames) const {
    if (frames.empty()) throw std::invalid_argument("TemporalAttention: empty clip");
    const int t_count = static_cast<int>(frames.size());
    if (t_count == 1) return {frames, Tensor()}; // single-image bypass

    const int n = frames[0].dim(0);
    for (const auto& f : frames)
        if (f.rank() != 2 || f.dim(0) != n || f.dim(1) != frames[0].dim(1))
            throw std::invalid_argument("TemporalAttention: inconsistent frame shapes");

    // Per-token C -> 1 compression, stacked to (T, N).
    std::vector<Tensor> rows;
    rows.reserve(frames.size());
    for (const auto& f : frames)
        rows.push_back(transpose(add_rowvec(matmul(f, compress_w.tensor), compress_b.tensor)));
    Tensor compressed = concat_rows(rows);

    Tensor q = matmul(compressed, transpose(wq.tensor));
    Tensor k = matmul(compressed, transpose(wk.tensor));
    Tensor v = matmul(compressed, transpose(wv.tensor));
    Tensor att = softmax(matmul(q, transpose(k)), 1);
    Tensor mixed = matmul(att, v); // (T, N)

    Result res;
    res.att = att;
    res.frames.reserve(frames.size());
    for (int t = 0; t < t_count; ++t) {
        Tensor col = transpose(slice_rows(mixed, t, t + 1)); // (N, 1)
        Tensor expanded = add_rowvec(matmul(col, expand_w.tensor), expand_b.tensor);
        res.frames.push_back(
            layer_norm(add(frames[t], expanded), 1, ln_gain.tensor, ln_bias.tensor, ln_eps));
    }
    return res;
}

void TemporalAttention::collect(std::vector<Parameter*>& out) {
    out.push_back(&compress_w);
    out.push_back(&compress_b);
    out.push_back(&wq);
    out.push_back(&wk);
    out.push_back(&wv);
    out.push_back(&expand_w);
    out.push_back(&expand_b);
    out.push_back(&ln_gain);
    out.push_back(&ln_bias);
}

} // namespace pdp
