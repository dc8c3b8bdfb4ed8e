#pragma once

#include "pdp/attention.hpp"
#include "pdp/features.hpp"
#include "pdp/gt.hpp"
#include "pdp/heads.hpp"

#include <string>
#include <vector>

namespace pdp {

enum class HeadVariant { pdp, inout };

struct ModelConfig {
    int image_size = 64;
    std::vector<int> conv_channels = {16, 32, 64, 32}; // stride-2 blocks; last entry is C_b
    int enc_channels = 32;                             // C
    int pdp_hidden = 16;                               // C_h
    bool attn_scale = false;      // optional 1/sqrt(C) factor in patch attention
    HeadVariant head_variant = HeadVariant::pdp;
    double sigma = 0.0;           // 0 -> 3 * heatmap_size / 56

    int blocks() const { return static_cast<int>(conv_channels.size()); }
    int grid_h() const { return image_size >> blocks(); }
    int grid_w() const { return grid_h(); }
    int token_count() const { return grid_h() * grid_w() + 1; }
    int heatmap_size() const { return 8 * grid_h(); }
    double effective_sigma() const {
        return sigma > 0.0 ? sigma : 3.0 * heatmap_size() / 56.0;
    }
    void validate() const;

    // Finite-difference-friendly toy shapes (S=16, H=W=2, C=8).
    static ModelConfig toy();
};

struct ModelOutput {
    Tensor tokens;    // f_g, (H*W+1, C)
    Tensor heatmap;   // (H', W'), unclamped
    Tensor pd_scores; // (H*W+1) raw sigmoid scores (pdp variant)
    Tensor pd;        // (H*W+1) normalized distribution (pdp variant)
    Tensor p_in;      // (1) in/out probability (inout variant)
    Tensor patch_att; // (N, N) patch attention weights

    double p_in_value() const;
    PatchDistribution distribution(int grid_h, int grid_w) const;
};

struct SequenceOutput {
    std::vector<ModelOutput> frames;
    Tensor temporal_att; // (T, T); undefined for T == 1
};

struct PdpModel {
    ModelConfig cfg;
    FeatureExtractor extractor;
    Tokenizer tokenizer;
    PatchAttention patch_attn;
    TemporalAttention temporal_attn;
    PdpHead pdp_head;       // active for HeadVariant::pdp
    InOutHead inout_head;   // active for HeadVariant::inout
    HeatmapHead heatmap_head;

    static PdpModel make(const ModelConfig& cfg, uint64_t seed);

    // Stable-order views of the trainable parameters; names are unique.
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

    // Freeze everything up to and including the patch attention module
    // (the video-phase fine-tuning boundary).
    void freeze_through_patch_attention(bool frozen);
    void zero_grad();

    ModelOutput forward_single(const SceneInputTensors& in) const;
    SequenceOutput forward_sequence(const std::vector<SceneInputTensors>& frames) const;

private:
    ModelOutput heads_from_tokens(Tensor f_g, Tensor patch_att) const;
};

} // namespace pdp
