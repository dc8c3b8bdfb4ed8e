#pragma once

#include "pdp/layers.hpp"

#include <string>
#include <vector>

namespace pdp {

// Model-side view of one sample's grids. scene_stack is the 5-channel
// (rgb + head mask + depth) input to the scene trunk.
struct SceneInputTensors {
    Tensor scene_stack; // (5, S, S)
    Tensor head_crop;   // (3, S, S)
    Tensor head_mask;   // (S, S)
    Tensor depth;       // (S, S)
};

// Stack of stride-2 3x3 conv + ReLU blocks halving the spatial extent per
// block; stands in for the pretrained backbones at desk scale.
struct TrunkEncoder {
    std::vector<ConvLayer> blocks;

    static TrunkEncoder make(const std::string& prefix, int in_ch,
                             const std::vector<int>& channels, Rng& rng);
    Tensor forward(const Tensor& x) const;
    void collect(std::vector<Parameter*>& out);
};

// FC layer from [pooled head feature, downsampled mask, downsampled depth]
// to a softmax-normalized H x W map.
struct SpatialAttention {
    Linear fc;
    int out_h = 0, out_w = 0;

    static SpatialAttention make(const std::string& prefix, int in_dim, int h, int w,
                                 Rng& rng);
    Tensor forward(const Tensor& pooled_head, const Tensor& mask_ds,
                   const Tensor& depth_ds) const;
    void collect(std::vector<Parameter*>& out);
};

// f_cat = [M_s (x) f_s, f_h]: channel-wise multiply of the scene feature by
// the attention map, concatenated with the head feature.
Tensor fuse(const Tensor& scene_feat, const Tensor& head_feat, const Tensor& attn_map);

// Two 1x1 conv layers with a ReLU between, 2*C_b -> C.
struct SharedEncoder {
    ConvLayer c1, c2;

    static SharedEncoder make(const std::string& prefix, int in_ch, int out_ch, Rng& rng);
    Tensor forward(const Tensor& f_cat) const;
    void collect(std::vector<Parameter*>& out);
};

struct FeatureExtractor {
    TrunkEncoder scene, head;
    SpatialAttention attn;
    SharedEncoder enc;
    int image_size = 0, grid_h = 0, grid_w = 0;

    static FeatureExtractor make(int image_size, const std::vector<int>& conv_channels,
                                 int enc_channels, Rng& rng);
    // f_enc of shape (C, H, W).
    Tensor forward(const SceneInputTensors& in) const;
    void collect(std::vector<Parameter*>& out);
};

} // namespace pdp
