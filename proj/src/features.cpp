#include "pdp/features.hpp"

#include <stdexcept>

namespace pdp {

TrunkEncoder TrunkEncoder::make(const std::string& prefix, int in_ch,
                                const std::vector<int>& channels, Rng& rng) {
    TrunkEncoder t;
    int cin = in_ch;
    for (size_t i = 0; i < channels.size(); ++i) {
        t.blocks.push_back(ConvLayer::make(prefix + ".b" + std::to_string(i), cin,
                                           channels[i], 3, 2, 1, rng));
        cin = channels[i];
    }
    return t;
}

Tensor TrunkEncoder::forward(const Tensor& x) const {
    Tensor h = x;
    for (const auto& b : blocks) h = relu(b.forward(h));
    return h;
}

void TrunkEncoder::collect(std::vector<Parameter*>& out) {
    for (auto& b : blocks) b.collect(out);
}

SpatialAttention SpatialAttention::make(const std::string& prefix, int in_dim, int h,
                                        int w, Rng& rng) {
    SpatialAttention a;
    a.fc = Linear::make(prefix + ".fc", in_dim, h * w, rng);
    a.out_h = h;
    a.out_w = w;
    return a;
}

Tensor SpatialAttention::forward(const Tensor& pooled_head, const Tensor& mask_ds,
                                 const Tensor& depth_ds) const {
    Tensor v = concat_vec({pooled_head,
                           reshape(mask_ds, {out_h * out_w}),
                           reshape(depth_ds, {out_h * out_w})});
    Tensor logits = fc.forward(reshape(v, {1, v.dim(0)}));
    return reshape(softmax(logits, 1), {out_h, out_w});
}

void SpatialAttention::collect(std::vector<Parameter*>& out) { fc.collect(out); }

Tensor fuse(const Tensor& scene_feat, const Tensor& head_feat, const Tensor& attn_map) {
    return concat_channels(mul_broadcast_hw(scene_feat, attn_map), head_feat);
}

SharedEncoder SharedEncoder::make(const std::string& prefix, int in_ch, int out_ch,
                                  Rng& rng) {
    SharedEncoder e;
    e.c1 = ConvLayer::make(prefix + ".c1", in_ch, out_ch, 1, 1, 0, rng);
    e.c2 = ConvLayer::make(prefix + ".c2", out_ch, out_ch, 1, 1, 0, rng);
    return e;
}

Tensor SharedEncoder::forward(const Tensor& f_cat) const {
    return c2.forward(relu(c1.forward(f_cat)));
}

void SharedEncoder::collect(std::vector<Parameter*>& out) {
    c1.collect(out);
    c2.collect(out);
}

FeatureExtractor FeatureExtractor::make(int image_size,
                                        const std::vector<int>& conv_channels,
                                        int enc_channels, Rng& rng) {
    if (conv_channels.empty())
        throw std::invalid_argument("FeatureExtractor: need at least one conv block");
    int s = image_size;
    for (size_t i = 0; i < conv_channels.size(); ++i) {
        if (s % 2 != 0)
            throw std::invalid_argument(
                "FeatureExtractor: image size is not reducible by the block count");
        s /= 2;
    }
    FeatureExtractor f;
    f.image_size = image_size;
    f.grid_h = f.grid_w = s;
    const int cb = conv_channels.back();
    f.scene = TrunkEncoder::make("extractor.scene", 5, conv_channels, rng);
    f.head = TrunkEncoder::make("extractor.head", 3, conv_channels, rng);
    f.attn = SpatialAttention::make("extractor.attn", cb + 2 * s * s, s, s, rng);
    f.enc = SharedEncoder::make("extractor.enc", 2 * cb, enc_channels, rng);
    return f;
}

Tensor FeatureExtractor::forward(const SceneInputTensors& in) const {
    Tensor f_s = scene.forward(in.scene_stack);
    Tensor f_h = head.forward(in.head_crop);
    Tensor pooled = global_avg_pool(f_h);
    Tensor mask_ds = area_avg_pool(in.head_mask, grid_h, grid_w);
    Tensor depth_ds = area_avg_pool(in.depth, grid_h, grid_w);
    Tensor m_s = attn.forward(pooled, mask_ds, depth_ds);
    return enc.forward(fuse(f_s, f_h, m_s));
}

void FeatureExtractor::collect(std::vector<Parameter*>& out) {
    scene.collect(out);
    head.collect(out);
    attn.collect(out);
    enc.collect(out);
}

} // namespace pdp
