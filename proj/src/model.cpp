#include "pdp/model.hpp"

#include <stdexcept>

namespace pdp {

void ModelConfig::validate() const {
    if (conv_channels.empty())
        throw std::invalid_argument("ModelConfig: conv_channels must be non-empty");
    int s = image_size;
    for (int i = 0; i < blocks(); ++i) {
        if (s % 2 != 0 || s < 2)
            throw std::invalid_argument("ModelConfig: image_size not reducible by conv blocks");
        s /= 2;
    }
    if (enc_channels % 8 != 0)
        throw std::invalid_argument("ModelConfig: enc_channels must be divisible by 8");
    if (pdp_hidden < 1) throw std::invalid_argument("ModelConfig: pdp_hidden must be >= 1");
}

ModelConfig ModelConfig::toy() {
    ModelConfig c;
    c.image_size = 16;
    c.conv_channels = {4, 6, 8};
    c.enc_channels = 8;
    c.pdp_hidden = 4;
    return c;
}

double ModelOutput::p_in_value() const {
    if (p_in.defined()) return p_in.value();
    return in_probability(pd.data());
}

PatchDistribution ModelOutput::distribution(int grid_h, int grid_w) const {
    return PatchDistribution::from_full(pd.data(), grid_h, grid_w);
}

PdpModel PdpModel::make(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    PdpModel m;
    m.cfg = cfg;
    m.extractor = FeatureExtractor::make(cfg.image_size, cfg.conv_channels,
                                         cfg.enc_channels, rng);
    const int h = m.extractor.grid_h, w = m.extractor.grid_w;
    m.tokenizer = Tokenizer::make(h, w, cfg.enc_channels, rng);
    m.patch_attn = PatchAttention::make(cfg.enc_channels, cfg.attn_scale, rng);
    m.temporal_attn = TemporalAttention::make(h * w + 1, cfg.enc_channels, rng);
    m.pdp_head = PdpHead::make(cfg.enc_channels, cfg.pdp_hidden, rng);
    m.inout_head = InOutHead::make(cfg.enc_channels, rng);
    m.heatmap_head = HeatmapHead::make(h, w, cfg.enc_channels, rng);
    return m;
}

std::vector<Parameter*> PdpModel::parameters() {
    std::vector<Parameter*> out;
    extractor.collect(out);
    tokenizer.collect(out);
    patch_attn.collect(out);
    temporal_attn.collect(out);
    if (cfg.head_variant == HeadVariant::pdp) pdp_head.collect(out);
    else inout_head.collect(out);
    heatmap_head.collect(out);
    return out;
}

std::vector<const Parameter*> PdpModel::parameters() const {
    auto mut = const_cast<PdpModel*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

void PdpModel::freeze_through_patch_attention(bool frozen) {
    std::vector<Parameter*> boundary;
    extractor.collect(boundary);
    tokenizer.collect(boundary);
    patch_attn.collect(boundary);
    for (Parameter* p : boundary) p->frozen = frozen;
}

void PdpModel::zero_grad() {
    for (Parameter* p : parameters()) p->tensor.zero_grad();
}

ModelOutput PdpModel::heads_from_tokens(Tensor f_g, Tensor patch_att) const {
    ModelOutput out;
    out.tokens = f_g;
    out.patch_att = std::move(patch_att);
    out.heatmap = heatmap_head.forward(f_g);
    if (cfg.head_variant == HeadVariant::pdp) {
        auto pr = pdp_head.forward(f_g);
        out.pd_scores = pr.scores;
        out.pd = pr.dist;
    } else {
        out.p_in = inout_head.forward(f_g);
    }
    return out;
}

ModelOutput PdpModel::forward_single(const SceneInputTensors& in) const {
    Tensor f_enc = extractor.forward(in);
    Tensor tokens = tokenizer.forward(f_enc);
    auto pa = patch_attn.forward(tokens);
    // T = 1: the temporal module is bypassed and f_g is the patch attention output.
    return heads_from_tokens(pa.out, pa.att);
}

SequenceOutput PdpModel::forward_sequence(const std::vector<SceneInputTensors>& frames) const {
    if (frames.empty()) throw std::invalid_argument("forward_sequence: empty clip");
    std::vector<Tensor> per_frame;
    std::vector<Tensor> atts;
    per_frame.reserve(frames.size());
    for (const auto& f : frames) {
        auto pa = patch_attn.forward(tokenizer.forward(extractor.forward(f)));
        per_frame.push_back(pa.out);
        atts.push_back(pa.att);
    }
    auto ta = temporal_attn.forward(per_frame);
    SequenceOutput out;
    out.temporal_att = ta.att;
    out.frames.reserve(frames.size());
    for (size_t t = 0; t < frames.size(); ++t)
        out.frames.push_back(heads_from_tokens(ta.frames[t], atts[t]));
    return out;
}

} // namespace pdp
