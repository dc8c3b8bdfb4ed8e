#pragma once

#include "pdp/losses.hpp"
#include "pdp/metrics.hpp"
#include "pdp/model.hpp"
#include "pdp/synth.hpp"

#include <string>
#include <vector>

namespace pdp {

enum class TrainPhase { image, video };

struct TrainConfig {
    TrainPhase phase = TrainPhase::image;
    double lr = 2.5e-4;
    std::vector<int> decay_epochs = {25, 31, 40};
    double decay_factor = 0.2;
    int batch_size = 16; // samples (image) or sequences (video)
    int epochs = 40;
    LossWeights loss_weights;
    bool freeze_until_patch_attention = false;
    uint64_t seed = 0;
    GtMode gt_mode = GtMode::maxpool;
    int patch_h = 4, patch_w = 4;
    int sequence_len = 5;
    PdLossKind pd_loss = PdLossKind::kl;
    KlDirection kl_direction = KlDirection::gt_pred;
    ModelConfig model;

    void validate() const;

    // Image-phase and video-phase regimens; paper-scale batches would be
    // 80 (image) and 16 (video), the desk defaults are 16 and 4.
    static TrainConfig image_defaults();
    static TrainConfig video_defaults();
};

// lr after applying every decay whose epoch has been reached (1-based).
double lr_at_epoch(const TrainConfig& cfg, int epoch);

struct TrainResult {
    std::vector<double> loss_history; // per-epoch mean combined loss
};

// Deterministic given cfg.seed: fixed shuffling, single optimizer writer.
// Video phase consumes whole sequences (grouped by sequence_id) and can
// freeze everything through the patch attention module.
TrainResult train(PdpModel& model, const std::vector<GazeSample>& data,
                  const TrainConfig& cfg);

// Per-sample loss used by the trainer; exposed for gradient checking.
Tensor sample_loss(const ModelOutput& out, const GazeSample& sample,
                   const TrainConfig& cfg);

// Dataset metrics. Sequence datasets are evaluated with temporal context per
// clip; single-frame datasets bypass the temporal module.
MetricReport evaluate(const PdpModel& model, const std::vector<GazeSample>& data);

// Per-sample evaluation rows (used by the analysis subcommands).
struct SampleEval {
    int sample_id = 0;
    bool in_frame = false;
    double p_in = 0.0;
    bool has_auc = false;
    double auc = 0.0;
    double avg_dist = 0.0, min_dist = 0.0;
    double variance = 0.0;
    bool has_consistency = false;
    double bc = 0.0, js = 0.0;
};
std::vector<SampleEval> evaluate_samples(const PdpModel& model,
                                         const std::vector<GazeSample>& data);
MetricReport summarize(const std::vector<SampleEval>& rows);

// Flat key=value config file; every TrainConfig field is addressable and
// unknown keys are rejected.
TrainConfig parse_train_config(const std::string& path);
TrainConfig parse_train_config_text(const std::string& text, const std::string& origin);

} // namespace pdp
