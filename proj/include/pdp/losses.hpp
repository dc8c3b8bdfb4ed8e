#pragma once

#include "pdp/gt.hpp"
#include "pdp/tensor.hpp"

#include <stdexcept>

namespace pdp {

struct LossWeights {
    double lambda1 = 100.0; // heatmap MSE weight
    double lambda2 = 1.0;   // patch distribution weight

    void validate() const {
        if (lambda1 < 0 || lambda2 < 0 || (lambda1 == 0 && lambda2 == 0))
            throw std::invalid_argument("LossWeights: weights must be >= 0 and not both zero");
    }
};

enum class PdLossKind { kl, mse, bce };

// MSE over pixels between the predicted heatmap and the ground-truth grid;
// zero contribution (constant) for out-of-frame samples, which have no
// heatmap target.
Tensor heatmap_mse(const Tensor& pred, const GazeHeatmap& gt, bool in_frame);

// KL between the ground-truth distribution and the predicted full vector
// (inside bins then outside), see kl_loss for the direction convention.
Tensor patch_kl(const PatchDistribution& gt, const Tensor& pred_full,
                KlDirection dir = KlDirection::gt_pred);

// Ablation-only variants (KL -> MSE / BCE rows of the ablation table).
Tensor patch_loss(const PatchDistribution& gt, const Tensor& pred_full,
                  PdLossKind kind, KlDirection dir = KlDirection::gt_pred);

Tensor combined_loss(const Tensor& l_hm, const Tensor& l_pd, const LossWeights& w);

// Plain-value KL for the metric side: sum_i p_i (ln p_i - ln max(q_i, floor)).
double kl_value(const std::vector<double>& p, const std::vector<double>& q,
                double floor = 1e-12);

} // namespace pdp
