#include "pdp/losses.hpp"

#include <cmath>

namespace pdp {

Tensor heatmap_mse(const Tensor& pred, const GazeHeatmap& gt, bool in_frame) {
    if (!in_frame) return Tensor::scalar(0.0);
    if (pred.rank() != 2 || pred.dim(0) != gt.grid.rows || pred.dim(1) != gt.grid.cols)
        throw std::invalid_argument("heatmap_mse: shape mismatch");
    Tensor target = Tensor::from_data({gt.grid.rows, gt.grid.cols}, gt.grid.v);
    Tensor diff = sub(pred, target);
    return mean(mul(diff, diff));
}

Tensor patch_kl(const PatchDistribution& gt, const Tensor& pred_full, KlDirection dir) {
    const auto full = gt.full();
    if (pred_full.size() != static_cast<int64_t>(full.size()))
        throw std::invalid_argument("patch_kl: length mismatch");
    return kl_loss(pred_full, full, dir);
}

Tensor patch_loss(const PatchDistribution& gt, const Tensor& pred_full, PdLossKind kind,
                  KlDirection dir) {
    switch (kind) {
        case PdLossKind::kl:
            return patch_kl(gt, pred_full, dir);
        case PdLossKind::mse: {
            const auto full = gt.full();
            if (pred_full.size() != static_cast<int64_t>(full.size()))
                throw std::invalid_argument("patch_loss: length mismatch");
            Tensor target = Tensor::from_data({static_cast<int>(full.size())}, full);
            Tensor diff = sub(pred_full, target);
            return mean(mul(diff, diff));
        }
        case PdLossKind::bce:
        default: {
            const auto full = gt.full();
            if (pred_full.size() != static_cast<int64_t>(full.size()))
                throw std::invalid_argument("patch_loss: length mismatch");
            return bce_loss(pred_full, full);
        }
    }
}

Tensor combined_loss(const Tensor& l_hm, const Tensor& l_pd, const LossWeights& w) {
    w.validate();
    return add(mul_scalar(l_hm, w.lambda1), mul_scalar(l_pd, w.lambda2));
}

double kl_value(const std::vector<double>& p, const std::vector<double>& q, double floor) {
    if (p.size() != q.size()) throw std::invalid_argument("kl_value: length mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        acc += p[i] * (std::log(p[i]) - std::log(std::max(q[i], floor)));
    }
    return acc;
}

} // namespace pdp
