#include "pdp/adam.hpp"

#include <cmath>

namespace pdp {

AdamOptimizer::AdamOptimizer(std::vector<Parameter*> params, double beta1,
                             double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
        const size_t n = params_[i]->tensor.data().size();
        m_[i].assign(n, 0.0);
        v_[i].assign(n, 0.0);
    }
}

void AdamOptimizer::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Parameter& p = *params_[pi];
        if (p.frozen) continue;
        auto& w = p.tensor.data();
        const bool has_grad = p.tensor.has_grad();
        const auto& grad = p.tensor.grad();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (size_t i = 0; i < w.size(); ++i) {
            const double g = has_grad ? grad[i] : 0.0;
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void AdamOptimizer::zero_grad() {
    for (Parameter* p : params_) p->tensor.zero_grad();
}

} // namespace pdp
