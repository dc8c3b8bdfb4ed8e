#pragma once

#include "pdp/tensor.hpp"

#include <string>
#include <vector>

namespace pdp {

// Named trainable tensor. Names are unique within a model; frozen parameters
// receive no optimizer updates.
struct Parameter {
    std::string name;
    Tensor tensor;
    bool frozen = false;
};

// Adam with bias correction. Moment state is held per parameter and persists
// across steps; the step counter is shared.
class AdamOptimizer {
public:
    explicit AdamOptimizer(std::vector<Parameter*> params, double beta1 = 0.9,
                           double beta2 = 0.999, double eps = 1e-8);

    void step(double lr);
    void zero_grad();
    int steps_taken() const { return t_; }

private:
    std::vector<Parameter*> params_;
    std::vector<std::vector<double>> m_, v_;
    double beta1_, beta2_, eps_;
    int t_ = 0;
};

} // namespace pdp
