#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace pdp {

namespace detail {

struct Node {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;           // allocated lazily, accumulates across backward calls
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this->grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward_fn;
    const char* op = "leaf";

    int64_t size() const {
        int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }
    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
};

} // namespace detail

// Value-semantic handle to a node in the autodiff graph. Copies share the
// underlying storage; all forward values are 64-bit floats.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double fill, bool requires_grad = false);
    static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int dim(int i) const { return node_->shape[i]; }
    int64_t size() const { return node_->size(); }
    bool requires_grad() const { return node_->requires_grad; }

    std::vector<double>& data() { return node_->value; }
    const std::vector<double>& data() const { return node_->value; }
    std::vector<double>& grad() { return node_->grad; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

    // Scalar access (rank-0 or single-element tensors).
    double value() const;

    // 2-D / 3-D element access, row-major.
    double& at(int r, int c);
    double at(int r, int c) const;
    double& at(int c, int h, int w);
    double at(int c, int h, int w) const;

    std::shared_ptr<detail::Node> node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

// Ordered record of the differentiable ops reachable from a root, inputs
// before consumers. backward() walks it once in reverse.
struct Tape {
    std::vector<detail::Node*> order;
    static Tape build(const Tensor& root);
};

// Runs reverse-mode accumulation from a scalar loss. Gradients add into any
// existing .grad buffers; call zero_grad between optimizer steps.
void backward(const Tensor& loss);

// --- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x); // 2-D

// x: (cin,h,w), w: (cout,cin,k,k), bias: (cout) or undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);
// x: (cin,h,w), w: (cin,cout,k,k); adjoint of conv2d with the same weights.
Tensor deconv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
                int pad, int out_pad);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x); // domain error on non-positive input

Tensor add(const Tensor& a, const Tensor& b); // identical shapes
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator+(const Tensor& a, double c) { return add_scalar(a, c); }
inline Tensor operator*(const Tensor& a, double c) { return mul_scalar(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return mul_scalar(a, c); }

Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, int axis, const Tensor& gain, const Tensor& bias,
                  double eps);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor concat_rows(const std::vector<Tensor>& parts); // 2-D, equal cols
Tensor slice_rows(const Tensor& x, int r0, int r1);   // 2-D, rows [r0, r1)
Tensor concat_channels(const Tensor& a, const Tensor& b); // 3-D, same (h,w)
Tensor concat_vec(const std::vector<Tensor>& parts);      // 1-D

// y[c,i,j] = x[c,i,j] * m[i,j]
Tensor mul_broadcast_hw(const Tensor& x, const Tensor& m);
// (c,h,w) -> (c): mean over the spatial extent per channel.
Tensor global_avg_pool(const Tensor& x);
// (h,w) -> (oh,ow) by block averaging; h % oh == 0, w % ow == 0.
Tensor area_avg_pool(const Tensor& x, int oh, int ow);
// x: (r,c) + v: (c) broadcast over rows.
Tensor add_rowvec(const Tensor& x, const Tensor& v);
// (r,c) -> (c): mean over rows.
Tensor mean_rows(const Tensor& x);
// y = x / sum(x); the sum must be nonzero.
Tensor normalize_sum(const Tensor& x);

enum class KlDirection { gt_pred, pred_gt };

// KL divergence between a constant target distribution and a predicted one,
// natural log, 0*log(0) = 0, prediction floored at `floor`.
// gt_pred: sum_i gt_i (ln gt_i - ln pred_i); pred_gt: sum_i pred_i (ln pred_i - ln gt_i).
Tensor kl_loss(const Tensor& pred, const std::vector<double>& gt,
               KlDirection dir = KlDirection::gt_pred, double floor = 1e-12);

// Mean binary cross entropy of predictions in (0,1) against constant targets.
Tensor bce_loss(const Tensor& pred, const std::vector<double>& gt, double floor = 1e-12);

} // namespace pdp
