#include "pdp/tensor.hpp"

#include "pdp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace pdp {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

namespace {

void check(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

NodePtr make_node(std::vector<int> shape, std::vector<NodePtr> parents, const char* op) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    for (int d : n->shape) check(d > 0, std::string(op) + ": extents must be positive");
    n->value.resize(static_cast<size_t>(n->size()));
    n->parents = std::move(parents);
    n->op = op;
    for (const auto& p : n->parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    return n;
}

struct AxisSplit {
    int64_t outer, len, inner;
};

AxisSplit split_axis(const std::vector<int>& shape, int axis) {
    check(axis >= 0 && axis < static_cast<int>(shape.size()), "axis out of range");
    AxisSplit s{1, shape[axis], 1};
    for (int i = 0; i < axis; ++i) s.outer *= shape[i];
    for (size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

} // namespace

// --- Tensor basics ----------------------------------------------------------

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double fill, bool requires_grad) {
    auto n = make_node(std::move(shape), {}, "leaf");
    std::fill(n->value.begin(), n->value.end(), fill);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data,
                         bool requires_grad) {
    auto n = make_node(std::move(shape), {}, "leaf");
    check(static_cast<int64_t>(data.size()) == n->size(),
          "from_data: data length does not match shape");
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_data({1}, {v}, requires_grad);
}

double Tensor::value() const {
    check(node_ && node_->size() == 1, "value(): tensor is not a scalar");
    return node_->value[0];
}

double& Tensor::at(int r, int c) { return node_->value[static_cast<size_t>(r) * dim(1) + c]; }
double Tensor::at(int r, int c) const { return node_->value[static_cast<size_t>(r) * dim(1) + c]; }
double& Tensor::at(int c, int h, int w) {
    return node_->value[(static_cast<size_t>(c) * dim(1) + h) * dim(2) + w];
}
double Tensor::at(int c, int h, int w) const {
    return node_->value[(static_cast<size_t>(c) * dim(1) + h) * dim(2) + w];
}

// --- Tape / backward ---------------------------------------------------------

Tape Tape::build(const Tensor& root) {
    Tape t;
    Node* r = root.node().get();
    if (!r || !r->requires_grad) return t;
    std::unordered_set<Node*> visited{r};
    std::vector<std::pair<Node*, size_t>> stack{{r, 0}};
    while (!stack.empty()) {
        auto& top = stack.back();
        if (top.second < top.first->parents.size()) {
            Node* p = top.first->parents[top.second++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            t.order.push_back(top.first);
            stack.pop_back();
        }
    }
    return t;
}

void backward(const Tensor& loss) {
    check(loss.defined() && loss.size() == 1, "backward: loss must be a scalar");
    if (!loss.node()->requires_grad) return;
    Tape tape = Tape::build(loss);
    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (auto it = tape.order.rbegin(); it != tape.order.rend(); ++it) {
        Node* n = *it;
        if (!n->backward_fn) continue;
        n->ensure_grad();
        n->backward_fn(*n);
    }
}

// --- linear algebra ----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.rank() == 2 && b.rank() == 2, "matmul: expects rank-2 tensors");
    check(a.dim(1) == b.dim(0), "matmul: inner dimensions disagree");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    auto node = make_node({m, n}, {a.node(), b.node()}, "matmul");
    kernels::matmul(a.data().data(), b.data().data(), node->value.data(), m, k, n, false);
    if (node->requires_grad) {
        node->backward_fn = [m, k, n](Node& self) {
            Node& pa = *self.parents[0];
            Node& pb = *self.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                kernels::matmul_nt(self.grad.data(), pb.value.data(), pa.grad.data(), m, n, k, true);
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                kernels::matmul_tn(pa.value.data(), self.grad.data(), pb.grad.data(), k, m, n, true);
            }
        };
    }
    return Tensor(node);
}

Tensor transpose(const Tensor& x) {
    check(x.rank() == 2, "transpose: expects a rank-2 tensor");
    const int r = x.dim(0), c = x.dim(1);
    auto node = make_node({c, r}, {x.node()}, "transpose");
    const auto& v = x.data();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            node->value[static_cast<size_t>(j) * r + i] = v[static_cast<size_t>(i) * c + j];
    if (node->requires_grad) {
        node->backward_fn = [r, c](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            for (int j = 0; j < c; ++j)
                for (int i = 0; i < r; ++i)
                    p.grad[static_cast<size_t>(i) * c + j] +=
                        self.grad[static_cast<size_t>(j) * r + i];
        };
    }
    return Tensor(node);
}

// --- convolution family --------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
    check(x.rank() == 3, "conv2d: input must be (cin,h,w)");
    check(w.rank() == 4, "conv2d: weight must be (cout,cin,k,k)");
    check(stride >= 1, "conv2d: stride must be >= 1");
    check(pad >= 0, "conv2d: pad must be >= 0");
    kernels::Conv2dGeom g;
    g.cin = x.dim(0);
    g.h = x.dim(1);
    g.w = x.dim(2);
    g.cout = w.dim(0);
    g.ksize = w.dim(2);
    check(w.dim(1) == g.cin, "conv2d: weight cin does not match input");
    check(w.dim(3) == g.ksize, "conv2d: kernel must be square");
    check(g.ksize <= g.h + 2 * pad && g.ksize <= g.w + 2 * pad,
          "conv2d: kernel larger than padded input");
    g.stride = stride;
    g.pad = pad;
    g.hout = (g.h + 2 * pad - g.ksize) / stride + 1;
    g.wout = (g.w + 2 * pad - g.ksize) / stride + 1;
    check(g.hout >= 1 && g.wout >= 1, "conv2d: zero-size output");
    const bool has_bias = bias.defined();
    if (has_bias) {
        check(bias.rank() == 1 && bias.dim(0) == g.cout, "conv2d: bias must be (cout)");
    }
    std::vector<NodePtr> parents{x.node(), w.node()};
    if (has_bias) parents.push_back(bias.node());
    auto node = make_node({g.cout, g.hout, g.wout}, std::move(parents), "conv2d");
    kernels::conv2d_fwd(g, x.data().data(), w.data().data(),
                        has_bias ? bias.data().data() : nullptr, node->value.data());
    if (node->requires_grad) {
        node->backward_fn = [g, has_bias](Node& self) {
            Node& px = *self.parents[0];
            Node& pw = *self.parents[1];
            if (px.requires_grad) {
                px.ensure_grad();
                kernels::conv2d_bwd_input(g, self.grad.data(), pw.value.data(), px.grad.data());
            }
            if (pw.requires_grad) {
                pw.ensure_grad();
                kernels::conv2d_bwd_weight(g, px.value.data(), self.grad.data(), pw.grad.data());
            }
            if (has_bias && self.parents[2]->requires_grad) {
                Node& pb = *self.parents[2];
                pb.ensure_grad();
                kernels::conv2d_bwd_bias(g, self.grad.data(), pb.grad.data());
            }
        };
    }
    return Tensor(node);
}

Tensor deconv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
                int pad, int out_pad) {
    check(x.rank() == 3, "deconv2d: input must be (cin,h,w)");
    check(w.rank() == 4, "deconv2d: weight must be (cin,cout,k,k)");
    check(stride >= 1, "deconv2d: stride must be >= 1");
    check(pad >= 0, "deconv2d: pad must be >= 0");
    check(out_pad >= 0 && out_pad < stride, "deconv2d: out_pad must be in [0, stride)");
    kernels::Deconv2dGeom g;
    g.cin = x.dim(0);
    g.h = x.dim(1);
    g.w = x.dim(2);
    g.cout = w.dim(1);
    g.ksize = w.dim(2);
    check(w.dim(0) == g.cin, "deconv2d: weight cin does not match input");
    check(w.dim(3) == g.ksize, "deconv2d: kernel must be square");
    g.stride = stride;
    g.pad = pad;
    g.outpad = out_pad;
    g.hout = (g.h - 1) * stride - 2 * pad + g.ksize + out_pad;
    g.wout = (g.w - 1) * stride - 2 * pad + g.ksize + out_pad;
    check(g.hout >= 1 && g.wout >= 1, "deconv2d: computed output extent is not positive");
    const bool has_bias = bias.defined();
    if (has_bias) {
        check(bias.rank() == 1 && bias.dim(0) == g.cout, "deconv2d: bias must be (cout)");
    }
    std::vector<NodePtr> parents{x.node(), w.node()};
    if (has_bias) parents.push_back(bias.node());
    auto node = make_node({g.cout, g.hout, g.wout}, std::move(parents), "deconv2d");
    kernels::deconv2d_fwd(g, x.data().data(), w.data().data(),
                          has_bias ? bias.data().data() : nullptr, node->value.data());
    if (node->requires_grad) {
        node->backward_fn = [g, has_bias](Node& self) {
            Node& px = *self.parents[0];
            Node& pw = *self.parents[1];
            if (px.requires_grad) {
                px.ensure_grad();
                kernels::deconv2d_bwd_input(g, self.grad.data(), pw.value.data(), px.grad.data());
            }
            if (pw.requires_grad) {
                pw.ensure_grad();
                kernels::deconv2d_bwd_weight(g, px.value.data(), self.grad.data(), pw.grad.data());
            }
            if (has_bias && self.parents[2]->requires_grad) {
                Node& pb = *self.parents[2];
                pb.ensure_grad();
                kernels::deconv2d_bwd_bias(g, self.grad.data(), pb.grad.data());
            }
        };
    }
    return Tensor(node);
}

// --- elementwise ---------------------------------------------------------------

Tensor relu(const Tensor& x) {
    auto node = make_node(x.shape(), {x.node()}, "relu");
    const auto& v = x.data();
    for (size_t i = 0; i < v.size(); ++i) node->value[i] = v[i] > 0.0 ? v[i] : 0.0;
    if (node->requires_grad) {
        node->backward_fn = [](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                if (p.value[i] > 0.0) p.grad[i] += self.grad[i];
        };
    }
    return Tensor(node);
}

Tensor sigmoid(const Tensor& x) {
    auto node = make_node(x.shape(), {x.node()}, "sigmoid");
    const auto& v = x.data();
    for (size_t i = 0; i < v.size(); ++i) node->value[i] = 1.0 / (1.0 + std::exp(-v[i]));
    if (node->requires_grad) {
        node->backward_fn = [](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) {
                const double y = self.value[i];
                p.grad[i] += self.grad[i] * y * (1.0 - y);
            }
        };
    }
    return Tensor(node);
}

Tensor exp(const Tensor& x) {
    auto node = make_node(x.shape(), {x.node()}, "exp");
    const auto& v = x.data();
    for (size_t i = 0; i < v.size(); ++i) node->value[i] = std::exp(v[i]);
    if (node->requires_grad) {
        node->backward_fn = [](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                p.grad[i] += self.grad[i] * self.value[i];
        };
    }
    return Tensor(node);
}

Tensor log(const Tensor& x) {
    const auto& v = x.data();
    for (double e : v)
        if (!(e > 0.0)) throw std::domain_error("log: input must be strictly positive");
    auto node = make_node(x.shape(), {x.node()}, "log");
    for (size_t i = 0; i < v.size(); ++i) node->value[i] = std::log(v[i]);
    if (node->requires_grad) {
        node->backward_fn = [](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                p.grad[i] += self.grad[i] / p.value[i];
        };
    }
    return Tensor(node);
}

namespace {

Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, int kind) {
    check(a.shape() == b.shape(), std::string(name) + ": shapes must match exactly");
    auto node = make_node(a.shape(), {a.node(), b.node()}, name);
    const auto& va = a.data();
    const auto& vb = b.data();
    for (size_t i = 0; i < va.size(); ++i) {
        switch (kind) {
            case 0: node->value[i] = va[i] + vb[i]; break;
            case 1: node->value[i] = va[i] - vb[i]; break;
            default: node->value[i] = va[i] * vb[i]; break;
        }
    }
    if (node->requires_grad) {
        node->backward_fn = [kind](Node& self) {
            Node& pa = *self.parents[0];
            Node& pb = *self.parents[1];
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i)
                    pa.grad[i] += kind == 2 ? self.grad[i] * pb.value[i] : self.grad[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) {
                    if (kind == 0) pb.grad[i] += self.grad[i];
                    else if (kind == 1) pb.grad[i] -= self.grad[i];
                    else pb.grad[i] += self.grad[i] * pa.value[i];
                }
            }
        };
    }
    return Tensor(node);
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, "add", 0); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, "sub", 1); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, "mul", 2); }

Tensor add_scalar(const Tensor& a, double c) {
    auto node = make_node(a.shape(), {a.node()}, "add_scalar");
    const auto& v = a.data();
    for (size_t i = 0; i < v.size(); ++i) node->value[i] = v[i] + c;
    if (node->requires_grad) {
        node->backward_fn = [](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
        };
    }
    return Tensor(node);
}

Tensor mul_scalar(const Tensor& a, double c) {
    auto node = make_node(a.shape(), {a.node()}, "mul_scalar");
    const auto& v = a.data();
    for (size_t i = 0; i < v.size(); ++i) node->value[i] = v[i] * c;
    if (node->requires_grad) {
        node->backward_fn = [c](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * c;
        };
    }
    return Tensor(node);
}

// --- normalizations --------------------------------------------------------------

Tensor softmax(const Tensor& x, int axis) {
    const AxisSplit s = split_axis(x.shape(), axis);
    auto node = make_node(x.shape(), {x.node()}, "softmax");
    const auto& v = x.data();
    for (int64_t o = 0; o < s.outer; ++o) {
        for (int64_t in = 0; in < s.inner; ++in) {
            const int64_t base = o * s.len * s.inner + in;
            double mx = v[base];
            for (int64_t l = 1; l < s.len; ++l) mx = std::max(mx, v[base + l * s.inner]);
            double sum = 0.0;
            for (int64_t l = 0; l < s.len; ++l) {
                const double e = std::exp(v[base + l * s.inner] - mx);
                node->value[base + l * s.inner] = e;
                sum += e;
            }
            for (int64_t l = 0; l < s.len; ++l) node->value[base + l * s.inner] /= sum;
        }
    }
    if (node->requires_grad) {
        node->backward_fn = [s](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            for (int64_t o = 0; o < s.outer; ++o) {
                for (int64_t in = 0; in < s.inner; ++in) {
                    const int64_t base = o * s.len * s.inner + in;
                    double dot = 0.0;
                    for (int64_t l = 0; l < s.len; ++l) {
                        const int64_t i = base + l * s.inner;
                        dot += self.grad[i] * self.value[i];
                    }
                    for (int64_t l = 0; l < s.len; ++l) {
                        const int64_t i = base + l * s.inner;
                        p.grad[i] += self.value[i] * (self.grad[i] - dot);
                    }
                }
            }
        };
    }
    return Tensor(node);
}

Tensor layer_norm(const Tensor& x, int axis, const Tensor& gain, const Tensor& bias,
                  double eps) {
    const AxisSplit s = split_axis(x.shape(), axis);
    check(gain.rank() == 1 && gain.dim(0) == s.len, "layer_norm: gain extent must match axis");
    check(bias.rank() == 1 && bias.dim(0) == s.len, "layer_norm: bias extent must match axis");
    auto node = make_node(x.shape(), {x.node(), gain.node(), bias.node()}, "layer_norm");
    const auto& v = x.data();
    const auto& gv = gain.data();
    const auto& bv = bias.data();
    for (int64_t o = 0; o < s.outer; ++o) {
        for (int64_t in = 0; in < s.inner; ++in) {
            const int64_t base = o * s.len * s.inner + in;
            double mu = 0.0;
            for (int64_t l = 0; l < s.len; ++l) mu += v[base + l * s.inner];
            mu /= s.len;
            double var = 0.0;
            for (int64_t l = 0; l < s.len; ++l) {
                const double d = v[base + l * s.inner] - mu;
                var += d * d;
            }
            var /= s.len;
            const double inv = 1.0 / std::sqrt(var + eps);
            for (int64_t l = 0; l < s.len; ++l) {
                const double xh = (v[base + l * s.inner] - mu) * inv;
                node->value[base + l * s.inner] = xh * gv[l] + bv[l];
            }
        }
    }
    if (node->requires_grad) {
        node->backward_fn = [s, eps](Node& self) {
            Node& px = *self.parents[0];
            Node& pg = *self.parents[1];
            Node& pb = *self.parents[2];
            const bool wx = px.requires_grad, wg = pg.requires_grad, wb = pb.requires_grad;
            if (wx) px.ensure_grad();
            if (wg) pg.ensure_grad();
            if (wb) pb.ensure_grad();
            std::vector<double> xh(static_cast<size_t>(s.len));
            for (int64_t o = 0; o < s.outer; ++o) {
                for (int64_t in = 0; in < s.inner; ++in) {
                    const int64_t base = o * s.len * s.inner + in;
                    double mu = 0.0;
                    for (int64_t l = 0; l < s.len; ++l) mu += px.value[base + l * s.inner];
                    mu /= s.len;
                    double var = 0.0;
                    for (int64_t l = 0; l < s.len; ++l) {
                        const double d = px.value[base + l * s.inner] - mu;
                        var += d * d;
                    }
                    var /= s.len;
                    const double inv = 1.0 / std::sqrt(var + eps);
                    for (int64_t l = 0; l < s.len; ++l)
                        xh[l] = (px.value[base + l * s.inner] - mu) * inv;
                    if (wg || wb) {
                        for (int64_t l = 0; l < s.len; ++l) {
                            const double g = self.grad[base + l * s.inner];
                            if (wg) pg.grad[l] += g * xh[l];
                            if (wb) pb.grad[l] += g;
                        }
                    }
                    if (wx) {
                        double mean_gh = 0.0, mean_ghx = 0.0;
                        for (int64_t l = 0; l < s.len; ++l) {
                            const double gh = self.grad[base + l * s.inner] * pg.value[l];
                            mean_gh += gh;
                            mean_ghx += gh * xh[l];
                        }
                        mean_gh /= s.len;
                        mean_ghx /= s.len;
                        for (int64_t l = 0; l < s.len; ++l) {
                            const double gh = self.grad[base + l * s.inner] * pg.value[l];
                            px.grad[base + l * s.inner] += (gh - mean_gh - xh[l] * mean_ghx) * inv;
                        }
                    }
                }
            }
        };
    }
    return Tensor(node);
}

// --- reductions -------------------------------------------------------------------

Tensor sum(const Tensor& x) {
    auto node = make_node({1}, {x.node()}, "sum");
    double s = 0.0;
    for (double v : x.data()) s += v;
    node->value[0] = s;
    if (node->requires_grad) {
        node->backward_fn = [](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            const double g = self.grad[0];
            for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g;
        };
    }
    return Tensor(node);
}

Tensor mean(const Tensor& x) {
    auto node = make_node({1}, {x.node()}, "mean");
    double s = 0.0;
    for (double v : x.data()) s += v;
    const double n = static_cast<double>(x.size());
    node->value[0] = s / n;
    if (node->requires_grad) {
        node->backward_fn = [n](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            const double g = self.grad[0] / n;
            for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g;
        };
    }
    return Tensor(node);
}

// --- shape ops ---------------------------------------------------------------------

Tensor reshape(const Tensor& x, std::vector<int> shape) {
    auto node = make_node(std::move(shape), {x.node()}, "reshape");
    check(node->size() == x.size(), "reshape: element count must be preserved");
    node->value = x.data();
    if (node->requires_grad) {
        node->backward_fn = [](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
        };
    }
    return Tensor(node);
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    check(!parts.empty(), "concat_rows: needs at least one part");
    const int cols = parts[0].dim(1);
    int rows = 0;
    std::vector<NodePtr> parents;
    for (const auto& p : parts) {
        check(p.rank() == 2 && p.dim(1) == cols, "concat_rows: column counts must match");
        rows += p.dim(0);
        parents.push_back(p.node());
    }
    auto node = make_node({rows, cols}, std::move(parents), "concat_rows");
    size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.data().begin(), p.data().end(), node->value.begin() + off);
        off += p.data().size();
    }
    if (node->requires_grad) {
        node->backward_fn = [](Node& self) {
            size_t off2 = 0;
            for (auto& pp : self.parents) {
                const size_t n = pp->value.size();
                if (pp->requires_grad) {
                    pp->ensure_grad();
                    for (size_t i = 0; i < n; ++i) pp->grad[i] += self.grad[off2 + i];
                }
                off2 += n;
            }
        };
    }
    return Tensor(node);
}

Tensor slice_rows(const Tensor& x, int r0, int r1) {
    check(x.rank() == 2, "slice_rows: expects a rank-2 tensor");
    check(0 <= r0 && r0 < r1 && r1 <= x.dim(0), "slice_rows: row range out of bounds");
    const int cols = x.dim(1);
    auto node = make_node({r1 - r0, cols}, {x.node()}, "slice_rows");
    std::copy(x.data().begin() + static_cast<size_t>(r0) * cols,
              x.data().begin() + static_cast<size_t>(r1) * cols, node->value.begin());
    if (node->requires_grad) {
        node->backward_fn = [r0, cols](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            const size_t off = static_cast<size_t>(r0) * cols;
            for (size_t i = 0; i < self.grad.size(); ++i) p.grad[off + i] += self.grad[i];
        };
    }
    return Tensor(node);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    check(a.rank() == 3 && b.rank() == 3, "concat_channels: expects rank-3 tensors");
    check(a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2),
          "concat_channels: spatial extents must match");
    auto node = make_node({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)},
                          {a.node(), b.node()}, "concat_channels");
    std::copy(a.data().begin(), a.data().end(), node->value.begin());
    std::copy(b.data().begin(), b.data().end(), node->value.begin() + a.data().size());
    if (node->requires_grad) {
        node->backward_fn = [](Node& self) {
            Node& pa = *self.parents[0];
            Node& pb = *self.parents[1];
            const size_t na = pa.value.size();
            if (pa.requires_grad) {
                pa.ensure_grad();
                for (size_t i = 0; i < na; ++i) pa.grad[i] += self.grad[i];
            }
            if (pb.requires_grad) {
                pb.ensure_grad();
                for (size_t i = 0; i < pb.value.size(); ++i) pb.grad[i] += self.grad[na + i];
            }
        };
    }
    return Tensor(node);
}

Tensor concat_vec(const std::vector<Tensor>& parts) {
    check(!parts.empty(), "concat_vec: needs at least one part");
    int len = 0;
    std::vector<NodePtr> parents;
    for (const auto& p : parts) {
        check(p.rank() == 1, "concat_vec: expects rank-1 tensors");
        len += p.dim(0);
        parents.push_back(p.node());
    }
    auto node = make_node({len}, std::move(parents), "concat_vec");
    size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.data().begin(), p.data().end(), node->value.begin() + off);
        off += p.data().size();
    }
    if (node->requires_grad) {
        node->backward_fn = [](Node& self) {
            size_t off2 = 0;
            for (auto& pp : self.parents) {
                const size_t n = pp->value.size();
                if (pp->requires_grad) {
                    pp->ensure_grad();
                    for (size_t i = 0; i < n; ++i) pp->grad[i] += self.grad[off2 + i];
                }
                off2 += n;
            }
        };
    }
    return Tensor(node);
}

// --- broadcast / pooling helpers ------------------------------------------------------

Tensor mul_broadcast_hw(const Tensor& x, const Tensor& m) {
    check(x.rank() == 3 && m.rank() == 2, "mul_broadcast_hw: expects (c,h,w) and (h,w)");
    check(x.dim(1) == m.dim(0) && x.dim(2) == m.dim(1),
          "mul_broadcast_hw: spatial extents must match");
    const int c = x.dim(0);
    const size_t hw = static_cast<size_t>(x.dim(1)) * x.dim(2);
    auto node = make_node(x.shape(), {x.node(), m.node()}, "mul_broadcast_hw");
    const auto& xv = x.data();
    const auto& mv = m.data();
    for (int ch = 0; ch < c; ++ch)
        for (size_t i = 0; i < hw; ++i)
            node->value[ch * hw + i] = xv[ch * hw + i] * mv[i];
    if (node->requires_grad) {
        node->backward_fn = [c, hw](Node& self) {
            Node& px = *self.parents[0];
            Node& pm = *self.parents[1];
            if (px.requires_grad) {
                px.ensure_grad();
                for (int ch = 0; ch < c; ++ch)
                    for (size_t i = 0; i < hw; ++i)
                        px.grad[ch * hw + i] += self.grad[ch * hw + i] * pm.value[i];
            }
            if (pm.requires_grad) {
                pm.ensure_grad();
                for (int ch = 0; ch < c; ++ch)
                    for (size_t i = 0; i < hw; ++i)
                        pm.grad[i] += self.grad[ch * hw + i] * px.value[ch * hw + i];
            }
        };
    }
    return Tensor(node);
}

Tensor global_avg_pool(const Tensor& x) {
    check(x.rank() == 3, "global_avg_pool: expects (c,h,w)");
    const int c = x.dim(0);
    const size_t hw = static_cast<size_t>(x.dim(1)) * x.dim(2);
    auto node = make_node({c}, {x.node()}, "global_avg_pool");
    const auto& v = x.data();
    for (int ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (size_t i = 0; i < hw; ++i) s += v[ch * hw + i];
        node->value[ch] = s / static_cast<double>(hw);
    }
    if (node->requires_grad) {
        node->backward_fn = [c, hw](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            for (int ch = 0; ch < c; ++ch) {
                const double g = self.grad[ch] / static_cast<double>(hw);
                for (size_t i = 0; i < hw; ++i) p.grad[ch * hw + i] += g;
            }
        };
    }
    return Tensor(node);
}

Tensor area_avg_pool(const Tensor& x, int oh, int ow) {
    check(x.rank() == 2, "area_avg_pool: expects (h,w)");
    const int h = x.dim(0), w = x.dim(1);
    check(oh > 0 && ow > 0 && h % oh == 0 && w % ow == 0,
          "area_avg_pool: output extents must divide the input");
    const int bh = h / oh, bw = w / ow;
    auto node = make_node({oh, ow}, {x.node()}, "area_avg_pool");
    const auto& v = x.data();
    const double inv = 1.0 / (bh * bw);
    for (int r = 0; r < oh; ++r) {
        for (int c = 0; c < ow; ++c) {
            double s = 0.0;
            for (int i = 0; i < bh; ++i)
                for (int j = 0; j < bw; ++j)
                    s += v[static_cast<size_t>(r * bh + i) * w + c * bw + j];
            node->value[static_cast<size_t>(r) * ow + c] = s * inv;
        }
    }
    if (node->requires_grad) {
        node->backward_fn = [oh, ow, bh, bw, w, inv](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            for (int r = 0; r < oh; ++r)
                for (int c = 0; c < ow; ++c) {
                    const double g = self.grad[static_cast<size_t>(r) * ow + c] * inv;
                    for (int i = 0; i < bh; ++i)
                        for (int j = 0; j < bw; ++j)
                            p.grad[static_cast<size_t>(r * bh + i) * w + c * bw + j] += g;
                }
        };
    }
    return Tensor(node);
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    check(x.rank() == 2 && v.rank() == 1 && v.dim(0) == x.dim(1),
          "add_rowvec: vector length must match column count");
    const int r = x.dim(0), c = x.dim(1);
    auto node = make_node(x.shape(), {x.node(), v.node()}, "add_rowvec");
    const auto& xv = x.data();
    const auto& vv = v.data();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            node->value[static_cast<size_t>(i) * c + j] = xv[static_cast<size_t>(i) * c + j] + vv[j];
    if (node->requires_grad) {
        node->backward_fn = [r, c](Node& self) {
            Node& px = *self.parents[0];
            Node& pv = *self.parents[1];
            if (px.requires_grad) {
                px.ensure_grad();
                for (size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
            }
            if (pv.requires_grad) {
                pv.ensure_grad();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j)
                        pv.grad[j] += self.grad[static_cast<size_t>(i) * c + j];
            }
        };
    }
    return Tensor(node);
}

Tensor mean_rows(const Tensor& x) {
    check(x.rank() == 2, "mean_rows: expects a rank-2 tensor");
    const int r = x.dim(0), c = x.dim(1);
    auto node = make_node({c}, {x.node()}, "mean_rows");
    const auto& v = x.data();
    for (int j = 0; j < c; ++j) {
        double s = 0.0;
        for (int i = 0; i < r; ++i) s += v[static_cast<size_t>(i) * c + j];
        node->value[j] = s / r;
    }
    if (node->requires_grad) {
        node->backward_fn = [r, c](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            for (int j = 0; j < c; ++j) {
                const double g = self.grad[j] / r;
                for (int i = 0; i < r; ++i) p.grad[static_cast<size_t>(i) * c + j] += g;
            }
        };
    }
    return Tensor(node);
}

Tensor normalize_sum(const Tensor& x) {
    auto node = make_node(x.shape(), {x.node()}, "normalize_sum");
    const auto& v = x.data();
    double s = 0.0;
    for (double e : v) s += e;
    check(s != 0.0, "normalize_sum: elements sum to zero");
    for (size_t i = 0; i < v.size(); ++i) node->value[i] = v[i] / s;
    if (node->requires_grad) {
        node->backward_fn = [s](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            double dot = 0.0;
            for (size_t i = 0; i < self.grad.size(); ++i) dot += self.grad[i] * self.value[i];
            for (size_t i = 0; i < self.grad.size(); ++i)
                p.grad[i] += (self.grad[i] - dot) / s;
        };
    }
    return Tensor(node);
}

// --- losses as primitive ops ------------------------------------------------------

Tensor kl_loss(const Tensor& pred, const std::vector<double>& gt, KlDirection dir,
               double floor) {
    check(gt.size() == pred.data().size(), "kl_loss: length mismatch");
    auto node = make_node({1}, {pred.node()}, "kl_loss");
    const auto& q = pred.data();
    double acc = 0.0;
    if (dir == KlDirection::gt_pred) {
        for (size_t i = 0; i < gt.size(); ++i) {
            if (gt[i] <= 0.0) continue; // 0 * log 0 = 0
            acc += gt[i] * (std::log(gt[i]) - std::log(std::max(q[i], floor)));
        }
    } else {
        for (size_t i = 0; i < gt.size(); ++i) {
            if (q[i] == 0.0) continue;
            acc += q[i] * (std::log(std::max(q[i], floor)) - std::log(std::max(gt[i], floor)));
        }
    }
    node->value[0] = acc;
    if (node->requires_grad) {
        node->backward_fn = [gt, dir, floor](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            const double g = self.grad[0];
            if (dir == KlDirection::gt_pred) {
                for (size_t i = 0; i < gt.size(); ++i) {
                    if (gt[i] <= 0.0 || p.value[i] < floor) continue;
                    p.grad[i] -= g * gt[i] / p.value[i];
                }
            } else {
                for (size_t i = 0; i < gt.size(); ++i) {
                    const double diff = std::log(std::max(p.value[i], floor)) -
                                        std::log(std::max(gt[i], floor));
                    p.grad[i] += g * (diff + (p.value[i] >= floor ? 1.0 : 0.0));
                }
            }
        };
    }
    return Tensor(node);
}

Tensor bce_loss(const Tensor& pred, const std::vector<double>& gt, double floor) {
    check(gt.size() == pred.data().size(), "bce_loss: length mismatch");
    auto node = make_node({1}, {pred.node()}, "bce_loss");
    const auto& q = pred.data();
    const double n = static_cast<double>(gt.size());
    double acc = 0.0;
    for (size_t i = 0; i < gt.size(); ++i) {
        const double p = std::clamp(q[i], floor, 1.0 - floor);
        acc -= gt[i] * std::log(p) + (1.0 - gt[i]) * std::log(1.0 - p);
    }
    node->value[0] = acc / n;
    if (node->requires_grad) {
        node->backward_fn = [gt, floor, n](Node& self) {
            Node& p = *self.parents[0];
            p.ensure_grad();
            const double g = self.grad[0] / n;
            for (size_t i = 0; i < gt.size(); ++i) {
                const double v = p.value[i];
                if (v <= floor || v >= 1.0 - floor) continue;
                p.grad[i] -= g * (gt[i] / v - (1.0 - gt[i]) / (1.0 - v));
            }
        };
    }
    return Tensor(node);
}

} // namespace pdp
