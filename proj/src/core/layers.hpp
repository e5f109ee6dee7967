#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "core/ops.hpp"
#include "core/tensor.hpp"

namespace raseg {

// Forward behaviour: Train normalizes with batch moments and updates running
// stats; GradCheck normalizes with batch moments but leaves state untouched
// (finite differencing must not mutate the model); Eval uses running stats.
struct RunMode {
    bool train = false;
    bool update_stats = false;

    static RunMode training() { return {true, true}; }
    static RunMode grad_check() { return {true, false}; }
    static RunMode eval() { return {false, false}; }
};

// Visits every named tensor of a module tree. `trainable` distinguishes
// optimizable parameters from buffers (batch-norm running stats).
template <class S>
using ParamVisitor = std::function<void(const std::string& name, TensorT<S>& t, bool trainable)>;

struct Complexity {
    uint64_t params = 0;  // trainable scalars
    uint64_t flops = 0;   // 2*MACs over convs/linears/attention matmuls
};

template <class S>
struct Conv2dLayer {
    TensorT<S> w, b;
    int in_ch = 0, out_ch = 0, kernel = 1, stride = 1, pad = 0;

    Conv2dLayer() = default;
    Conv2dLayer(int in, int out, int k, int stride_, int pad_, Rng& rng);

    TensorT<S> forward(const TensorT<S>& x) const { return conv2d(x, w, b, stride, pad); }
    void visit(const std::string& name, const ParamVisitor<S>& v) {
        v(name + ".w", w, true);
        v(name + ".b", b, true);
    }
    int out_dim(int in) const { return (in + 2 * pad - kernel) / stride + 1; }
    uint64_t param_count() const {
        return uint64_t(out_ch) * in_ch * kernel * kernel + uint64_t(out_ch);
    }
    void complexity(int in_h, int in_w, Complexity& c) const {
        c.params += param_count();
        c.flops += 2ull * out_dim(in_h) * out_dim(in_w) * out_ch * in_ch * kernel * kernel;
    }
};

template <class S>
struct BatchNorm2dLayer {
    TensorT<S> gamma, beta, running_mean, running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    BatchNorm2dLayer() = default;
    explicit BatchNorm2dLayer(int channels);

    TensorT<S> forward(const TensorT<S>& x, RunMode mode) {
        return batch_norm2d(x, gamma, beta, running_mean, running_var,
                            mode.train, mode.update_stats, momentum, eps);
    }
    void visit(const std::string& name, const ParamVisitor<S>& v) {
        v(name + ".gamma", gamma, true);
        v(name + ".beta", beta, true);
        v(name + ".running_mean", running_mean, false);
        v(name + ".running_var", running_var, false);
    }
    void complexity(Complexity& c) const { c.params += 2ull * gamma.numel(); }
};

template <class S>
struct LinearLayer {
    TensorT<S> w, b;  // w: [out,in,1,1]
    int in_dim = 0, out_dim = 0;

    LinearLayer() = default;
    LinearLayer(int in, int out, Rng& rng);

    TensorT<S> forward(const TensorT<S>& x) const { return linear(x, w, b); }
    void visit(const std::string& name, const ParamVisitor<S>& v) {
        v(name + ".w", w, true);
        v(name + ".b", b, true);
    }
    uint64_t param_count() const { return uint64_t(out_dim) * in_dim + uint64_t(out_dim); }
    void complexity(int64_t rows, Complexity& c) const {
        c.params += param_count();
        c.flops += 2ull * uint64_t(rows) * out_dim * in_dim;
    }
};

// conv -> bn -> optional relu, the workhorse block of the decoder
template <class S>
struct ConvBnLayer {
    Conv2dLayer<S> conv;
    BatchNorm2dLayer<S> bn;
    bool act = true;

    ConvBnLayer() = default;
    ConvBnLayer(int in, int out, int k, int stride, int pad, bool act_, Rng& rng)
        : conv(in, out, k, stride, pad, rng), bn(out), act(act_) {}

    TensorT<S> forward(const TensorT<S>& x, RunMode mode) {
        TensorT<S> y = bn.forward(conv.forward(x), mode);
        return act ? relu(y) : y;
    }
    void visit(const std::string& name, const ParamVisitor<S>& v) {
        conv.visit(name + ".conv", v);
        bn.visit(name + ".bn", v);
    }
    void complexity(int in_h, int in_w, Complexity& c) const {
        conv.complexity(in_h, in_w, c);
        bn.complexity(c);
    }
};

}  // namespace raseg
