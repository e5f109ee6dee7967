#pragma once

#include <vector>

#include "core/tensor.hpp"

namespace raseg {

// Differentiable primitives. All return fresh tensors wired into the reverse
// graph; inputs are never modified. Broadcasting is limited to what the
// architecture needs: equal shapes, a 1-element scalar against anything, and
// a 1-channel map against a C-channel map (add/mul).

// y[n,co,oy,ox] = bias[co] + sum_{ci,ky,kx} x[n,ci,oy*s-p+ky,ox*s-p+kx] * w[co,ci,ky,kx]
template <class S>
TensorT<S> conv2d(const TensorT<S>& x, const TensorT<S>& weight, const TensorT<S>& bias,
                  int stride, int padding);

// Train mode normalizes with batch moments (biased variance) and, when
// update_stats is set, folds them into the running buffers with `momentum`.
// Eval mode normalizes with the running buffers.
template <class S>
TensorT<S> batch_norm2d(const TensorT<S>& x, const TensorT<S>& gamma, const TensorT<S>& beta,
                        TensorT<S>& running_mean, TensorT<S>& running_var,
                        bool train, bool update_stats, double momentum, double eps);

// Padding is -inf: windows never see fabricated zeros. Gradient routes to the
// first (row-major) maximal element of each window.
template <class S>
TensorT<S> max_pool2d(const TensorT<S>& x, int kernel, int stride, int padding);

// Window mean with the divisor fixed at kernel^2 (zero padding counts).
template <class S>
TensorT<S> avg_pool2d(const TensorT<S>& x, int kernel, int stride, int padding);

// Half-pixel centers (align_corners = false), source coordinates clamped to
// the valid range. Linear operator; backward is the exact transpose.
template <class S>
TensorT<S> bilinear_resize(const TensorT<S>& x, int out_h, int out_w);

template <class S> TensorT<S> sigmoid(const TensorT<S>& x);
template <class S> TensorT<S> relu(const TensorT<S>& x);
template <class S> TensorT<S> gelu(const TensorT<S>& x);  // exact erf form

// Softmax across the channel axis, per pixel.
template <class S> TensorT<S> softmax_channels(const TensorT<S>& x);
// Softmax across the last (w) axis; attention rows live there.
template <class S> TensorT<S> softmax_lastdim(const TensorT<S>& x);

template <class S> TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b);
template <class S> TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b);
template <class S> TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b);
template <class S> TensorT<S> divide(const TensorT<S>& a, const TensorT<S>& b);

template <class S> TensorT<S> scalar_mul(const TensorT<S>& x, double c);
template <class S> TensorT<S> add_scalar(const TensorT<S>& x, double c);
template <class S> TensorT<S> sub_from_scalar(double c, const TensorT<S>& x);
template <class S> TensorT<S> pow_scalar(const TensorT<S>& x, double e);
template <class S> TensorT<S> log(const TensorT<S>& x);

template <class S> TensorT<S> concat_channels(const std::vector<TensorT<S>>& xs);
template <class S> TensorT<S> slice_channels(const TensorT<S>& x, int c_begin, int c_end);

// Token-space primitives. Token tensors use the layout [n, groups, tokens, dim].
template <class S>
TensorT<S> linear(const TensorT<S>& x, const TensorT<S>& weight, const TensorT<S>& bias);
// a: [n,g,t,k], b: [n,g,k,u] or shared [1,1,k,u]
template <class S> TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b);
template <class S> TensorT<S> transpose_last2(const TensorT<S>& x);
template <class S> TensorT<S> im2tokens(const TensorT<S>& x);                 // [n,c,h,w] -> [n,1,h*w,c]
template <class S> TensorT<S> tokens2im(const TensorT<S>& x, int h, int w);   // inverse
template <class S> TensorT<S> split_heads(const TensorT<S>& x, int heads);    // [n,1,t,d] -> [n,heads,t,d/heads]
template <class S> TensorT<S> merge_heads(const TensorT<S>& x);               // inverse

template <class S> TensorT<S> sum_all(const TensorT<S>& x);          // -> 1x1x1x1
template <class S> TensorT<S> pick(const TensorT<S>& x, int64_t i);  // flat element -> 1x1x1x1

// Mean over all pixels of -log softmax(logits)[label]; labels are row-major
// over (n,h,w) and must lie in [0, C).
template <class S>
TensorT<S> cross_entropy_channels(const TensorT<S>& logits, const std::vector<int>& labels);

}  // namespace raseg
