#pragma once

#include "core/decoder.hpp"
#include "core/ops.hpp"

namespace raseg {

struct LossConfig {
    double gamma = 2.0;       // focal exponent
    double alpha = 0.25;      // focal class balance
    int weight_kernel = 31;   // hard-pixel pooling size, odd
    double weight_scale = 5.0;
    double eps = 1e-6;

    void validate() const {
        detail::check(gamma >= 0, "loss config: gamma must be >= 0");
        detail::check(alpha > 0 && alpha < 1, "loss config: alpha must be in (0,1)");
        detail::check(weight_kernel >= 1 && weight_kernel % 2 == 1,
                      "loss config: weight_kernel must be odd");
        detail::check(eps > 0, "loss config: eps must be positive");
    }
};

// w = 1 + scale * |avgpool_k(gt) - gt|, emphasizing boundary pixels. gt must
// be a binary {0,1} map; the result is a constant (non-differentiable) tensor.
template <class S>
TensorT<S> hard_pixel_weights(const TensorT<S>& gt, int kernel, double scale);

// -sum(w * alpha_t * (1-p_t)^gamma * log(p_t + eps)) / sum(w), p = sigmoid(logits)
template <class S>
TensorT<S> weighted_focal_loss(const TensorT<S>& logits, const TensorT<S>& gt,
                               const TensorT<S>& w, const LossConfig& cfg);

// 1 - sum(w*p*gt) / sum(w*(p + gt - p*gt + eps))
template <class S>
TensorT<S> weighted_iou_loss(const TensorT<S>& logits, const TensorT<S>& gt,
                             const TensorT<S>& w, double eps);

// Mean over pixels of -log softmax(logits)[label].
template <class S>
TensorT<S> categorical_ce(const TensorT<S>& logits, const std::vector<int>& labels);

// Every supervision output plus the final logit is bilinear-resized to the
// ground-truth size; per-output losses are summed. Binary task: focal + IoU
// with hard-pixel weights. Multi-class: categorical cross-entropy.
template <class S>
TensorT<S> deep_supervision_loss(const DecoderOutputs<S>& outputs, const TensorT<S>& gt,
                                 const LossConfig& cfg);

template <class S>
TensorT<S> deep_supervision_loss_multiclass(const DecoderOutputs<S>& outputs,
                                            const std::vector<int>& labels, int gt_h, int gt_w);

}  // namespace raseg
