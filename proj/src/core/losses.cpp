#include "core/losses.hpp"

#include <cmath>

namespace raseg {

using detail::check;

template <class S>
TensorT<S> hard_pixel_weights(const TensorT<S>& gt, int kernel, double scale) {
    check(kernel >= 1 && kernel % 2 == 1, "hard_pixel_weights: kernel must be odd");
    for (const S v : gt.values())
        check(v == S(0) || v == S(1), "hard_pixel_weights: gt must be binary");
    TensorT<S> pooled = avg_pool2d(gt.detach_copy(), kernel, 1, (kernel - 1) / 2);
    TensorT<S> w = TensorT<S>::zeros(gt.shape());
    const auto& pv = pooled.values();
    const auto& gv = gt.values();
    auto& wv = w.values();
    for (size_t i = 0; i < wv.size(); ++i)
        wv[i] = S(1) + S(scale) * std::abs(pv[i] - gv[i]);
    return w;
}

template <class S>
TensorT<S> weighted_focal_loss(const TensorT<S>& logits, const TensorT<S>& gt,
                               const TensorT<S>& w, const LossConfig& cfg) {
    check(logits.shape() == gt.shape() && logits.shape() == w.shape(),
          "weighted_focal_loss: shape mismatch");
    cfg.validate();

    TensorT<S> p = sigmoid(logits);
    // p_t = p*gt + (1-p)*(1-gt)
    TensorT<S> p_t = add(mul(p, gt), mul(sub_from_scalar(1.0, p), sub_from_scalar(1.0, gt)));
    // alpha_t * w, a constant map
    TensorT<S> coef = TensorT<S>::zeros(gt.shape());
    {
        const auto& gv = gt.values();
        const auto& wv = w.values();
        auto& cv = coef.values();
        for (size_t i = 0; i < cv.size(); ++i) {
            const double alpha_t = gv[i] == S(1) ? cfg.alpha : 1.0 - cfg.alpha;
            cv[i] = S(alpha_t) * wv[i];
        }
    }
    TensorT<S> focal = mul(coef, mul(pow_scalar(sub_from_scalar(1.0, p_t), cfg.gamma),
                                     log(add_scalar(p_t, cfg.eps))));
    double w_sum = 0.0;
    for (const S v : w.values()) w_sum += double(v);
    return scalar_mul(sum_all(focal), -1.0 / w_sum);
}

template <class S>
TensorT<S> weighted_iou_loss(const TensorT<S>& logits, const TensorT<S>& gt,
                             const TensorT<S>& w, double eps) {
    check(logits.shape() == gt.shape() && logits.shape() == w.shape(),
          "weighted_iou_loss: shape mismatch");
    TensorT<S> p = sigmoid(logits);
    TensorT<S> inter = sum_all(mul(w, mul(p, gt)));
    // eps rides inside the weighted sum so scaling w cancels exactly
    TensorT<S> uni = sum_all(mul(w, add_scalar(sub(add(p, gt), mul(p, gt)), eps)));
    return sub_from_scalar(1.0, divide(inter, uni));
}

template <class S>
TensorT<S> categorical_ce(const TensorT<S>& logits, const std::vector<int>& labels) {
    return cross_entropy_channels(logits, labels);
}

template <class S>
TensorT<S> deep_supervision_loss(const DecoderOutputs<S>& outputs, const TensorT<S>& gt,
                                 const LossConfig& cfg) {
    check(!outputs.supervision.empty() && outputs.final_logits.defined(),
          "deep_supervision_loss: no outputs");
    const int gh = gt.shape().h, gw = gt.shape().w;
    TensorT<S> w = hard_pixel_weights(gt, cfg.weight_kernel, cfg.weight_scale);

    TensorT<S> total;
    auto add_term = [&](const TensorT<S>& logit) {
        TensorT<S> up = bilinear_resize(logit, gh, gw);
        TensorT<S> term =
            add(weighted_focal_loss(up, gt, w, cfg), weighted_iou_loss(up, gt, w, cfg.eps));
        total = total.defined() ? add(total, term) : term;
    };
    for (const auto& logit : outputs.supervision) add_term(logit);
    add_term(outputs.final_logits);
    return total;
}

template <class S>
TensorT<S> deep_supervision_loss_multiclass(const DecoderOutputs<S>& outputs,
                                            const std::vector<int>& labels, int gt_h, int gt_w) {
    check(!outputs.supervision.empty() && outputs.final_logits.defined(),
          "deep_supervision_loss: no outputs");
    TensorT<S> total;
    auto add_term = [&](const TensorT<S>& logit) {
        TensorT<S> term = categorical_ce(bilinear_resize(logit, gt_h, gt_w), labels);
        total = total.defined() ? add(total, term) : term;
    };
    for (const auto& logit : outputs.supervision) add_term(logit);
    add_term(outputs.final_logits);
    return total;
}

#define RASEG_INSTANTIATE_LOSSES(S)                                                           \
    template TensorT<S> hard_pixel_weights<S>(const TensorT<S>&, int, double);                \
    template TensorT<S> weighted_focal_loss<S>(const TensorT<S>&, const TensorT<S>&,          \
                                               const TensorT<S>&, const LossConfig&);         \
    template TensorT<S> weighted_iou_loss<S>(const TensorT<S>&, const TensorT<S>&,            \
                                             const TensorT<S>&, double);                      \
    template TensorT<S> categorical_ce<S>(const TensorT<S>&, const std::vector<int>&);        \
    template TensorT<S> deep_supervision_loss<S>(const DecoderOutputs<S>&, const TensorT<S>&, \
                                                 const LossConfig&);                          \
    template TensorT<S> deep_supervision_loss_multiclass<S>(const DecoderOutputs<S>&,         \
                                                            const std::vector<int>&, int, int);

RASEG_INSTANTIATE_LOSSES(float)
RASEG_INSTANTIATE_LOSSES(double)

}  // namespace raseg
