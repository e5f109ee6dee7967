#include "core/optim.hpp"

#include <cmath>

namespace raseg {

using detail::check;

template <class S>
Adam<S>::Adam(std::vector<NamedParam<S>> params, AdamConfig cfg) : cfg_(cfg) {
    for (auto& p : params)
        if (p.trainable) params_.push_back(p);
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(size_t(params_[i].tensor.numel()), S(0));
        v_[i].assign(size_t(params_[i].tensor.numel()), S(0));
    }
}

template <class S>
void Adam<S>::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        TensorT<S>& p = params_[i].tensor;
        auto& pv = p.values();
        const bool has_grad = p.has_grad();
        auto& mv = m_[i];
        auto& vv = v_[i];
        for (size_t j = 0; j < pv.size(); ++j) {
            const double g = has_grad ? double(p.grad()[j]) : 0.0;
            mv[j] = S(cfg_.beta1 * double(mv[j]) + (1.0 - cfg_.beta1) * g);
            vv[j] = S(cfg_.beta2 * double(vv[j]) + (1.0 - cfg_.beta2) * g * g);
            const double m_hat = double(mv[j]) / bc1;
            const double v_hat = double(vv[j]) / bc2;
            pv[j] = S(double(pv[j]) - lr * m_hat / (std::sqrt(v_hat) + cfg_.eps));
        }
    }
}

double cosine_lr(int64_t step, int64_t total_steps, double lr0) {
    check(total_steps >= 1, "cosine_lr: total_steps must be >= 1");
    check(step >= 0 && step <= total_steps, "cosine_lr: step out of range");
    if (step == 0) return lr0;          // boundary values are exact
    if (step == total_steps) return 0.0;
    return 0.5 * lr0 * (1.0 + std::cos(3.14159265358979323846 * double(step) / double(total_steps)));
}

template class Adam<float>;
template class Adam<double>;

}  // namespace raseg
