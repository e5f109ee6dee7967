#pragma once

#include <vector>

#include "core/model.hpp"

namespace raseg {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard Adam with bias correction. Moments are kept aligned with the
// parameter list handed to the constructor; the caller owns zeroing grads.
template <class S>
class Adam {
public:
    Adam() = default;
    Adam(std::vector<NamedParam<S>> params, AdamConfig cfg);

    void step(double lr);

    int64_t t() const { return t_; }
    std::vector<NamedParam<S>>& params() { return params_; }
    std::vector<std::vector<S>>& moments_m() { return m_; }
    std::vector<std::vector<S>>& moments_v() { return v_; }
    void set_t(int64_t t) { t_ = t; }

private:
    std::vector<NamedParam<S>> params_;  // trainable only
    AdamConfig cfg_;
    std::vector<std::vector<S>> m_, v_;
    int64_t t_ = 0;
};

// lr = 0.5 * lr0 * (1 + cos(pi * step / total_steps))
double cosine_lr(int64_t step, int64_t total_steps, double lr0);

}  // namespace raseg
