#include "core/layers.hpp"

#include <cmath>

namespace raseg {

template <class S>
Conv2dLayer<S>::Conv2dLayer(int in, int out, int k, int stride_, int pad_, Rng& rng)
    : in_ch(in), out_ch(out), kernel(k), stride(stride_), pad(pad_) {
    detail::check(in >= 1 && out >= 1 && k >= 1, "conv layer: bad dimensions");
    const S stddev = S(std::sqrt(2.0 / (double(in) * k * k)));
    w = TensorT<S>::randn(Shape{out, in, k, k}, rng, stddev, true);
    b = TensorT<S>::zeros(Shape{out, 1, 1, 1}, true);
}

template <class S>
BatchNorm2dLayer<S>::BatchNorm2dLayer(int channels) {
    gamma = TensorT<S>::full(Shape{1, channels, 1, 1}, S(1), true);
    beta = TensorT<S>::zeros(Shape{1, channels, 1, 1}, true);
    running_mean = TensorT<S>::zeros(Shape{1, channels, 1, 1});
    running_var = TensorT<S>::full(Shape{1, channels, 1, 1}, S(1));
}

template <class S>
LinearLayer<S>::LinearLayer(int in, int out, Rng& rng) : in_dim(in), out_dim(out) {
    const S stddev = S(std::sqrt(2.0 / double(in + out)));
    w = TensorT<S>::randn(Shape{out, in, 1, 1}, rng, stddev, true);
    b = TensorT<S>::zeros(Shape{out, 1, 1, 1}, true);
}

template struct Conv2dLayer<float>;
template struct Conv2dLayer<double>;
template struct BatchNorm2dLayer<float>;
template struct BatchNorm2dLayer<double>;
template struct LinearLayer<float>;
template struct LinearLayer<double>;

}  // namespace raseg
