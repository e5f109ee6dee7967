#include "core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace raseg {

using detail::check;
using detail::Node;

namespace {

template <class S>
TensorT<S> make_op(const char* op, Shape shape, std::vector<TensorT<S>> inputs,
                   std::function<void(Node<S>&)> backward_fn) {
    TensorT<S> out = TensorT<S>::zeros(shape);
    Node<S>& n = *out.node();
    n.op = op;
    bool needs = false;
    for (const auto& in : inputs) {
        needs = needs || in.node()->needs_grad;
        n.inputs.push_back(in.node());
    }
    n.needs_grad = needs;
    if (needs) n.backward_fn = std::move(backward_fn);
    return out;
}

template <class S>
int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// conv2d

template <class S>
TensorT<S> conv2d(const TensorT<S>& x, const TensorT<S>& weight, const TensorT<S>& bias,
                  int stride, int padding) {
    const Shape xs = x.shape(), ws = weight.shape();
    check(stride >= 1, "conv2d: stride must be >= 1");
    check(padding >= 0, "conv2d: padding must be >= 0");
    check(xs.c == ws.c, "conv2d: input channel mismatch");
    check(bias.numel() == ws.n, "conv2d: bias length mismatch");
    const int oh = conv_out_dim<S>(xs.h, ws.h, stride, padding);
    const int ow = conv_out_dim<S>(xs.w, ws.w, stride, padding);
    check(oh >= 1 && ow >= 1, "conv2d: non-positive output size");

    TensorT<S> y = make_op<S>(
        "conv2d", Shape{xs.n, ws.n, oh, ow}, {x, weight, bias},
        [xn = x.node(), wn = weight.node(), bn = bias.node(), stride, padding](Node<S>& out) {
            const Shape& xs = xn->shape;
            const Shape& ws = wn->shape;
            const Shape& ys = out.shape;
            const S* gy = out.grad.data();
            const S* xv = xn->values.data();
            const S* wv = wn->values.data();
            S* dx = nullptr;
            S* dw = nullptr;
            S* db = nullptr;
            if (xn->needs_grad) { xn->ensure_grad(); dx = xn->grad.data(); }
            if (wn->needs_grad) { wn->ensure_grad(); dw = wn->grad.data(); }
            if (bn->needs_grad) { bn->ensure_grad(); db = bn->grad.data(); }
            for (int n = 0; n < ys.n; ++n)
                for (int co = 0; co < ys.c; ++co)
                    for (int oy = 0; oy < ys.h; ++oy)
                        for (int ox = 0; ox < ys.w; ++ox) {
                            const S g = gy[((int64_t(n) * ys.c + co) * ys.h + oy) * ys.w + ox];
                            if (g == S(0)) continue;
                            if (db) db[co] += g;
                            const int iy0 = oy * stride - padding;
                            const int ix0 = ox * stride - padding;
                            for (int ci = 0; ci < ws.c; ++ci) {
                                const int64_t xbase = (int64_t(n) * xs.c + ci) * xs.h;
                                const int64_t wbase = (int64_t(co) * ws.c + ci) * ws.h;
                                for (int ky = 0; ky < ws.h; ++ky) {
                                    const int iy = iy0 + ky;
                                    if (iy < 0 || iy >= xs.h) continue;
                                    for (int kx = 0; kx < ws.w; ++kx) {
                                        const int ix = ix0 + kx;
                                        if (ix < 0 || ix >= xs.w) continue;
                                        const int64_t xi = (xbase + iy) * xs.w + ix;
                                        const int64_t wi = (wbase + ky) * ws.w + kx;
                                        if (dx) dx[xi] += g * wv[wi];
                                        if (dw) dw[wi] += g * xv[xi];
                                    }
                                }
                            }
                        }
        });

    const S* xv = x.values().data();
    const S* wv = weight.values().data();
    const S* bv = bias.values().data();
    S* yv = y.values().data();
    for (int n = 0; n < xs.n; ++n)
        for (int co = 0; co < ws.n; ++co)
            for (int oy = 0; oy < oh; ++oy) {
                const int iy0 = oy * stride - padding;
                const int ky_lo = std::max(0, -iy0);
                const int ky_hi = std::min(ws.h, xs.h - iy0);
                for (int ox = 0; ox < ow; ++ox) {
                    const int ix0 = ox * stride - padding;
                    const int kx_lo = std::max(0, -ix0);
                    const int kx_hi = std::min(ws.w, xs.w - ix0);
                    S acc = bv[co];
                    for (int ci = 0; ci < ws.c; ++ci) {
                        const int64_t xbase = (int64_t(n) * xs.c + ci) * xs.h;
                        const int64_t wbase = (int64_t(co) * ws.c + ci) * ws.h;
                        for (int ky = ky_lo; ky < ky_hi; ++ky) {
                            const S* xrow = xv + (xbase + iy0 + ky) * xs.w + ix0;
                            const S* wrow = wv + (wbase + ky) * ws.w;
                            for (int kx = kx_lo; kx < kx_hi; ++kx)
                                acc += xrow[kx] * wrow[kx];
                        }
                    }
                    yv[((int64_t(n) * ws.n + co) * oh + oy) * ow + ox] = acc;
                }
            }
    return y;
}

// ---------------------------------------------------------------------------
// batch_norm2d

template <class S>
TensorT<S> batch_norm2d(const TensorT<S>& x, const TensorT<S>& gamma, const TensorT<S>& beta,
                        TensorT<S>& running_mean, TensorT<S>& running_var,
                        bool train, bool update_stats, double momentum, double eps) {
    const Shape xs = x.shape();
    const int C = xs.c;
    check(gamma.numel() == C && beta.numel() == C, "batch_norm2d: parameter length mismatch");
    check(running_mean.numel() == C && running_var.numel() == C,
          "batch_norm2d: running state length mismatch");
    check(eps > 0, "batch_norm2d: eps must be positive");
    const int64_t per_channel = int64_t(xs.n) * xs.h * xs.w;
    check(per_channel > 0, "batch_norm2d: zero elements per channel");

    std::vector<S> mean(C), invstd(C);
    const S* xv = x.values().data();
    const int64_t plane = int64_t(xs.h) * xs.w;
    for (int c = 0; c < C; ++c) {
        double sum = 0.0, sumsq = 0.0;
        for (int n = 0; n < xs.n; ++n) {
            const S* p = xv + (int64_t(n) * C + c) * plane;
            for (int64_t i = 0; i < plane; ++i) {
                sum += double(p[i]);
                sumsq += double(p[i]) * double(p[i]);
            }
        }
        const double m = sum / double(per_channel);
        const double var = std::max(0.0, sumsq / double(per_channel) - m * m);
        if (train) {
            mean[c] = S(m);
            invstd[c] = S(1.0 / std::sqrt(var + eps));
            if (update_stats) {
                auto& rm = running_mean.values();
                auto& rv = running_var.values();
                rm[c] = S((1.0 - momentum) * double(rm[c]) + momentum * m);
                rv[c] = S((1.0 - momentum) * double(rv[c]) + momentum * var);
            }
        } else {
            mean[c] = running_mean.values()[c];
            invstd[c] = S(1.0 / std::sqrt(double(running_var.values()[c]) + eps));
        }
    }

    TensorT<S> y = make_op<S>(
        "batch_norm2d", xs, {x, gamma, beta},
        [xn = x.node(), gn = gamma.node(), bn = beta.node(), mean, invstd, train](Node<S>& out) {
            const Shape& xs = xn->shape;
            const int C = xs.c;
            const int64_t plane = int64_t(xs.h) * xs.w;
            const int64_t per_channel = int64_t(xs.n) * plane;
            const S* gy = out.grad.data();
            const S* xv = xn->values.data();
            const S* gv = gn->values.data();
            S* dx = nullptr;
            S* dg = nullptr;
            S* db = nullptr;
            if (xn->needs_grad) { xn->ensure_grad(); dx = xn->grad.data(); }
            if (gn->needs_grad) { gn->ensure_grad(); dg = gn->grad.data(); }
            if (bn->needs_grad) { bn->ensure_grad(); db = bn->grad.data(); }
            for (int c = 0; c < C; ++c) {
                double sum_gy = 0.0, sum_gy_xhat = 0.0;
                for (int n = 0; n < xs.n; ++n) {
                    const int64_t base = (int64_t(n) * C + c) * plane;
                    for (int64_t i = 0; i < plane; ++i) {
                        const double g = double(gy[base + i]);
                        const double xhat = (double(xv[base + i]) - double(mean[c])) * double(invstd[c]);
                        sum_gy += g;
                        sum_gy_xhat += g * xhat;
                    }
                }
                if (dg) dg[c] += S(sum_gy_xhat);
                if (db) db[c] += S(sum_gy);
                if (!dx) continue;
                const double scale = double(gv[c]) * double(invstd[c]);
                for (int n = 0; n < xs.n; ++n) {
                    const int64_t base = (int64_t(n) * C + c) * plane;
                    for (int64_t i = 0; i < plane; ++i) {
                        const double g = double(gy[base + i]);
                        if (train) {
                            const double xhat =
                                (double(xv[base + i]) - double(mean[c])) * double(invstd[c]);
                            dx[base + i] += S(scale * (g - sum_gy / double(per_channel) -
                                                       xhat * sum_gy_xhat / double(per_channel)));
                        } else {
                            dx[base + i] += S(scale * g);
                        }
                    }
                }
            }
        });

    S* yv = y.values().data();
    const S* gv = gamma.values().data();
    const S* bv = beta.values().data();
    for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < C; ++c) {
            const int64_t base = (int64_t(n) * C + c) * plane;
            const S m = mean[c], is = invstd[c], g = gv[c], b = bv[c];
            for (int64_t i = 0; i < plane; ++i)
                yv[base + i] = (xv[base + i] - m) * is * g + b;
        }
    return y;
}

// ---------------------------------------------------------------------------
// pooling

template <class S>
TensorT<S> max_pool2d(const TensorT<S>& x, int kernel, int stride, int padding) {
    const Shape xs = x.shape();
    check(kernel >= 1, "max_pool2d: kernel must be >= 1");
    check(stride >= 1, "max_pool2d: stride must be >= 1");
    const int oh = conv_out_dim<S>(xs.h, kernel, stride, padding);
    const int ow = conv_out_dim<S>(xs.w, kernel, stride, padding);
    check(oh >= 1 && ow >= 1, "max_pool2d: non-positive output size");

    const Shape ys{xs.n, xs.c, oh, ow};
    auto argmax = std::make_shared<std::vector<int64_t>>(size_t(ys.numel()), int64_t(-1));

    TensorT<S> y = make_op<S>(
        "max_pool2d", ys, {x},
        [xn = x.node(), argmax](Node<S>& out) {
            if (!xn->needs_grad) return;
            xn->ensure_grad();
            S* dx = xn->grad.data();
            const S* gy = out.grad.data();
            for (size_t i = 0; i < argmax->size(); ++i)
                if ((*argmax)[i] >= 0) dx[(*argmax)[i]] += gy[i];
        });

    const S* xv = x.values().data();
    S* yv = y.values().data();
    int64_t oi = 0;
    for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c) {
            const int64_t base = (int64_t(n) * xs.c + c) * xs.h;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox, ++oi) {
                    S best = -std::numeric_limits<S>::infinity();
                    int64_t best_i = -1;
                    for (int ky = 0; ky < kernel; ++ky) {
                        const int iy = oy * stride - padding + ky;
                        if (iy < 0 || iy >= xs.h) continue;
                        for (int kx = 0; kx < kernel; ++kx) {
                            const int ix = ox * stride - padding + kx;
                            if (ix < 0 || ix >= xs.w) continue;
                            const int64_t xi = (base + iy) * xs.w + ix;
                            if (xv[xi] > best) {
                                best = xv[xi];
                                best_i = xi;
                            }
                        }
                    }
                    yv[oi] = best;
                    (*argmax)[size_t(oi)] = best_i;
                }
        }
    return y;
}

template <class S>
TensorT<S> avg_pool2d(const TensorT<S>& x, int kernel, int stride, int padding) {
    const Shape xs = x.shape();
    check(kernel >= 1, "avg_pool2d: kernel must be >= 1");
    check(stride >= 1, "avg_pool2d: stride must be >= 1");
    const int oh = conv_out_dim<S>(xs.h, kernel, stride, padding);
    const int ow = conv_out_dim<S>(xs.w, kernel, stride, padding);
    check(oh >= 1 && ow >= 1, "avg_pool2d: non-positive output size");
    const S inv = S(1) / S(kernel * kernel);

    TensorT<S> y = make_op<S>(
        "avg_pool2d", Shape{xs.n, xs.c, oh, ow}, {x},
        [xn = x.node(), kernel, stride, padding, inv](Node<S>& out) {
            if (!xn->needs_grad) return;
            xn->ensure_grad();
            const Shape& xs = xn->shape;
            const Shape& ys = out.shape;
            S* dx = xn->grad.data();
            const S* gy = out.grad.data();
            int64_t oi = 0;
            for (int n = 0; n < ys.n; ++n)
                for (int c = 0; c < ys.c; ++c) {
                    const int64_t base = (int64_t(n) * xs.c + c) * xs.h;
                    for (int oy = 0; oy < ys.h; ++oy)
                        for (int ox = 0; ox < ys.w; ++ox, ++oi) {
                            const S g = gy[oi] * inv;
                            if (g == S(0)) continue;
                            for (int ky = 0; ky < kernel; ++ky) {
                                const int iy = oy * stride - padding + ky;
                                if (iy < 0 || iy >= xs.h) continue;
                                for (int kx = 0; kx < kernel; ++kx) {
                                    const int ix = ox * stride - padding + kx;
                                    if (ix < 0 || ix >= xs.w) continue;
                                    dx[(base + iy) * xs.w + ix] += g;
                                }
                            }
                        }
                }
        });

    const S* xv = x.values().data();
    S* yv = y.values().data();
    int64_t oi = 0;
    for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c) {
            const int64_t base = (int64_t(n) * xs.c + c) * xs.h;
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox, ++oi) {
                    S acc = S(0);
                    for (int ky = 0; ky < kernel; ++ky) {
                        const int iy = oy * stride - padding + ky;
                        if (iy < 0 || iy >= xs.h) continue;
                        for (int kx = 0; kx < kernel; ++kx) {
                            const int ix = ox * stride - padding + kx;
                            if (ix < 0 || ix >= xs.w) continue;
                            acc += xv[(base + iy) * xs.w + ix];
                        }
                    }
                    yv[oi] = acc * inv;
                }
        }
    return y;
}

// ---------------------------------------------------------------------------
// bilinear_resize

namespace {

template <class S>
struct ResizeAxis {
    std::vector<int> i0, i1;
    std::vector<S> frac;
};

template <class S>
ResizeAxis<S> resize_axis(int in, int out) {
    ResizeAxis<S> a;
    a.i0.resize(out);
    a.i1.resize(out);
    a.frac.resize(out);
    const double scale = double(in) / double(out);
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        src = std::min(std::max(src, 0.0), double(in - 1));
        const int lo = int(std::floor(src));
        a.i0[o] = lo;
        a.i1[o] = std::min(lo + 1, in - 1);
        a.frac[o] = S(src - lo);
    }
    return a;
}

}  // namespace

template <class S>
TensorT<S> bilinear_resize(const TensorT<S>& x, int out_h, int out_w) {
    const Shape xs = x.shape();
    check(out_h >= 1 && out_w >= 1, "bilinear_resize: output size must be >= 1");
    const auto ay = resize_axis<S>(xs.h, out_h);
    const auto ax = resize_axis<S>(xs.w, out_w);

    TensorT<S> y = make_op<S>(
        "bilinear_resize", Shape{xs.n, xs.c, out_h, out_w}, {x},
        [xn = x.node(), ay, ax](Node<S>& out) {
            if (!xn->needs_grad) return;
            xn->ensure_grad();
            const Shape& xs = xn->shape;
            const Shape& ys = out.shape;
            S* dx = xn->grad.data();
            const S* gy = out.grad.data();
            int64_t oi = 0;
            for (int n = 0; n < ys.n; ++n)
                for (int c = 0; c < ys.c; ++c) {
                    const int64_t base = (int64_t(n) * xs.c + c) * xs.h;
                    for (int oy = 0; oy < ys.h; ++oy) {
                        const S fy = ay.frac[oy];
                        const int64_t r0 = (base + ay.i0[oy]) * xs.w;
                        const int64_t r1 = (base + ay.i1[oy]) * xs.w;
                        for (int ox = 0; ox < ys.w; ++ox, ++oi) {
                            const S g = gy[oi];
                            if (g == S(0)) continue;
                            const S fx = ax.frac[ox];
                            const int x0 = ax.i0[ox], x1 = ax.i1[ox];
                            dx[r0 + x0] += g * (S(1) - fx) * (S(1) - fy);
                            dx[r0 + x1] += g * fx * (S(1) - fy);
                            dx[r1 + x0] += g * (S(1) - fx) * fy;
                            dx[r1 + x1] += g * fx * fy;
                        }
                    }
                }
        });

    const S* xv = x.values().data();
    S* yv = y.values().data();
    int64_t oi = 0;
    for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c) {
            const int64_t base = (int64_t(n) * xs.c + c) * xs.h;
            for (int oy = 0; oy < out_h; ++oy) {
                const S fy = ay.frac[oy];
                const S* r0 = xv + (base + ay.i0[oy]) * xs.w;
                const S* r1 = xv + (base + ay.i1[oy]) * xs.w;
                for (int ox = 0; ox < out_w; ++ox, ++oi) {
                    const S fx = ax.frac[ox];
                    const int x0 = ax.i0[ox], x1 = ax.i1[ox];
                    // lerp form keeps constants exactly constant
                    const S top = r0[x0] + fx * (r0[x1] - r0[x0]);
                    const S bot = r1[x0] + fx * (r1[x1] - r1[x0]);
                    yv[oi] = top + fy * (bot - top);
                }
            }
        }
    return y;
}

// ---------------------------------------------------------------------------
// activations

template <class S>
TensorT<S> sigmoid(const TensorT<S>& x) {
    TensorT<S> y = make_op<S>(
        "sigmoid", x.shape(), {x},
        [xn = x.node()](Node<S>& out) {
            if (!xn->needs_grad) return;
            xn->ensure_grad();
            S* dx = xn->grad.data();
            const S* gy = out.grad.data();
            const S* yv = out.values.data();
            for (size_t i = 0; i < out.values.size(); ++i)
                dx[i] += gy[i] * yv[i] * (S(1) - yv[i]);
        });
    const S* xv = x.values().data();
    S* yv = y.values().data();
    for (int64_t i = 0; i < x.numel(); ++i) {
        const S v = xv[i];
        yv[i] = v >= S(0) ? S(1) / (S(1) + std::exp(-v))
                          : S(std::exp(double(v)) / (1.0 + std::exp(double(v))));
    }
    return y;
}

template <class S>
TensorT<S> relu(const TensorT<S>& x) {
    TensorT<S> y = make_op<S>(
        "relu", x.shape(), {x},
        [xn = x.node()](Node<S>& out) {
            if (!xn->needs_grad) return;
            xn->ensure_grad();
            S* dx = xn->grad.data();
            const S* gy = out.grad.data();
            const S* xv = xn->values.data();
            for (size_t i = 0; i < out.values.size(); ++i)
                if (xv[i] > S(0)) dx[i] += gy[i];
        });
    const S* xv = x.values().data();
    S* yv = y.values().data();
    for (int64_t i = 0; i < x.numel(); ++i) yv[i] = xv[i] > S(0) ? xv[i] : S(0);
    return y;
}

template <class S>
TensorT<S> gelu(const TensorT<S>& x) {
    constexpr double kInvSqrt2 = 0.7071067811865475244;
    constexpr double kInvSqrt2Pi = 0.3989422804014326779;
    TensorT<S> y = make_op<S>(
        "gelu", x.shape(), {x},
        [xn = x.node()](Node<S>& out) {
            if (!xn->needs_grad) return;
            xn->ensure_grad();
            S* dx = xn->grad.data();
            const S* gy = out.grad.data();
            const S* xv = xn->values.data();
            for (size_t i = 0; i < out.values.size(); ++i) {
                const double v = double(xv[i]);
                const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
                dx[i] += gy[i] * S(cdf + v * pdf);
            }
        });
    const S* xv = x.values().data();
    S* yv = y.values().data();
    for (int64_t i = 0; i < x.numel(); ++i) {
        const double v = double(xv[i]);
        yv[i] = S(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
    }
    return y;
}

namespace {

// softmax over a strided slice: `count` entries spaced `step` apart, repeated
// for every (outer, inner) position.
template <class S>
void softmax_forward(const S* x, S* y, int64_t outer, int count, int64_t inner) {
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < inner; ++i) {
            const int64_t base = o * count * inner + i;
            S m = x[base];
            for (int k = 1; k < count; ++k) m = std::max(m, x[base + k * inner]);
            double sum = 0.0;
            for (int k = 0; k < count; ++k) {
                const double e = std::exp(double(x[base + k * inner] - m));
                y[base + k * inner] = S(e);
                sum += e;
            }
            const S inv = S(1.0 / sum);
            for (int k = 0; k < count; ++k) y[base + k * inner] *= inv;
        }
}

template <class S>
void softmax_backward(const S* y, const S* gy, S* dx, int64_t outer, int count, int64_t inner) {
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t i = 0; i < inner; ++i) {
            const int64_t base = o * count * inner + i;
            double dot = 0.0;
            for (int k = 0; k < count; ++k)
                dot += double(gy[base + k * inner]) * double(y[base + k * inner]);
            for (int k = 0; k < count; ++k) {
                const int64_t idx = base + k * inner;
                dx[idx] += y[idx] * (gy[idx] - S(dot));
            }
        }
}

}  // namespace

template <class S>
TensorT<S> softmax_channels(const TensorT<S>& x) {
    const Shape xs = x.shape();
    check(xs.c >= 1, "softmax_channels: needs at least one channel");
    TensorT<S> y = make_op<S>(
        "softmax_channels", xs, {x},
        [xn = x.node()](Node<S>& out) {
            if (!xn->needs_grad) return;
            xn->ensure_grad();
            const Shape& s = out.shape;
            softmax_backward(out.values.data(), out.grad.data(), xn->grad.data(),
                             s.n, s.c, int64_t(s.h) * s.w);
        });
    softmax_forward(x.values().data(), y.values().data(), xs.n, xs.c, int64_t(xs.h) * xs.w);
    return y;
}

template <class S>
TensorT<S> softmax_lastdim(const TensorT<S>& x) {
    const Shape xs = x.shape();
    TensorT<S> y = make_op<S>(
        "softmax_lastdim", xs, {x},
        [xn = x.node()](Node<S>& out) {
            if (!xn->needs_grad) return;
            xn->ensure_grad();
            const Shape& s = out.shape;
            softmax_backward(out.values.data(), out.grad.data(), xn->grad.data(),
                             int64_t(s.n) * s.c * s.h, s.w, 1);
        });
    softmax_forward(x.values().data(), y.values().data(), int64_t(xs.n) * xs.c * xs.h, xs.w, 1);
    return y;
}

// ---------------------------------------------------------------------------
// elementwise binary ops with limited broadcasting

namespace {

enum class Bcast { None, ScalarA, ScalarB, ChannelA, ChannelB };

template <class S>
Bcast broadcast_mode(const Shape& a, const Shape& b, bool allow_channel, const char* who) {
    if (a == b) return Bcast::None;
    if (b.numel() == 1) return Bcast::ScalarB;
    if (a.numel() == 1) return Bcast::ScalarA;
    if (allow_channel && a.n == b.n && a.h == b.h && a.w == b.w) {
        if (b.c == 1) return Bcast::ChannelB;
        if (a.c == 1) return Bcast::ChannelA;
    }
    check(false, who);
    return Bcast::None;
}

// Index of the broadcast operand for flat output index i.
template <class S>
int64_t bcast_index(Bcast mode, bool operand_a, const Shape& out, int64_t i) {
    const bool reduced = (operand_a && (mode == Bcast::ScalarA || mode == Bcast::ChannelA)) ||
                         (!operand_a && (mode == Bcast::ScalarB || mode == Bcast::ChannelB));
    if (!reduced) return i;
    if (mode == Bcast::ScalarA || mode == Bcast::ScalarB) return 0;
    // channel broadcast: drop the channel coordinate
    const int64_t plane = int64_t(out.h) * out.w;
    const int64_t n = i / (int64_t(out.c) * plane);
    const int64_t rem = i % plane;
    return n * plane + rem;
}

template <class S, class F, class DFA, class DFB>
TensorT<S> binary_op(const char* name, const TensorT<S>& a, const TensorT<S>& b,
                     bool allow_channel, F f, DFA dfa, DFB dfb) {
    const Bcast mode = broadcast_mode<S>(a.shape(), b.shape(), allow_channel, name);
    const Shape out_shape = (mode == Bcast::ScalarA || mode == Bcast::ChannelA) ? b.shape() : a.shape();

    TensorT<S> y = make_op<S>(
        name, out_shape, {a, b},
        [an = a.node(), bn = b.node(), mode, dfa, dfb](Node<S>& out) {
            const S* gy = out.grad.data();
            const S* av = an->values.data();
            const S* bv = bn->values.data();
            S* da = nullptr;
            S* db = nullptr;
            if (an->needs_grad) { an->ensure_grad(); da = an->grad.data(); }
            if (bn->needs_grad) { bn->ensure_grad(); db = bn->grad.data(); }
            if (!da && !db) return;
            const int64_t n = out.shape.numel();
            for (int64_t i = 0; i < n; ++i) {
                const int64_t ia = bcast_index<S>(mode, true, out.shape, i);
                const int64_t ib = bcast_index<S>(mode, false, out.shape, i);
                if (da) da[ia] += gy[i] * dfa(av[ia], bv[ib]);
                if (db) db[ib] += gy[i] * dfb(av[ia], bv[ib]);
            }
        });

    const S* av = a.values().data();
    const S* bv = b.values().data();
    S* yv = y.values().data();
    const int64_t n = out_shape.numel();
    for (int64_t i = 0; i < n; ++i) {
        const int64_t ia = bcast_index<S>(mode, true, out_shape, i);
        const int64_t ib = bcast_index<S>(mode, false, out_shape, i);
        yv[i] = f(av[ia], bv[ib]);
    }
    return y;
}

}  // namespace

template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    return binary_op<S>(
        "add", a, b, true, [](S x, S y) { return x + y; },
        [](S, S) { return S(1); }, [](S, S) { return S(1); });
}

template <class S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
    return binary_op<S>(
        "sub", a, b, true, [](S x, S y) { return x - y; },
        [](S, S) { return S(1); }, [](S, S) { return S(-1); });
}

template <class S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
    return binary_op<S>(
        "mul", a, b, true, [](S x, S y) { return x * y; },
        [](S, S y) { return y; }, [](S x, S) { return x; });
}

template <class S>
TensorT<S> divide(const TensorT<S>& a, const TensorT<S>& b) {
    return binary_op<S>(
        "divide", a, b, false, [](S x, S y) { return x / y; },
        [](S, S y) { return S(1) / y; }, [](S x, S y) { return -x / (y * y); });
}

// ---------------------------------------------------------------------------
// elementwise unary ops

namespace {

template <class S, class F, class DF>
TensorT<S> unary_op(const char* name, const TensorT<S>& x, F f, DF df) {
    TensorT<S> y = make_op<S>(
        name, x.shape(), {x},
        [xn = x.node(), df](Node<S>& out) {
            if (!xn->needs_grad) return;
            xn->ensure_grad();
            S* dx = xn->grad.data();
            const S* gy = out.grad.data();
            const S* xv = xn->values.data();
            for (size_t i = 0; i < out.values.size(); ++i) dx[i] += gy[i] * df(xv[i]);
        });
    const S* xv = x.values().data();
    S* yv = y.values().data();
    for (int64_t i = 0; i < x.numel(); ++i) yv[i] = f(xv[i]);
    return y;
}

}  // namespace

template <class S>
TensorT<S> scalar_mul(const TensorT<S>& x, double c) {
    const S k = S(c);
    return unary_op<S>("scalar_mul", x, [k](S v) { return v * k; }, [k](S) { return k; });
}

template <class S>
TensorT<S> add_scalar(const TensorT<S>& x, double c) {
    const S k = S(c);
    return unary_op<S>("add_scalar", x, [k](S v) { return v + k; }, [](S) { return S(1); });
}

template <class S>
TensorT<S> sub_from_scalar(double c, const TensorT<S>& x) {
    const S k = S(c);
    return unary_op<S>("sub_from_scalar", x, [k](S v) { return k - v; }, [](S) { return S(-1); });
}

template <class S>
TensorT<S> pow_scalar(const TensorT<S>& x, double e) {
    if (e == 0.0)
        return unary_op<S>("pow_scalar", x, [](S) { return S(1); }, [](S) { return S(0); });
    const S ee = S(e);
    return unary_op<S>(
        "pow_scalar", x, [e](S v) { return S(std::pow(double(v), e)); },
        [e, ee](S v) { return ee * S(std::pow(double(v), e - 1.0)); });
}

template <class S>
TensorT<S> log(const TensorT<S>& x) {
    return unary_op<S>(
        "log", x, [](S v) { return S(std::log(double(v))); }, [](S v) { return S(1) / v; });
}

// ---------------------------------------------------------------------------
// channel concat / slice

template <class S>
TensorT<S> concat_channels(const std::vector<TensorT<S>>& xs) {
    check(!xs.empty(), "concat_channels: empty input list");
    const Shape first = xs.front().shape();
    int total_c = 0;
    for (const auto& t : xs) {
        const Shape s = t.shape();
        check(s.n == first.n && s.h == first.h && s.w == first.w,
              "concat_channels: inputs must share n,h,w");
        total_c += s.c;
    }
    const Shape ys{first.n, total_c, first.h, first.w};

    TensorT<S> y = make_op<S>(
        "concat_channels", ys, xs,
        [](Node<S>& out) {
            const Shape& ys = out.shape;
            const int64_t plane = int64_t(ys.h) * ys.w;
            const S* gy = out.grad.data();
            int c_off = 0;
            for (auto& in : out.inputs) {
                const int ci = in->shape.c;
                if (in->needs_grad) {
                    in->ensure_grad();
                    S* dx = in->grad.data();
                    for (int n = 0; n < ys.n; ++n)
                        for (int c = 0; c < ci; ++c) {
                            const S* src = gy + ((int64_t(n) * ys.c + c_off + c) * plane);
                            S* dst = dx + ((int64_t(n) * ci + c) * plane);
                            for (int64_t i = 0; i < plane; ++i) dst[i] += src[i];
                        }
                }
                c_off += ci;
            }
        });

    S* yv = y.values().data();
    const int64_t plane = int64_t(first.h) * first.w;
    int c_off = 0;
    for (const auto& t : xs) {
        const int ci = t.shape().c;
        const S* xv = t.values().data();
        for (int n = 0; n < first.n; ++n)
            for (int c = 0; c < ci; ++c)
                std::memcpy(yv + ((int64_t(n) * total_c + c_off + c) * plane),
                            xv + ((int64_t(n) * ci + c) * plane), size_t(plane) * sizeof(S));
        c_off += ci;
    }
    return y;
}

template <class S>
TensorT<S> slice_channels(const TensorT<S>& x, int c_begin, int c_end) {
    const Shape xs = x.shape();
    check(0 <= c_begin && c_begin < c_end && c_end <= xs.c, "slice_channels: bad range");
    const int cs = c_end - c_begin;
    const Shape ys{xs.n, cs, xs.h, xs.w};

    TensorT<S> y = make_op<S>(
        "slice_channels", ys, {x},
        [xn = x.node(), c_begin](Node<S>& out) {
            if (!xn->needs_grad) return;
            xn->ensure_grad();
            const Shape& ys = out.shape;
            const Shape& xs = xn->shape;
            const int64_t plane = int64_t(ys.h) * ys.w;
            const S* gy = out.grad.data();
            S* dx = xn->grad.data();
            for (int n = 0; n < ys.n; ++n)
                for (int c = 0; c < ys.c; ++c) {
                    const S* src = gy + ((int64_t(n) * ys.c + c) * plane);
                    S* dst = dx + ((int64_t(n) * xs.c + c_begin + c) * plane);
                    for (int64_t i = 0; i < plane; ++i) dst[i] += src[i];
                }
        });

    S* yv = y.values().data();
    const S* xv = x.values().data();
    const int64_t plane = int64_t(xs.h) * xs.w;
    for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < cs; ++c)
            std::memcpy(yv + ((int64_t(n) * cs + c) * plane),
                        xv + ((int64_t(n) * xs.c + c_begin + c) * plane),
                        size_t(plane) * sizeof(S));
    return y;
}

// ---------------------------------------------------------------------------
// token-space ops

template <class S>
TensorT<S> linear(const TensorT<S>& x, const TensorT<S>& weight, const TensorT<S>& bias) {
    const Shape xs = x.shape(), ws = weight.shape();
    check(xs.w == ws.c, "linear: inner dimension mismatch");
    const bool has_bias = bias.defined();
    if (has_bias) check(bias.numel() == ws.n, "linear: bias length mismatch");
    const int dout = ws.n, din = ws.c;
    const int64_t rows = int64_t(xs.n) * xs.c * xs.h;
    const Shape ys{xs.n, xs.c, xs.h, dout};

    std::vector<TensorT<S>> inputs{x, weight};
    if (has_bias) inputs.push_back(bias);
    TensorT<S> y = make_op<S>(
        "linear", ys, inputs,
        [xn = x.node(), wn = weight.node(),
         bnode = has_bias ? bias.node() : nullptr, rows, din, dout](Node<S>& out) {
            const S* gy = out.grad.data();
            const S* xv = xn->values.data();
            const S* wv = wn->values.data();
            S* dx = nullptr;
            S* dw = nullptr;
            S* db = nullptr;
            if (xn->needs_grad) { xn->ensure_grad(); dx = xn->grad.data(); }
            if (wn->needs_grad) { wn->ensure_grad(); dw = wn->grad.data(); }
            if (bnode && bnode->needs_grad) { bnode->ensure_grad(); db = bnode->grad.data(); }
            for (int64_t r = 0; r < rows; ++r) {
                const S* g = gy + r * dout;
                const S* xr = xv + r * din;
                S* dxr = dx ? dx + r * din : nullptr;
                for (int o = 0; o < dout; ++o) {
                    const S go = g[o];
                    if (go == S(0)) continue;
                    if (db) db[o] += go;
                    const S* wrow = wv + int64_t(o) * din;
                    if (dxr)
                        for (int i = 0; i < din; ++i) dxr[i] += go * wrow[i];
                    if (dw) {
                        S* dwrow = dw + int64_t(o) * din;
                        for (int i = 0; i < din; ++i) dwrow[i] += go * xr[i];
                    }
                }
            }
        });

    const S* xv = x.values().data();
    const S* wv = weight.values().data();
    S* yv = y.values().data();
    for (int64_t r = 0; r < rows; ++r) {
        const S* xr = xv + r * din;
        S* yr = yv + r * dout;
        for (int o = 0; o < dout; ++o) {
            S acc = has_bias ? bias.values()[size_t(o)] : S(0);
            const S* wrow = wv + int64_t(o) * din;
            for (int i = 0; i < din; ++i) acc += xr[i] * wrow[i];
            yr[o] = acc;
        }
    }
    return y;
}

template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
    const Shape as = a.shape(), bs = b.shape();
    check(as.w == bs.h, "matmul: inner dimension mismatch");
    const bool shared_b = (bs.n == 1 && bs.c == 1);
    check(shared_b || (bs.n == as.n && bs.c == as.c), "matmul: batch dimension mismatch");
    const int t = as.h, k = as.w, u = bs.w;
    const int64_t batches = int64_t(as.n) * as.c;
    const Shape ys{as.n, as.c, t, u};

    TensorT<S> y = make_op<S>(
        "matmul", ys, {a, b},
        [an = a.node(), bn = b.node(), shared_b, batches, t, k, u](Node<S>& out) {
            const S* gy = out.grad.data();
            const S* av = an->values.data();
            const S* bv = bn->values.data();
            S* da = nullptr;
            S* db = nullptr;
            if (an->needs_grad) { an->ensure_grad(); da = an->grad.data(); }
            if (bn->needs_grad) { bn->ensure_grad(); db = bn->grad.data(); }
            for (int64_t g = 0; g < batches; ++g) {
                const S* ag = av + g * t * k;
                const S* bg = bv + (shared_b ? 0 : g * int64_t(k) * u);
                const S* gg = gy + g * t * u;
                S* dag = da ? da + g * t * k : nullptr;
                S* dbg = db ? db + (shared_b ? 0 : g * int64_t(k) * u) : nullptr;
                for (int i = 0; i < t; ++i)
                    for (int j = 0; j < u; ++j) {
                        const S gv = gg[int64_t(i) * u + j];
                        if (gv == S(0)) continue;
                        for (int m = 0; m < k; ++m) {
                            if (dag) dag[int64_t(i) * k + m] += gv * bg[int64_t(m) * u + j];
                            if (dbg) dbg[int64_t(m) * u + j] += gv * ag[int64_t(i) * k + m];
                        }
                    }
            }
        });

    const S* av = a.values().data();
    const S* bv = b.values().data();
    S* yv = y.values().data();
    for (int64_t g = 0; g < batches; ++g) {
        const S* ag = av + g * t * k;
        const S* bg = bv + (shared_b ? 0 : g * int64_t(k) * u);
        S* yg = yv + g * t * u;
        for (int i = 0; i < t; ++i)
            for (int j = 0; j < u; ++j) {
                S acc = S(0);
                for (int m = 0; m < k; ++m)
                    acc += ag[int64_t(i) * k + m] * bg[int64_t(m) * u + j];
                yg[int64_t(i) * u + j] = acc;
            }
    }
    return y;
}

namespace {

// Shared machinery for pure index permutations; backward applies the inverse.
template <class S, class IndexMap>
TensorT<S> permute_op(const char* name, const TensorT<S>& x, Shape out_shape, IndexMap out_to_in) {
    TensorT<S> y = make_op<S>(
        name, out_shape, {x},
        [xn = x.node(), out_to_in](Node<S>& out) {
            if (!xn->needs_grad) return;
            xn->ensure_grad();
            S* dx = xn->grad.data();
            const S* gy = out.grad.data();
            const int64_t n = out.shape.numel();
            for (int64_t i = 0; i < n; ++i) dx[out_to_in(i)] += gy[i];
        });
    const S* xv = x.values().data();
    S* yv = y.values().data();
    const int64_t n = out_shape.numel();
    for (int64_t i = 0; i < n; ++i) yv[i] = xv[out_to_in(i)];
    return y;
}

}  // namespace

template <class S>
TensorT<S> transpose_last2(const TensorT<S>& x) {
    const Shape xs = x.shape();
    const Shape ys{xs.n, xs.c, xs.w, xs.h};
    const int h = xs.h, w = xs.w;
    return permute_op<S>("transpose_last2", x, ys, [h, w](int64_t i) {
        const int64_t g = i / (int64_t(h) * w);
        const int64_t rem = i % (int64_t(h) * w);
        const int64_t oy = rem / h, ox = rem % h;  // out is w x h
        return (g * h + ox) * w + oy;
    });
}

template <class S>
TensorT<S> im2tokens(const TensorT<S>& x) {
    const Shape xs = x.shape();
    const int c = xs.c, hw = xs.h * xs.w;
    return permute_op<S>("im2tokens", x, Shape{xs.n, 1, hw, c}, [c, hw](int64_t i) {
        const int64_t n = i / (int64_t(hw) * c);
        const int64_t rem = i % (int64_t(hw) * c);
        const int64_t p = rem / c, ch = rem % c;
        return (n * c + ch) * hw + p;
    });
}

template <class S>
TensorT<S> tokens2im(const TensorT<S>& x, int h, int w) {
    const Shape xs = x.shape();
    check(xs.c == 1, "tokens2im: expected token layout [n,1,t,c]");
    check(xs.h == h * w, "tokens2im: token count mismatch");
    const int c = xs.w, hw = h * w;
    return permute_op<S>("tokens2im", x, Shape{xs.n, c, h, w}, [c, hw](int64_t i) {
        const int64_t n = i / (int64_t(c) * hw);
        const int64_t rem = i % (int64_t(c) * hw);
        const int64_t ch = rem / hw, p = rem % hw;
        return (n * hw + p) * c + ch;
    });
}

template <class S>
TensorT<S> split_heads(const TensorT<S>& x, int heads) {
    const Shape xs = x.shape();
    check(xs.c == 1, "split_heads: expected token layout [n,1,t,d]");
    check(xs.w % heads == 0, "split_heads: dim not divisible by heads");
    const int t = xs.h, d = xs.w, dh = d / heads;
    return permute_op<S>("split_heads", x, Shape{xs.n, heads, t, dh}, [t, d, dh](int64_t i) {
        const int64_t n = i / (int64_t(d) * t);
        const int64_t rem = i % (int64_t(d) * t);
        const int64_t g = rem / (int64_t(t) * dh);
        const int64_t rem2 = rem % (int64_t(t) * dh);
        const int64_t tok = rem2 / dh, j = rem2 % dh;
        return (n * t + tok) * d + g * dh + j;
    });
}

template <class S>
TensorT<S> merge_heads(const TensorT<S>& x) {
    const Shape xs = x.shape();
    const int heads = xs.c, t = xs.h, dh = xs.w, d = heads * dh;
    return permute_op<S>("merge_heads", x, Shape{xs.n, 1, t, d}, [heads, t, dh, d](int64_t i) {
        const int64_t n = i / (int64_t(d) * t);
        const int64_t rem = i % (int64_t(d) * t);
        const int64_t tok = rem / d;
        const int64_t col = rem % d;
        const int64_t g = col / dh, j = col % dh;
        return ((n * heads + g) * t + tok) * dh + j;
    });
}

// ---------------------------------------------------------------------------
// reductions

template <class S>
TensorT<S> sum_all(const TensorT<S>& x) {
    TensorT<S> y = make_op<S>(
        "sum_all", Shape{1, 1, 1, 1}, {x},
        [xn = x.node()](Node<S>& out) {
            if (!xn->needs_grad) return;
            xn->ensure_grad();
            const S g = out.grad[0];
            for (auto& v : xn->grad) v += g;
        });
    double acc = 0.0;
    for (const S v : x.values()) acc += double(v);
    y.values()[0] = S(acc);
    return y;
}

template <class S>
TensorT<S> pick(const TensorT<S>& x, int64_t i) {
    check(i >= 0 && i < x.numel(), "pick: index out of range");
    TensorT<S> y = make_op<S>(
        "pick", Shape{1, 1, 1, 1}, {x},
        [xn = x.node(), i](Node<S>& out) {
            if (!xn->needs_grad) return;
            xn->ensure_grad();
            xn->grad[size_t(i)] += out.grad[0];
        });
    y.values()[0] = x.values()[size_t(i)];
    return y;
}

// ---------------------------------------------------------------------------
// cross entropy over channels

template <class S>
TensorT<S> cross_entropy_channels(const TensorT<S>& logits, const std::vector<int>& labels) {
    const Shape s = logits.shape();
    const int64_t pixels = int64_t(s.n) * s.h * s.w;
    check(int64_t(labels.size()) == pixels, "cross_entropy_channels: label count mismatch");
    for (const int l : labels)
        check(l >= 0 && l < s.c, "cross_entropy_channels: label out of range");

    // probs are saved for the backward pass
    auto probs = std::make_shared<std::vector<S>>(logits.values().size());
    softmax_forward(logits.values().data(), probs->data(), s.n, s.c, int64_t(s.h) * s.w);

    TensorT<S> y = make_op<S>(
        "cross_entropy_channels", Shape{1, 1, 1, 1}, {logits},
        [xn = logits.node(), probs, labels, pixels](Node<S>& out) {
            if (!xn->needs_grad) return;
            xn->ensure_grad();
            const Shape& s = xn->shape;
            const int64_t plane = int64_t(s.h) * s.w;
            const S g = out.grad[0] / S(pixels);
            S* dx = xn->grad.data();
            const S* pv = probs->data();
            for (int n = 0; n < s.n; ++n)
                for (int64_t p = 0; p < plane; ++p) {
                    const int label = labels[size_t(n * plane + p)];
                    for (int c = 0; c < s.c; ++c) {
                        const int64_t idx = (int64_t(n) * s.c + c) * plane + p;
                        dx[idx] += g * (pv[idx] - S(c == label ? 1 : 0));
                    }
                }
        });

    const int64_t plane = int64_t(s.h) * s.w;
    double loss = 0.0;
    const S* pv = probs->data();
    for (int n = 0; n < s.n; ++n)
        for (int64_t p = 0; p < plane; ++p) {
            const int label = labels[size_t(n * plane + p)];
            const double prob = double(pv[(int64_t(n) * s.c + label) * plane + p]);
            loss -= std::log(std::max(prob, 1e-300));
        }
    y.values()[0] = S(loss / double(pixels));
    return y;
}

// ---------------------------------------------------------------------------
// explicit instantiations

#define RASEG_INSTANTIATE_OPS(S)                                                              \
    template TensorT<S> conv2d<S>(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&,    \
                                  int, int);                                                  \
    template TensorT<S> batch_norm2d<S>(const TensorT<S>&, const TensorT<S>&,                 \
                                        const TensorT<S>&, TensorT<S>&, TensorT<S>&, bool,    \
                                        bool, double, double);                                \
    template TensorT<S> max_pool2d<S>(const TensorT<S>&, int, int, int);                      \
    template TensorT<S> avg_pool2d<S>(const TensorT<S>&, int, int, int);                      \
    template TensorT<S> bilinear_resize<S>(const TensorT<S>&, int, int);                      \
    template TensorT<S> sigmoid<S>(const TensorT<S>&);                                        \
    template TensorT<S> relu<S>(const TensorT<S>&);                                           \
    template TensorT<S> gelu<S>(const TensorT<S>&);                                           \
    template TensorT<S> softmax_channels<S>(const TensorT<S>&);                               \
    template TensorT<S> softmax_lastdim<S>(const TensorT<S>&);                                \
    template TensorT<S> add<S>(const TensorT<S>&, const TensorT<S>&);                         \
    template TensorT<S> sub<S>(const TensorT<S>&, const TensorT<S>&);                         \
    template TensorT<S> mul<S>(const TensorT<S>&, const TensorT<S>&);                         \
    template TensorT<S> divide<S>(const TensorT<S>&, const TensorT<S>&);                      \
    template TensorT<S> scalar_mul<S>(const TensorT<S>&, double);                             \
    template TensorT<S> add_scalar<S>(const TensorT<S>&, double);                             \
    template TensorT<S> sub_from_scalar<S>(double, const TensorT<S>&);                        \
    template TensorT<S> pow_scalar<S>(const TensorT<S>&, double);                             \
    template TensorT<S> log<S>(const TensorT<S>&);                                            \
    template TensorT<S> concat_channels<S>(const std::vector<TensorT<S>>&);                   \
    template TensorT<S> slice_channels<S>(const TensorT<S>&, int, int);                       \
    template TensorT<S> linear<S>(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&);   \
    template TensorT<S> matmul<S>(const TensorT<S>&, const TensorT<S>&);                      \
    template TensorT<S> transpose_last2<S>(const TensorT<S>&);                                \
    template TensorT<S> im2tokens<S>(const TensorT<S>&);                                      \
    template TensorT<S> tokens2im<S>(const TensorT<S>&, int, int);                            \
    template TensorT<S> split_heads<S>(const TensorT<S>&, int);                               \
    template TensorT<S> merge_heads<S>(const TensorT<S>&);                                    \
    template TensorT<S> sum_all<S>(const TensorT<S>&);                                        \
    template TensorT<S> pick<S>(const TensorT<S>&, int64_t);                                  \
    template TensorT<S> cross_entropy_channels<S>(const TensorT<S>&, const std::vector<int>&);

RASEG_INSTANTIATE_OPS(float)
RASEG_INSTANTIATE_OPS(double)

}  // namespace raseg
