#include "core/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "core/decoder.hpp"
#include "core/encoder.hpp"
#include "core/losses.hpp"
#include "core/model.hpp"
#include "core/ops.hpp"
#include "core/rng.hpp"

namespace raseg {

void GradCheckReport::merge(const GradCheckReport& other) {
    checked += other.checked;
    failed += other.failed;
    if (other.max_rel_err > max_rel_err) {
        max_rel_err = other.max_rel_err;
        worst = other.worst;
    }
}

GradCheckReport grad_check(const std::function<TensorD()>& f, const std::vector<TensorD>& leaves,
                           double tol, int max_coords_per_leaf, uint64_t sample_seed) {
    GradCheckReport report;

    for (const TensorD& leaf : leaves) const_cast<TensorD&>(leaf).zero_grad();
    TensorD loss = f();
    backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (const TensorD& leaf : leaves)
        analytic.push_back(leaf.has_grad() ? leaf.grad() : std::vector<double>(size_t(leaf.numel()), 0.0));

    Rng rng(sample_seed);
    for (size_t li = 0; li < leaves.size(); ++li) {
        TensorD& leaf = const_cast<TensorD&>(leaves[li]);
        const int64_t n = leaf.numel();
        std::vector<int64_t> coords;
        if (max_coords_per_leaf > 0 && n > max_coords_per_leaf) {
            for (int i = 0; i < max_coords_per_leaf; ++i)
                coords.push_back(int64_t(rng.next_u64() % uint64_t(n)));
            std::sort(coords.begin(), coords.end());
            coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
        } else {
            coords.resize(size_t(n));
            for (int64_t i = 0; i < n; ++i) coords[size_t(i)] = i;
        }

        for (const int64_t i : coords) {
            const double x0 = leaf.values()[size_t(i)];
            const double h = 1e-4 * std::max(1.0, std::abs(x0));
            leaf.values()[size_t(i)] = x0 + h;
            const double lp = f().item();
            leaf.values()[size_t(i)] = x0 - h;
            const double lm = f().item();
            leaf.values()[size_t(i)] = x0;

            const double gn = (lp - lm) / (2.0 * h);
            const double ga = analytic[li][size_t(i)];
            const double rel = std::abs(ga - gn) / std::max(1.0, std::abs(ga) + std::abs(gn));
            ++report.checked;
            if (!(rel < tol)) {
                ++report.failed;
            }
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst = "leaf " + std::to_string(li) + " coord " + std::to_string(i) +
                               " analytic " + std::to_string(ga) + " numeric " + std::to_string(gn);
            }
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// suites

namespace {

TensorD rand_tensor(Shape s, Rng& rng, double scale = 1.0, bool requires_grad = true) {
    TensorD t = TensorD::zeros(s, requires_grad);
    for (auto& v : t.values()) v = rng.normal() * scale;
    return t;
}

// Projects a tensor-valued op onto a scalar through a fixed random
// cotangent, so every output element receives a distinct upstream gradient.
TensorD project(const TensorD& y, uint64_t seed) {
    Rng rng(seed);
    TensorD r = rand_tensor(y.shape(), rng, 1.0, false);
    return sum_all(mul(y, r));
}

constexpr double kPrimitiveTol = 1e-4;
constexpr double kCompositeTol = 1e-3;

GradCheckSuiteResult check_named(const std::string& name, double tol,
                                 const std::vector<TensorD>& leaves,
                                 const std::function<TensorD()>& f, int max_coords = 0) {
    return {name, tol, grad_check(f, leaves, tol, max_coords)};
}

void tensor_suite(std::vector<GradCheckSuiteResult>& out) {
    Rng rng(2024);

    {
        TensorD x = rand_tensor({1, 2, 5, 5}, rng);
        TensorD w = rand_tensor({3, 2, 3, 3}, rng, 0.5);
        TensorD b = rand_tensor({3, 1, 1, 1}, rng, 0.1);
        out.push_back(check_named("conv2d", kPrimitiveTol, {x, w, b},
                                  [=] { return project(conv2d(x, w, b, 1, 1), 11); }));
    }
    {
        TensorD x = rand_tensor({1, 2, 6, 6}, rng);
        TensorD w = rand_tensor({2, 2, 3, 3}, rng, 0.5);
        TensorD b = rand_tensor({2, 1, 1, 1}, rng, 0.1);
        out.push_back(check_named("conv2d_strided", kPrimitiveTol, {x, w, b},
                                  [=] { return project(conv2d(x, w, b, 2, 1), 12); }));
    }
    {
        TensorD x = rand_tensor({3, 4, 3, 3}, rng);
        TensorD gamma = rand_tensor({1, 4, 1, 1}, rng, 0.5);
        TensorD beta = rand_tensor({1, 4, 1, 1}, rng, 0.5);
        auto rm = TensorD::zeros({1, 4, 1, 1});
        auto rv = TensorD::full({1, 4, 1, 1}, 1.0);
        out.push_back(check_named(
            "batch_norm2d_train", kPrimitiveTol, {x, gamma, beta}, [=]() mutable {
                return project(batch_norm2d(x, gamma, beta, rm, rv, true, false, 0.1, 1e-5), 13);
            }));
        out.push_back(check_named(
            "batch_norm2d_eval", kPrimitiveTol, {x, gamma, beta}, [=]() mutable {
                return project(batch_norm2d(x, gamma, beta, rm, rv, false, false, 0.1, 1e-5), 14);
            }));
    }
    {
        TensorD x = rand_tensor({1, 2, 6, 6}, rng);
        out.push_back(check_named("max_pool2d", kPrimitiveTol, {x},
                                  [=] { return project(max_pool2d(x, 3, 2, 1), 15); }));
        out.push_back(check_named("avg_pool2d", kPrimitiveTol, {x},
                                  [=] { return project(avg_pool2d(x, 3, 2, 1), 16); }));
        out.push_back(check_named("bilinear_resize_up", kPrimitiveTol, {x},
                                  [=] { return project(bilinear_resize(x, 9, 11), 17); }));
        out.push_back(check_named("bilinear_resize_down", kPrimitiveTol, {x},
                                  [=] { return project(bilinear_resize(x, 3, 4), 18); }));
        out.push_back(check_named("sigmoid", kPrimitiveTol, {x},
                                  [=] { return project(sigmoid(x), 19); }));
        out.push_back(check_named("gelu", kPrimitiveTol, {x},
                                  [=] { return project(gelu(x), 20); }));
        out.push_back(check_named("softmax_channels", kPrimitiveTol, {x},
                                  [=] { return project(softmax_channels(x), 21); }));
        out.push_back(check_named("softmax_lastdim", kPrimitiveTol, {x},
                                  [=] { return project(softmax_lastdim(x), 22); }));
        out.push_back(check_named("scalar_ops", kPrimitiveTol, {x}, [=] {
            return project(sub_from_scalar(1.0, add_scalar(scalar_mul(x, 0.7), 0.3)), 23);
        }));
        out.push_back(check_named("log_pow", kPrimitiveTol, {x}, [=] {
            return project(log(add_scalar(pow_scalar(sigmoid(x), 1.7), 1e-3)), 24);
        }));
    }
    {
        // relu away from the kink (not differentiable at 0)
        TensorD x = rand_tensor({1, 2, 4, 4}, rng);
        for (auto& v : x.values()) v += (v >= 0 ? 0.05 : -0.05);
        out.push_back(
            check_named("relu", kPrimitiveTol, {x}, [=] { return project(relu(x), 25); }));
    }
    {
        TensorD a = rand_tensor({1, 3, 4, 4}, rng);
        TensorD b = rand_tensor({1, 3, 4, 4}, rng);
        TensorD one_ch = rand_tensor({1, 1, 4, 4}, rng);
        TensorD scal = rand_tensor({1, 1, 1, 1}, rng);
        out.push_back(check_named("add_sub_mul", kPrimitiveTol, {a, b}, [=] {
            return project(mul(add(a, b), sub(a, b)), 26);
        }));
        out.push_back(check_named("mul_channel_broadcast", kPrimitiveTol, {a, one_ch},
                                  [=] { return project(mul(a, one_ch), 27); }));
        out.push_back(check_named("divide_scalar_broadcast", kPrimitiveTol, {a, scal}, [=] {
            return project(divide(a, add_scalar(mul(scal, scal), 0.5)), 28);
        }));
    }
    {
        TensorD a = rand_tensor({1, 3, 4, 4}, rng);
        TensorD b = rand_tensor({1, 5, 4, 4}, rng);
        out.push_back(check_named("concat_slice", kPrimitiveTol, {a, b}, [=] {
            TensorD cat = concat_channels<double>({a, b});
            return project(slice_channels(cat, 2, 6), 29);
        }));
    }
    {
        TensorD x = rand_tensor({2, 1, 4, 3}, rng);
        TensorD w = rand_tensor({5, 3, 1, 1}, rng, 0.5);
        TensorD b = rand_tensor({5, 1, 1, 1}, rng, 0.1);
        out.push_back(check_named("linear", kPrimitiveTol, {x, w, b},
                                  [=] { return project(linear(x, w, b), 30); }));
    }
    {
        TensorD a = rand_tensor({2, 2, 3, 4}, rng);
        TensorD b = rand_tensor({2, 2, 4, 5}, rng);
        out.push_back(check_named("matmul", kPrimitiveTol, {a, b},
                                  [=] { return project(matmul(a, b), 31); }));
        TensorD shared = rand_tensor({1, 1, 4, 5}, rng);
        out.push_back(check_named("matmul_shared_rhs", kPrimitiveTol, {a, shared},
                                  [=] { return project(matmul(a, shared), 32); }));
    }
    {
        TensorD x = rand_tensor({2, 4, 3, 5}, rng);
        out.push_back(check_named("permutes", kPrimitiveTol, {x}, [=] {
            TensorD tok = im2tokens(x);                    // [2,1,15,4]
            TensorD heads = split_heads(tok, 2);           // [2,2,15,2]
            TensorD back = merge_heads(transpose_last2(transpose_last2(heads)));
            return project(tokens2im(back, 3, 5), 33);
        }));
    }
    {
        TensorD x = rand_tensor({1, 1, 2, 6}, rng);
        out.push_back(check_named("sum_pick", kPrimitiveTol, {x}, [=] {
            return add(sum_all(mul(x, x)), scalar_mul(pick(x, 3), 2.5));
        }));
    }
    {
        TensorD logits = rand_tensor({2, 3, 4, 4}, rng);
        std::vector<int> labels;
        Rng lr(7);
        for (int i = 0; i < 32; ++i) labels.push_back(lr.uniform_int(0, 2));
        out.push_back(check_named("cross_entropy_channels", kPrimitiveTol, {logits},
                                  [=] { return cross_entropy_channels(logits, labels); }));
    }
}

void encoder_suite(std::vector<GradCheckSuiteResult>& out) {
    Rng rng(77);
    {
        SelfAttention<double> attn(8, 2, 2, rng);
        TensorD x = rand_tensor({1, 8, 4, 4}, rng, 0.5);
        std::vector<TensorD> leaves{x};
        attn.visit("attn", [&](const std::string&, TensorD& t, bool trainable) {
            if (trainable) leaves.push_back(t);
        });
        out.push_back(check_named("self_attention", kCompositeTol, leaves,
                                  [&attn, x] { return project(attn.forward(x), 41); }, 40));
    }
    {
        Conv2dLayer<double> conv(3, 6, 3, 2, 1, rng);
        BatchNorm2dLayer<double> bn(6);
        TensorD x = rand_tensor({1, 3, 6, 6}, rng, 0.5);
        std::vector<TensorD> leaves{x, conv.w, conv.b, bn.gamma, bn.beta};
        out.push_back(check_named("patch_embed", kCompositeTol, leaves, [&, x]() mutable {
            return project(patch_embed(x, conv, bn, RunMode::grad_check()), 42);
        }));
    }
}

void decoder_suite(std::vector<GradCheckSuiteResult>& out) {
    {
        Rng rng(910);
        ReverseAttention<double> ra(8, RaVariant::Sigmoid, 1, true, rng);
        TensorD x = rand_tensor({1, 8, 6, 6}, rng, 0.5);
        std::vector<TensorD> leaves{x};
        ra.visit("ra", [&](const std::string&, TensorD& t, bool trainable) {
            if (trainable) leaves.push_back(t);
        });
        out.push_back(check_named("binary_ra_block", kCompositeTol, leaves, [&ra, x] {
            auto [y, logit] = ra.forward(x, RunMode::grad_check());
            return add(project(y, 51), project(logit, 52));
        }));
    }
    {
        Rng rng(911);
        ReverseAttention<double> ra(8, RaVariant::Softmax, 3, true, rng);
        TensorD x = rand_tensor({1, 8, 5, 5}, rng, 0.5);
        std::vector<TensorD> leaves{x};
        ra.visit("ra", [&](const std::string&, TensorD& t, bool trainable) {
            if (trainable) leaves.push_back(t);
        });
        out.push_back(check_named("softmax_ra_block", kCompositeTol, leaves, [&ra, x] {
            auto [y, logit] = ra.forward(x, RunMode::grad_check());
            return add(project(y, 53), project(logit, 54));
        }));
    }
    {
        // seed picked so no max-pool window in the aggregation passes sits
        // within the finite-difference step of a tie
        Rng rng(94);
        DecoderConfig cfg;
        cfg.channels = 8;
        cfg.repeats = 1;
        cfg.n_classes = 1;
        Decoder<double> dec(cfg, rng);
        Pyramid<double> pyr;
        int hw = 16;
        for (int level = 3; level <= 7; ++level) {
            pyr.level(level) = rand_tensor({1, 8, hw, hw}, rng, 0.5);
            hw = (hw + 1) / 2;
        }
        std::vector<TensorD> leaves;
        for (int level = 3; level <= 7; ++level) leaves.push_back(pyr.level(level));
        dec.visit("decoder", [&](const std::string&, TensorD& t, bool trainable) {
            if (trainable) leaves.push_back(t);
        });
        out.push_back(check_named(
            "tiny_decoder", kCompositeTol, leaves,
            [&dec, pyr] {
                auto outs = dec.forward(pyr, 128, 128, RunMode::grad_check());
                TensorD total = project(outs.final_logits, 55);
                for (size_t i = 0; i < outs.supervision.size(); ++i)
                    total = add(total, project(outs.supervision[i], 56 + uint64_t(i)));
                return total;
            },
            6));
    }
}

void losses_suite(std::vector<GradCheckSuiteResult>& out) {
    Rng rng(133);
    LossConfig cfg;
    cfg.weight_kernel = 3;
    TensorD logits = rand_tensor({1, 1, 4, 4}, rng);
    TensorD gt = TensorD::zeros({1, 1, 4, 4});
    Rng gtr(5);
    for (auto& v : gt.values()) v = gtr.bernoulli(0.4) ? 1.0 : 0.0;
    TensorD w = hard_pixel_weights(gt, cfg.weight_kernel, cfg.weight_scale);

    out.push_back(check_named("weighted_focal_loss", kPrimitiveTol, {logits},
                              [=] { return weighted_focal_loss(logits, gt, w, cfg); }));
    out.push_back(check_named("weighted_iou_loss", kPrimitiveTol, {logits},
                              [=] { return weighted_iou_loss(logits, gt, w, 1e-6); }));

    TensorD mc_logits = rand_tensor({1, 3, 4, 4}, rng);
    std::vector<int> labels;
    Rng lr(9);
    for (int i = 0; i < 16; ++i) labels.push_back(lr.uniform_int(0, 2));
    out.push_back(check_named("categorical_ce", kPrimitiveTol, {mc_logits},
                              [=] { return categorical_ce(mc_logits, labels); }));
}

}  // namespace

std::vector<GradCheckSuiteResult> run_gradcheck_suites(const std::string& module) {
    std::vector<GradCheckSuiteResult> out;
    const bool all = module.empty() || module == "all";
    if (all || module == "tensor") tensor_suite(out);
    if (all || module == "encoder") encoder_suite(out);
    if (all || module == "decoder") decoder_suite(out);
    if (all || module == "losses") losses_suite(out);
    detail::check(!out.empty(), "gradcheck: unknown module selector");
    return out;
}

}  // namespace raseg
