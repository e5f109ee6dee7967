#include <doctest.h>

#include "core/decoder.hpp"
#include "core/gradcheck.hpp"
#include "test_util.hpp"

using namespace raseg;
using testutil::max_abs_diff;
using testutil::rand_tensor;
using testutil::to_doubles;

namespace {

DecoderConfig tiny_dec(int channels = 8, int repeats = 1) {
    DecoderConfig cfg;
    cfg.channels = channels;
    cfg.repeats = repeats;
    return cfg;
}

template <class S>
Pyramid<S> random_pyramid(int channels, int finest, Rng& rng, int batch = 1) {
    Pyramid<S> pyr;
    int hw = finest;
    for (int level = 3; level <= 7; ++level) {
        pyr.level(level) = rand_tensor<S>({batch, channels, hw, hw}, rng, 0.5);
        hw = (hw + 1) / 2;
    }
    return pyr;
}

}  // namespace

TEST_CASE("fast normalized fusion arithmetic") {
    Rng rng(1);
    TensorD a = rand_tensor<double>({1, 2, 3, 3}, rng);
    TensorD b = rand_tensor<double>({1, 2, 3, 3}, rng);

    FastFusion<double> fuse(2, 1e-4);
    TensorD y = fuse.forward({a, b});
    const double coef = 1.0 / (2.0 + 1e-4);
    CHECK(coef == doctest::Approx(0.49997).epsilon(1e-4));
    for (int i = 0; i < 18; ++i)
        CHECK(y.values()[size_t(i)] ==
              doctest::Approx(coef * (a.values()[size_t(i)] + b.values()[size_t(i)]))
                  .epsilon(1e-9));

    fuse.w.values() = {1.0, 0.0};
    TensorD y2 = fuse.forward({a, b});
    const auto coefs = fuse.coefficients();
    CHECK(coefs[1] == 0.0);  // relu clamp, exactly zero
    for (int i = 0; i < 18; ++i)
        CHECK(y2.values()[size_t(i)] ==
              doctest::Approx(a.values()[size_t(i)] / (1.0 + 1e-4)).epsilon(1e-9));

    fuse.w.values() = {-5.0, -5.0};
    TensorD y3 = fuse.forward({a, b});
    for (const double v : y3.values()) CHECK(v == 0.0);

    CHECK_THROWS_AS(fuse.forward({a}), std::invalid_argument);
    CHECK_THROWS_AS(fuse.forward({a, rand_tensor<double>({1, 2, 2, 2}, rng)}),
                    std::invalid_argument);
}

TEST_CASE("bottleneck parameter accounting at the published width") {
    Rng rng(2);
    BottleneckConv<float> bn(224, 224, rng);
    CHECK(bn.conv_param_count() == 163520ull);
    CHECK(bn.reduce.conv.param_count() == 25200ull);
    CHECK(bn.mid.conv.param_count() == 113008ull);
    CHECK(bn.expand.conv.param_count() == 25312ull);

    Conv2dLayer<float> plain(224, 224, 3, 1, 1, rng);
    CHECK(plain.param_count() == 451808ull);
    CHECK(double(bn.conv_param_count()) / double(plain.param_count()) ==
          doctest::Approx(0.362).epsilon(2e-3));

    CHECK_THROWS_AS(BottleneckConv<float>(7, 7, rng), std::invalid_argument);  // odd width
}

TEST_CASE("bottleneck keeps the spatial size and stays finite on zero input") {
    Rng rng(3);
    BottleneckConv<double> bn(8, 8, rng);
    TensorD x = rand_tensor<double>({1, 8, 8, 8}, rng);
    CHECK(bn.forward(x, RunMode::grad_check()).shape() == Shape{1, 8, 8, 8});

    TensorD zero = TensorD::zeros({1, 8, 4, 4});
    TensorD y = bn.forward(zero, RunMode::grad_check());
    for (const double v : y.values()) CHECK(std::isfinite(v));
}

TEST_CASE("binary reverse gate saturates at forced logits") {
    TensorD x = TensorD::full({1, 4, 3, 3}, 1.0);
    TensorD hot = TensorD::full({1, 1, 3, 3}, 20.0);
    TensorD suppressed = ra_reverse_gate(x, hot);
    for (const double v : suppressed.values()) CHECK(std::abs(v) <= 2.1e-9);

    TensorD cold = TensorD::full({1, 1, 3, 3}, -20.0);
    TensorD passed = ra_reverse_gate(x, cold);
    for (const double v : passed.values()) CHECK(std::abs(v - 1.0) <= 2.1e-9);
}

TEST_CASE("binary reverse gate suppression is monotone in the logit") {
    Rng rng(4);
    TensorD x = rand_tensor<double>({1, 3, 2, 2}, rng);
    double prev_norm = -1.0;
    bool first = true;
    for (const double logit : {-6.0, -2.0, 0.0, 2.0, 6.0, 12.0}) {
        TensorD gated = ra_reverse_gate(x, TensorD::full({1, 1, 2, 2}, logit));
        double norm = 0;
        for (const double v : gated.values()) norm = std::max(norm, std::abs(v));
        if (!first) CHECK(norm < prev_norm);
        prev_norm = norm;
        first = false;
    }
}

TEST_CASE("binary RA module matches its composed pieces") {
    Rng rng(5);
    ReverseAttention<double> ra(8, RaVariant::Sigmoid, 1, true, rng);
    TensorD x = rand_tensor<double>({1, 8, 6, 6}, rng);

    auto [y, logit] = ra.forward(x, RunMode::eval());

    TensorD logit2 = ra.attn_conv.forward(x);
    TensorD gated = mul(x, sub_from_scalar(1.0, sigmoid(logit2)));
    TensorD y2 = ra.out.bottleneck->forward(gated, RunMode::eval());
    CHECK(max_abs_diff(y, to_doubles(y2)) < 1e-5);
    CHECK(max_abs_diff(logit, to_doubles(logit2)) == 0.0);
}

TEST_CASE("softmax reverse attention invariants") {
    Rng rng(6);
    const int n = 3, C = 32;
    TensorD x = rand_tensor<double>({1, C, 4, 4}, rng);
    TensorD logits = rand_tensor<double>({1, n, 4, 4}, rng, 2.0);
    TensorD attn = softmax_channels(logits);

    // per-pixel attention simplex and its reversed complement
    for (int p = 0; p < 16; ++p) {
        double sum = 0, rev_sum = 0;
        for (int k = 0; k < n; ++k) {
            const double a = attn.values()[size_t(k * 16 + p)];
            sum += a;
            rev_sum += 1.0 - a;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(rev_sum == doctest::Approx(double(n - 1)).epsilon(1e-6));
    }

    // concat of the reversed maps carries n*C channels
    std::vector<TensorD> reversed;
    for (int k = 0; k < n; ++k)
        reversed.push_back(mul(x, sub_from_scalar(1.0, slice_channels(attn, k, k + 1))));
    TensorD volume = concat_channels(reversed);
    CHECK(volume.shape().c == n * C);
    CHECK(volume.shape().c == 96);

    // saturated two-class logits: class-1 map vanishes, class-2 passes x
    TensorD sat = TensorD::zeros({1, 2, 1, 1});
    sat.values() = {20.0, -20.0};
    TensorD a2 = softmax_channels(sat);
    TensorD x1 = TensorD::full({1, 1, 1, 1}, 0.7);
    TensorD m1 = mul(x1, sub_from_scalar(1.0, slice_channels(a2, 0, 1)));
    TensorD m2 = mul(x1, sub_from_scalar(1.0, slice_channels(a2, 1, 2)));
    CHECK(std::abs(m1.values()[0]) < 1e-8);
    CHECK(m2.values()[0] == doctest::Approx(0.7).epsilon(1e-8));
}

TEST_CASE("softmax RA module shapes and rejection of n < 2") {
    Rng rng(7);
    ReverseAttention<double> ra(8, RaVariant::Softmax, 3, true, rng);
    TensorD x = rand_tensor<double>({2, 8, 5, 5}, rng);
    auto [y, logits] = ra.forward(x, RunMode::grad_check());
    CHECK(y.shape() == Shape{2, 8, 5, 5});
    CHECK(logits.shape() == Shape{2, 3, 5, 5});
    CHECK(ra.out.bottleneck->reduce.conv.in_ch == 24);  // n*C at the reduce conv

    CHECK_THROWS_AS(ReverseAttention<double>(8, RaVariant::Softmax, 1, true, rng),
                    std::invalid_argument);
}

TEST_CASE("refinement pass preserves level shapes and records logits") {
    Rng rng(8);
    DecoderConfig cfg = tiny_dec();
    RefinementPass<float> pass(cfg, rng);
    Pyramid<float> pyr = random_pyramid<float>(8, 16, rng);
    auto res = pass.forward(pyr, RunMode::grad_check());
    int hw = 16;
    for (int level = 3; level <= 7; ++level) {
        CHECK(res.levels.level(level).shape().h == hw);
        CHECK(res.levels.level(level).shape().c == 8);
        hw = (hw + 1) / 2;
    }
    for (int i = 0; i < 4; ++i) CHECK(res.logits[size_t(i)].defined());
}

TEST_CASE("refinement pass without RA contains no attention ops") {
    Rng rng(9);
    DecoderConfig cfg = tiny_dec();
    cfg.use_ra = false;
    RefinementPass<float> pass(cfg, rng);
    Pyramid<float> pyr = random_pyramid<float>(8, 16, rng);
    auto res = pass.forward(pyr, RunMode::grad_check());
    const auto hist = op_histogram(res.levels.level(3));
    CHECK(hist.count("sigmoid") == 0);
    CHECK(hist.count("softmax_channels") == 0);
    for (int i = 0; i < 4; ++i) CHECK(!res.logits[size_t(i)].defined());
}

TEST_CASE("refinement pass is deterministic under a fixed seed") {
    DecoderConfig cfg = tiny_dec();
    Rng rng_a(123), rng_b(123), rng_x(10);
    RefinementPass<float> a(cfg, rng_a), b(cfg, rng_b);
    Pyramid<float> pyr = random_pyramid<float>(8, 16, rng_x);
    auto ra = a.forward(pyr, RunMode::grad_check());
    auto rb = b.forward(pyr, RunMode::grad_check());
    for (int level = 3; level <= 7; ++level)
        CHECK(ra.levels.level(level).values() == rb.levels.level(level).values());
}

TEST_CASE("aggregation pass shapes and severed cross-level path") {
    Rng rng(11);
    DecoderConfig cfg = tiny_dec();
    AggregationPass<float> pass(cfg, rng);
    for (auto& fuse : pass.fuse) fuse.w.values() = {1.f, 0.f};

    Rng rng_x(12);
    Pyramid<float> pyr_a = random_pyramid<float>(8, 16, rng_x);
    Pyramid<float> pyr_b = pyr_a;
    pyr_b.level(3) = TensorF::full({1, 8, 16, 16}, 9.f);  // only the finest level differs

    auto va = pass.forward(pyr_a, RunMode::grad_check());
    auto vb = pass.forward(pyr_b, RunMode::grad_check());
    int hw = 16;
    for (int level = 3; level <= 7; ++level) {
        CHECK(va.level(level).shape() == Shape{1, 8, hw, hw});
        hw = (hw + 1) / 2;
    }
    // with the cross weight clamped to zero, levels above 3 cannot see level 3
    for (int level = 4; level <= 7; ++level)
        CHECK(va.level(level).values() == vb.level(level).values());
}

TEST_CASE("aggregation pass agrees with its manual composition") {
    Rng rng(13);
    DecoderConfig cfg = tiny_dec();
    AggregationPass<double> pass(cfg, rng);
    Pyramid<double> pyr = random_pyramid<double>(8, 8, rng);
    auto got = pass.forward(pyr, RunMode::eval());

    TensorD prev = pyr.level(3);
    for (int level = 4; level <= 7; ++level) {
        const size_t i = size_t(level - 4);
        TensorD fused = pass.fuse[i].forward({pyr.level(level), max_pool2d(prev, 3, 2, 1)});
        prev = pass.out[i].forward(fused, RunMode::eval());
        CHECK(max_abs_diff(got.level(level), to_doubles(prev)) < 1e-12);
    }
}

TEST_CASE("decoder forward produces the contracted outputs") {
    Rng rng(14);
    DecoderConfig cfg = tiny_dec(8, 4);
    Decoder<float> dec(cfg, rng);
    CHECK(dec.blocks.size() == 4);

    Pyramid<float> pyr = random_pyramid<float>(8, 16, rng, 2);
    auto out = dec.forward(pyr, 128, 128, RunMode::grad_check());
    CHECK(out.final_logits.shape() == Shape{2, 1, 128, 128});
    REQUIRE(out.supervision.size() == 5);
    // ordered coarse -> fine
    for (size_t i = 1; i < out.supervision.size(); ++i)
        CHECK(out.supervision[i].shape().h >= out.supervision[i - 1].shape().h);

    DecoderConfig mc = tiny_dec(8, 2);
    mc.n_classes = 3;
    mc.ra_variant = RaVariant::Softmax;
    Decoder<float> dec3(mc, rng);
    auto out3 = dec3.forward(pyr, 64, 64, RunMode::grad_check());
    CHECK(out3.final_logits.shape() == Shape{2, 3, 64, 64});
    for (const auto& s : out3.supervision) CHECK(s.shape().c == 3);
}

TEST_CASE("sigmoid RA with multiple classes predicts through per-level heads") {
    Rng rng(19);
    DecoderConfig cfg = tiny_dec(8, 1);
    cfg.n_classes = 3;
    cfg.ra_variant = RaVariant::Sigmoid;  // gating stays single-channel
    Decoder<float> dec(cfg, rng);
    CHECK(!dec.ra_logits_are_predictions());

    Pyramid<float> pyr = random_pyramid<float>(8, 16, rng);
    auto out = dec.forward(pyr, 128, 128, RunMode::grad_check());
    CHECK(out.final_logits.shape().c == 3);
    for (const auto& s : out.supervision) CHECK(s.shape().c == 3);
    // reverse attention is still present in the graph
    const auto hist = op_histogram(sum_all(out.final_logits));
    CHECK(hist.count("sigmoid") == 1);
}

TEST_CASE("decoder parameter count grows affinely in the repeat count") {
    auto params_for = [](int repeats) {
        Rng rng(15);
        DecoderConfig cfg = tiny_dec(16, repeats);
        Decoder<float> dec(cfg, rng);
        uint64_t total = 0;
        dec.visit("decoder", [&](const std::string&, TensorF& t, bool trainable) {
            if (trainable) total += uint64_t(t.numel());
        });
        return total;
    };
    const uint64_t p2 = params_for(2), p4 = params_for(4), p6 = params_for(6);
    CHECK(p4 > p2);
    CHECK(p6 - p4 == p4 - p2);  // second difference exactly zero
}

TEST_CASE("full ablation removes every attention op from the decoder graph") {
    Rng rng(16);
    DecoderConfig cfg = tiny_dec(8, 2);
    cfg.use_ra = false;
    cfg.use_bottleneck = false;
    Decoder<float> dec(cfg, rng);
    Pyramid<float> pyr = random_pyramid<float>(8, 16, rng);
    auto out = dec.forward(pyr, 128, 128, RunMode::grad_check());
    TensorF probe = sum_all(out.final_logits);
    for (const auto& s : out.supervision) probe = add(probe, sum_all(s));
    const auto hist = op_histogram(probe);
    CHECK(hist.count("sigmoid") == 0);
    CHECK(hist.count("softmax_channels") == 0);
    CHECK(hist.count("concat_channels") == 0);
}

TEST_CASE("decoder composite gradient checks pass") {
    for (const auto& suite : run_gradcheck_suites("decoder")) {
        INFO(suite.name, " worst: ", suite.report.worst);
        CHECK(suite.report.ok());
    }
}

TEST_CASE("fusion coefficients stay on the clamped simplex") {
    Rng rng(17);
    FastFusion<float> fuse(3, 1e-4);
    fuse.w.values() = {0.7f, -2.f, 1.9f};
    const auto coefs = fuse.coefficients();
    double total = 0;
    for (const double c : coefs) {
        CHECK(c >= 0.0);
        total += c;
    }
    CHECK(total < 1.0);
    CHECK(coefs[1] == 0.0);
}
