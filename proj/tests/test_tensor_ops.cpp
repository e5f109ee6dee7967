#include <doctest.h>

#include "core/ops.hpp"
#include "test_util.hpp"

using namespace raseg;
using testutil::dims_of;
using testutil::max_abs_diff;
using testutil::rand_tensor;
using testutil::to_doubles;

TEST_CASE("tensor construction guards its invariants") {
    CHECK_THROWS_AS(TensorD::zeros({0, 1, 2, 2}), std::invalid_argument);
    CHECK_THROWS_AS(TensorD::from_values({1, 1, 2, 2}, {1.0, 2.0}), std::invalid_argument);
    TensorD t = TensorD::zeros({2, 3, 4, 5});
    CHECK(t.numel() == 120);
    CHECK(int64_t(t.values().size()) == t.numel());
}

TEST_CASE("conv2d scaling identity") {
    TensorD x = TensorD::full({1, 1, 3, 3}, 1.0);
    TensorD w = TensorD::full({1, 1, 1, 1}, 2.0);
    TensorD b = TensorD::zeros({1, 1, 1, 1});
    TensorD y = conv2d(x, w, b, 1, 0);
    CHECK(y.shape() == Shape{1, 1, 3, 3});
    for (const double v : y.values()) CHECK(v == doctest::Approx(2.0));
}

TEST_CASE("conv2d output shape arithmetic") {
    Rng rng(1);
    TensorD x = rand_tensor<double>({1, 1, 4, 4}, rng);
    TensorD w = rand_tensor<double>({1, 1, 3, 3}, rng);
    TensorD b = TensorD::zeros({1, 1, 1, 1});
    CHECK(conv2d(x, w, b, 2, 1).shape() == Shape{1, 1, 2, 2});
}

TEST_CASE("conv2d matches brute-force correlation oracle") {
    Rng rng(7);
    TensorD x = rand_tensor<double>({1, 2, 5, 5}, rng);
    TensorD w = rand_tensor<double>({3, 2, 3, 3}, rng);
    TensorD b = rand_tensor<double>({3, 1, 1, 1}, rng);
    for (const auto& [stride, pad] : std::vector<std::pair<int, int>>{{1, 0}, {1, 1}, {2, 1}}) {
        TensorD y = conv2d(x, w, b, stride, pad);
        const auto ref = oracle::conv2d(to_doubles(x), dims_of(x.shape()), to_doubles(w),
                                        dims_of(w.shape()), to_doubles(b), stride, pad);
        CHECK(max_abs_diff(y, ref) < 1e-6);
    }
}

TEST_CASE("conv2d rejects bad inputs") {
    Rng rng(2);
    TensorD x = rand_tensor<double>({1, 2, 4, 4}, rng);
    TensorD w = rand_tensor<double>({1, 3, 3, 3}, rng);
    TensorD b = TensorD::zeros({1, 1, 1, 1});
    CHECK_THROWS_AS(conv2d(x, w, b, 1, 0), std::invalid_argument);  // channel mismatch
    TensorD w2 = rand_tensor<double>({1, 2, 5, 5}, rng);
    CHECK_THROWS_AS(conv2d(x, w2, b, 1, 0), std::invalid_argument);  // non-positive output
}

TEST_CASE("batch_norm2d constant channel maps to zero in train mode") {
    TensorD x = TensorD::full({2, 1, 3, 3}, 4.2);
    TensorD gamma = TensorD::full({1, 1, 1, 1}, 1.0);
    TensorD beta = TensorD::zeros({1, 1, 1, 1});
    TensorD rm = TensorD::zeros({1, 1, 1, 1});
    TensorD rv = TensorD::full({1, 1, 1, 1}, 1.0);
    TensorD y = batch_norm2d(x, gamma, beta, rm, rv, true, true, 0.1, 1e-5);
    for (const double v : y.values()) CHECK(std::abs(v) < 1e-12);
    // running stats moved toward the batch moments
    CHECK(rm.values()[0] == doctest::Approx(0.42));
    CHECK(rv.values()[0] == doctest::Approx(0.9));
}

TEST_CASE("batch_norm2d gamma zero collapses onto beta") {
    Rng rng(3);
    TensorD x = rand_tensor<double>({1, 2, 3, 3}, rng);
    TensorD gamma = TensorD::zeros({1, 2, 1, 1});
    TensorD beta = TensorD::full({1, 2, 1, 1}, 5.0);
    TensorD rm = TensorD::zeros({1, 2, 1, 1});
    TensorD rv = TensorD::full({1, 2, 1, 1}, 1.0);
    TensorD y = batch_norm2d(x, gamma, beta, rm, rv, true, false, 0.1, 1e-5);
    for (const double v : y.values()) CHECK(v == doctest::Approx(5.0));
}

TEST_CASE("batch_norm2d normalizes batch moments") {
    Rng rng(4);
    TensorD x = rand_tensor<double>({4, 3, 2, 2}, rng, 2.0);
    TensorD gamma = TensorD::full({1, 3, 1, 1}, 1.0);
    TensorD beta = TensorD::zeros({1, 3, 1, 1});
    TensorD rm = TensorD::zeros({1, 3, 1, 1});
    TensorD rv = TensorD::full({1, 3, 1, 1}, 1.0);
    TensorD y = batch_norm2d(x, gamma, beta, rm, rv, true, false, 0.1, 1e-5);
    // recompute the moments directly per channel
    for (int c = 0; c < 3; ++c) {
        double sum = 0, sumsq = 0;
        int count = 0;
        for (int n = 0; n < 4; ++n)
            for (int p = 0; p < 4; ++p) {
                const double v = y.values()[size_t(((n * 3 + c) * 4) + p)];
                sum += v;
                sumsq += v * v;
                ++count;
            }
        const double mean = sum / count;
        const double var = sumsq / count - mean * mean;
        CHECK(std::abs(mean) < 1e-5);
        CHECK(std::abs(var - 1.0) < 1e-3);
    }
}

TEST_CASE("batch_norm2d rejects channel mismatch") {
    TensorD x = TensorD::zeros({1, 3, 2, 2});
    TensorD gamma = TensorD::full({1, 2, 1, 1}, 1.0);
    TensorD beta = TensorD::zeros({1, 2, 1, 1});
    TensorD rm = TensorD::zeros({1, 3, 1, 1});
    TensorD rv = TensorD::full({1, 3, 1, 1}, 1.0);
    CHECK_THROWS_AS(batch_norm2d(x, gamma, beta, rm, rv, true, false, 0.1, 1e-5),
                    std::invalid_argument);
}

TEST_CASE("max_pool2d basics") {
    TensorD x = TensorD::from_values({1, 1, 2, 2}, {1, 2, 3, 4});
    TensorD y = max_pool2d(x, 2, 2, 0);
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y.values()[0] == 4.0);

    TensorD one = TensorD::full({1, 1, 1, 1}, 7.0);
    TensorD p7 = max_pool2d(one, 3, 2, 1);  // degenerate P7 case, -inf padding
    CHECK(p7.shape() == Shape{1, 1, 1, 1});
    CHECK(p7.values()[0] == 7.0);

    CHECK_THROWS_AS(max_pool2d(one, 3, 2, 0), std::invalid_argument);
}

TEST_CASE("max_pool2d matches sliding-window oracle") {
    Rng rng(5);
    TensorD x = rand_tensor<double>({1, 2, 6, 6}, rng);
    TensorD y = max_pool2d(x, 3, 2, 1);
    const auto ref = oracle::max_pool2d(to_doubles(x), dims_of(x.shape()), 3, 2, 1);
    CHECK(max_abs_diff(y, ref) < 1e-12);
}

TEST_CASE("avg_pool2d basics") {
    TensorD ones = TensorD::full({1, 1, 4, 4}, 1.0);
    TensorD y = avg_pool2d(ones, 2, 2, 0);
    for (const double v : y.values()) CHECK(v == doctest::Approx(1.0));

    TensorD x = TensorD::from_values({1, 1, 2, 2}, {0, 2, 4, 6});
    CHECK(avg_pool2d(x, 2, 2, 0).values()[0] == doctest::Approx(3.0));
}

TEST_CASE("avg_pool2d matches direct summation oracle with wide kernel") {
    Rng rng(6);
    TensorD x = rand_tensor<double>({1, 1, 8, 8}, rng);
    TensorD y = avg_pool2d(x, 31, 1, 15);
    const auto ref = oracle::avg_pool2d(to_doubles(x), dims_of(x.shape()), 31, 1, 15);
    CHECK(y.shape() == Shape{1, 1, 8, 8});
    CHECK(max_abs_diff(y, ref) < 1e-5);
}

TEST_CASE("bilinear_resize identity and constants") {
    Rng rng(8);
    TensorD x = rand_tensor<double>({1, 2, 5, 7}, rng);
    TensorD same = bilinear_resize(x, 5, 7);
    CHECK(max_abs_diff(same, to_doubles(x)) == 0.0);  // bit-exact identity

    TensorD c = TensorD::full({1, 1, 3, 3}, 0.731);
    TensorD up = bilinear_resize(c, 9, 5);
    for (const double v : up.values()) CHECK(v == 0.731);
    TensorD back = bilinear_resize(up, 3, 3);
    for (const double v : back.values()) CHECK(v == 0.731);  // constant round-trip exact
}

TEST_CASE("bilinear_resize matches interpolation-matrix oracle") {
    Rng rng(9);
    TensorD x = rand_tensor<double>({1, 1, 2, 2}, rng);
    TensorD y = bilinear_resize(x, 4, 4);
    const auto ref = oracle::bilinear_resize(to_doubles(x), dims_of(x.shape()), 4, 4);
    CHECK(max_abs_diff(y, ref) < 1e-12);
}

TEST_CASE("activation values") {
    TensorD zero = TensorD::zeros({1, 1, 1, 1});
    CHECK(sigmoid(zero).values()[0] == doctest::Approx(0.5));

    TensorD single = TensorD::from_values({1, 1, 2, 2}, {3, -1, 0, 9});
    TensorD sm1 = softmax_channels(single);  // C=1 degenerate normalization
    for (const double v : sm1.values()) CHECK(v == doctest::Approx(1.0));

    TensorD trip = TensorD::from_values({1, 3, 1, 1}, {1, 2, 3});
    TensorD sm = softmax_channels(trip);
    CHECK(sm.values()[0] == doctest::Approx(0.09003).epsilon(1e-4));
    CHECK(sm.values()[1] == doctest::Approx(0.24473).epsilon(1e-4));
    CHECK(sm.values()[2] == doctest::Approx(0.66524).epsilon(1e-4));
}

TEST_CASE("softmax sums to one per pixel, sigmoid stays strictly inside (0,1)") {
    Rng rng(10);
    TensorD x = rand_tensor<double>({2, 5, 3, 3}, rng, 3.0);
    TensorD sm = softmax_channels(x);
    for (int n = 0; n < 2; ++n)
        for (int p = 0; p < 9; ++p) {
            double total = 0;
            for (int c = 0; c < 5; ++c) total += sm.values()[size_t((n * 5 + c) * 9 + p)];
            CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
        }
    TensorD sg = sigmoid(x);
    for (const double v : sg.values()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("elementwise ops and the reverse complement") {
    TensorD half = TensorD::full({1, 1, 1, 1}, 0.0);
    TensorD rev = sub_from_scalar(1.0, sigmoid(half));
    CHECK(rev.values()[0] == doctest::Approx(0.5));

    Rng rng(11);
    TensorD x = rand_tensor<double>({1, 4, 3, 3}, rng);
    TensorD zeros = TensorD::zeros({1, 1, 3, 3});
    TensorD gated = mul(x, zeros);  // broadcast single channel over C=4
    CHECK(gated.shape() == Shape{1, 4, 3, 3});
    for (const double v : gated.values()) CHECK(v == 0.0);

    CHECK_THROWS_AS(add(x, TensorD::zeros({1, 4, 2, 2})), std::invalid_argument);
}

TEST_CASE("concat_channels keeps ordered slices") {
    Rng rng(12);
    TensorD a = rand_tensor<double>({2, 3, 2, 2}, rng);
    TensorD b = rand_tensor<double>({2, 5, 2, 2}, rng);
    TensorD cat = concat_channels<double>({a, b});
    CHECK(cat.shape() == Shape{2, 8, 2, 2});
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 8; ++c)
            for (int p = 0; p < 4; ++p) {
                const double expect = c < 3 ? a.values()[size_t((n * 3 + c) * 4 + p)]
                                            : b.values()[size_t((n * 5 + c - 3) * 4 + p)];
                CHECK(cat.values()[size_t((n * 8 + c) * 4 + p)] == expect);
            }
    TensorD sl = slice_channels(cat, 3, 8);
    CHECK(max_abs_diff(sl, to_doubles(b)) == 0.0);
}

TEST_CASE("linear with identity weight is a passthrough") {
    TensorD x = TensorD::from_values({1, 1, 2, 3}, {1, 2, 3, 4, 5, 6});
    TensorD eye = TensorD::zeros({3, 3, 1, 1});
    for (int i = 0; i < 3; ++i) eye.values()[size_t(i * 3 + i)] = 1.0;
    TensorD b = TensorD::zeros({3, 1, 1, 1});
    TensorD y = linear(x, eye, b);
    CHECK(max_abs_diff(y, to_doubles(x)) == 0.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
    Rng rng(13);
    TensorD a = rand_tensor<double>({2, 1, 4, 3}, rng);
    TensorD b = rand_tensor<double>({1, 1, 3, 5}, rng);
    TensorD y = matmul(a, b);
    CHECK(y.shape() == Shape{2, 1, 4, 5});
    for (int n = 0; n < 2; ++n) {
        std::vector<double> an(a.values().begin() + n * 12, a.values().begin() + (n + 1) * 12);
        const auto ref = oracle::matmul(an, 4, 3, to_doubles(b), 5);
        for (int i = 0; i < 20; ++i)
            CHECK(y.values()[size_t(n * 20 + i)] == doctest::Approx(ref[size_t(i)]).epsilon(1e-9));
    }

    TensorD id3 = TensorD::zeros({1, 1, 3, 3});
    for (int i = 0; i < 3; ++i) id3.values()[size_t(i * 3 + i)] = 1.0;
    TensorD x = rand_tensor<double>({1, 1, 2, 3}, rng);
    CHECK(max_abs_diff(matmul(x, id3), to_doubles(x)) < 1e-15);
}

TEST_CASE("token reshapes invert each other") {
    Rng rng(14);
    TensorD x = rand_tensor<double>({2, 6, 3, 4}, rng);
    TensorD tok = im2tokens(x);
    CHECK(tok.shape() == Shape{2, 1, 12, 6});
    CHECK(max_abs_diff(tokens2im(tok, 3, 4), to_doubles(x)) == 0.0);
    TensorD heads = split_heads(tok, 3);
    CHECK(heads.shape() == Shape{2, 3, 12, 2});
    CHECK(max_abs_diff(merge_heads(heads), to_doubles(tok)) == 0.0);
}
