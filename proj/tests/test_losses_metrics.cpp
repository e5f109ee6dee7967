#include <doctest.h>

#include "core/gradcheck.hpp"
#include "core/losses.hpp"
#include "core/metrics.hpp"
#include "test_util.hpp"

using namespace raseg;
using testutil::rand_tensor;

namespace {

TensorD random_binary_mask(Shape s, Rng& rng, double p = 0.4) {
    TensorD gt = TensorD::zeros(s);
    for (auto& v : gt.values()) v = rng.bernoulli(p) ? 1.0 : 0.0;
    return gt;
}

double independent_bce(const TensorD& logits, const TensorD& gt, double eps) {
    double total = 0;
    for (size_t i = 0; i < logits.values().size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-logits.values()[i]));
        const double g = gt.values()[i];
        total -= g * std::log(p + eps) + (1.0 - g) * std::log(1.0 - p + eps);
    }
    return total / double(logits.numel());
}

}  // namespace

TEST_CASE("hard pixel weights") {
    LossConfig cfg;

    // constant masks have no boundary: interior weights are exactly 1
    for (const double fill : {0.0, 1.0}) {
        TensorD gt = TensorD::full({1, 1, 9, 9}, fill);
        TensorD w = hard_pixel_weights(gt, 3, 5.0);
        for (int y = 1; y < 8; ++y)
            for (int x = 1; x < 8; ++x) CHECK(w.at(0, 0, y, x) == doctest::Approx(1.0));
    }

    // isolated foreground pixel, kernel 3: w = 1 + 5 * (1 - 1/9)
    TensorD gt = TensorD::zeros({1, 1, 7, 7});
    gt.at(0, 0, 3, 3) = 1.0;
    TensorD w = hard_pixel_weights(gt, 3, 5.0);
    CHECK(w.at(0, 0, 3, 3) == doctest::Approx(1.0 + 5.0 * (1.0 - 1.0 / 9.0)).epsilon(1e-6));
    CHECK(w.at(0, 0, 3, 3) == doctest::Approx(5.4444).epsilon(1e-3));

    // bound check on random masks
    Rng rng(1);
    TensorD rnd = random_binary_mask({2, 1, 8, 8}, rng);
    TensorD wr = hard_pixel_weights(rnd, 31, 5.0);
    for (const double v : wr.values()) {
        CHECK(v >= 1.0);
        CHECK(v <= 6.0);
    }

    TensorD bad = TensorD::full({1, 1, 2, 2}, 0.5);
    CHECK_THROWS_AS(hard_pixel_weights(bad, 3, 5.0), std::invalid_argument);
}

TEST_CASE("weighted focal loss values and degenerations") {
    LossConfig cfg;
    Rng rng(2);

    // perfect confident prediction drives the loss to zero
    TensorD gt = random_binary_mask({1, 1, 4, 4}, rng);
    TensorD confident = TensorD::zeros({1, 1, 4, 4});
    for (size_t i = 0; i < confident.values().size(); ++i)
        confident.values()[i] = gt.values()[i] == 1.0 ? 30.0 : -30.0;
    TensorD ones = TensorD::full({1, 1, 4, 4}, 1.0);
    CHECK(weighted_focal_loss(confident, gt, ones, cfg).item() < 1e-6);

    // gamma=0, alpha=0.5, w=1 degenerates to half the BCE
    LossConfig degen = cfg;
    degen.gamma = 0.0;
    degen.alpha = 0.5;
    TensorD logits = rand_tensor<double>({1, 1, 4, 4}, rng, 2.0);
    const double focal = weighted_focal_loss(logits, gt, ones, degen).item();
    CHECK(focal == doctest::Approx(0.5 * independent_bce(logits, gt, degen.eps)).epsilon(1e-6));

    // single pixel frozen value: 0.25 * 0.25 * (-ln 0.5)
    LossConfig single = cfg;  // gamma 2, alpha 0.25
    TensorD one_logit = TensorD::zeros({1, 1, 1, 1});
    TensorD one_gt = TensorD::full({1, 1, 1, 1}, 1.0);
    TensorD one_w = TensorD::full({1, 1, 1, 1}, 1.0);
    CHECK(weighted_focal_loss(one_logit, one_gt, one_w, single).item() ==
          doctest::Approx(0.04332).epsilon(1e-3));

    CHECK_THROWS_AS(weighted_focal_loss(logits, TensorD::zeros({1, 1, 2, 2}), ones, cfg),
                    std::invalid_argument);
}

TEST_CASE("weighted IoU loss values") {
    Rng rng(3);
    TensorD gt = random_binary_mask({1, 1, 4, 4}, rng);
    TensorD ones = TensorD::full({1, 1, 4, 4}, 1.0);

    TensorD confident = TensorD::zeros({1, 1, 4, 4});
    for (size_t i = 0; i < confident.values().size(); ++i)
        confident.values()[i] = gt.values()[i] == 1.0 ? 40.0 : -40.0;
    CHECK(std::abs(weighted_iou_loss(confident, gt, ones, 1e-6).item()) < 1e-5);

    TensorD all_off = TensorD::full({1, 1, 4, 4}, -40.0);
    CHECK(weighted_iou_loss(all_off, gt, ones, 1e-6).item() == doctest::Approx(1.0).epsilon(1e-6));

    // two-pixel toy: p = 0.5 everywhere, half the pixels foreground
    TensorD toy_logits = TensorD::zeros({1, 1, 1, 2});
    TensorD toy_gt = TensorD::from_values({1, 1, 1, 2}, {1.0, 0.0});
    TensorD toy_w = TensorD::full({1, 1, 1, 2}, 1.0);
    CHECK(weighted_iou_loss(toy_logits, toy_gt, toy_w, 1e-6).item() ==
          doctest::Approx(1.0 - 0.5 / 1.5).epsilon(1e-6));
}

TEST_CASE("weight-map scaling leaves both weighted losses unchanged") {
    Rng rng(4);
    LossConfig cfg;
    cfg.weight_kernel = 3;
    TensorD gt = random_binary_mask({1, 1, 6, 6}, rng);
    TensorD logits = rand_tensor<double>({1, 1, 6, 6}, rng, 2.0);
    TensorD w = hard_pixel_weights(gt, 3, 5.0);
    TensorD w3 = TensorD::zeros(w.shape());
    for (size_t i = 0; i < w.values().size(); ++i) w3.values()[i] = 3.0 * w.values()[i];

    CHECK(weighted_focal_loss(logits, gt, w, cfg).item() ==
          doctest::Approx(weighted_focal_loss(logits, gt, w3, cfg).item()).epsilon(1e-12));
    CHECK(weighted_iou_loss(logits, gt, w, 1e-6).item() ==
          doctest::Approx(weighted_iou_loss(logits, gt, w3, 1e-6).item()).epsilon(1e-9));
}

TEST_CASE("categorical cross entropy") {
    // confident one-hot logits: loss goes to zero
    TensorD logits = TensorD::zeros({1, 3, 2, 2});
    std::vector<int> labels{0, 1, 2, 1};
    for (int p = 0; p < 4; ++p)
        for (int c = 0; c < 3; ++c)
            logits.values()[size_t(c * 4 + p)] = c == labels[size_t(p)] ? 40.0 : -40.0;
    CHECK(categorical_ce(logits, labels).item() < 1e-6);

    // uniform logits: ln(n)
    TensorD uniform = TensorD::zeros({1, 3, 2, 2});
    CHECK(categorical_ce(uniform, labels).item() == doctest::Approx(std::log(3.0)).epsilon(1e-9));

    // random case against a per-pixel scalar oracle
    Rng rng(5);
    TensorD rnd = rand_tensor<double>({2, 3, 4, 4}, rng, 2.0);
    std::vector<int> rlabels;
    Rng lr(6);
    for (int i = 0; i < 32; ++i) rlabels.push_back(lr.uniform_int(0, 2));
    double expect = 0;
    for (int n = 0; n < 2; ++n)
        for (int p = 0; p < 16; ++p) {
            std::vector<double> row(3);
            for (int c = 0; c < 3; ++c) row[size_t(c)] = rnd.values()[size_t((n * 3 + c) * 16 + p)];
            const auto sm = oracle::softmax(row);
            expect -= std::log(sm[size_t(rlabels[size_t(n * 16 + p)])]);
        }
    expect /= 32.0;
    CHECK(categorical_ce(rnd, rlabels).item() == doctest::Approx(expect).epsilon(1e-9));

    std::vector<int> bad{0, 1, 3, 1};
    CHECK_THROWS_AS(categorical_ce(logits, bad), std::invalid_argument);
}

TEST_CASE("deep supervision sums every tapped output") {
    Rng rng(7);
    LossConfig cfg;
    cfg.weight_kernel = 3;
    TensorD gt = random_binary_mask({1, 1, 8, 8}, rng);
    TensorD logit = rand_tensor<double>({1, 1, 8, 8}, rng);

    DecoderOutputs<double> outputs;
    for (int i = 0; i < 5; ++i) outputs.supervision.push_back(logit);
    outputs.final_logits = logit;

    TensorD w = hard_pixel_weights(gt, cfg.weight_kernel, cfg.weight_scale);
    const double single = add(weighted_focal_loss(logit, gt, w, cfg),
                              weighted_iou_loss(logit, gt, w, cfg.eps))
                              .item();
    CHECK(deep_supervision_loss(outputs, gt, cfg).item() ==
          doctest::Approx(6.0 * single).epsilon(1e-9));

    DecoderOutputs<double> empty;
    CHECK_THROWS_AS(deep_supervision_loss(empty, gt, cfg), std::invalid_argument);

    // mixed-resolution taps are upsampled to the gt size before the sum
    DecoderOutputs<double> mixed;
    mixed.supervision.push_back(rand_tensor<double>({1, 1, 2, 2}, rng));
    mixed.supervision.push_back(rand_tensor<double>({1, 1, 4, 4}, rng));
    mixed.final_logits = rand_tensor<double>({1, 1, 8, 8}, rng);
    double manual = 0;
    for (const auto& t : mixed.supervision) {
        TensorD up = bilinear_resize(t, 8, 8);
        manual += add(weighted_focal_loss(up, gt, w, cfg),
                      weighted_iou_loss(up, gt, w, cfg.eps))
                      .item();
    }
    manual += add(weighted_focal_loss(mixed.final_logits, gt, w, cfg),
                  weighted_iou_loss(mixed.final_logits, gt, w, cfg.eps))
                  .item();
    CHECK(deep_supervision_loss(mixed, gt, cfg).item() == doctest::Approx(manual).epsilon(1e-9));
}

TEST_CASE("losses are non-negative and pass gradient checks") {
    Rng rng(8);
    LossConfig cfg;
    cfg.weight_kernel = 3;
    for (int trial = 0; trial < 10; ++trial) {
        TensorD gt = random_binary_mask({1, 1, 5, 5}, rng);
        TensorD logits = rand_tensor<double>({1, 1, 5, 5}, rng, 3.0);
        TensorD w = hard_pixel_weights(gt, 3, 5.0);
        CHECK(weighted_focal_loss(logits, gt, w, cfg).item() >= 0.0);
        CHECK(weighted_iou_loss(logits, gt, w, 1e-6).item() >= 0.0);
    }
    for (const auto& suite : run_gradcheck_suites("losses")) {
        INFO(suite.name, " worst: ", suite.report.worst);
        CHECK(suite.report.ok());
    }
}

// ---------------------------------------------------------------------------
// metrics

namespace {

BinaryMetrics pixel_count_oracle(const std::vector<uint8_t>& pred,
                                 const std::vector<uint8_t>& gt) {
    uint64_t tp = 0, fp = 0, fn = 0, gt_on = 0, pred_on = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
        gt_on += gt[i] != 0;
        pred_on += pred[i] != 0;
        tp += (pred[i] != 0) && (gt[i] != 0);
        fp += (pred[i] != 0) && (gt[i] == 0);
        fn += (pred[i] == 0) && (gt[i] != 0);
    }
    if (gt_on == 0 && pred_on == 0) return {1, 1, 1, 1};
    if (gt_on == 0) return {0, 0, 0, 1};
    BinaryMetrics m;
    m.dice = (2 * tp + fp + fn) ? 2.0 * tp / double(2 * tp + fp + fn) : 0.0;
    m.iou = (tp + fp + fn) ? tp / double(tp + fp + fn) : 0.0;
    m.precision = (tp + fp) ? tp / double(tp + fp) : 0.0;
    m.recall = (tp + fn) ? tp / double(tp + fn) : 0.0;
    return m;
}

}  // namespace

TEST_CASE("segmentation metric basics") {
    std::vector<uint8_t> gt{1, 1, 0, 0};
    CHECK(segmentation_metrics(gt, gt).dice == 1.0);
    CHECK(segmentation_metrics(gt, gt).iou == 1.0);

    std::vector<uint8_t> disjoint{0, 0, 1, 1};
    const auto d = segmentation_metrics(disjoint, gt);
    CHECK(d.dice == 0.0);
    CHECK(d.iou == 0.0);
    CHECK(d.precision == 0.0);
    CHECK(d.recall == 0.0);

    // TP=4, FP=2, FN=2 on a 4x4 toy
    std::vector<uint8_t> gt2(16, 0), pred2(16, 0);
    for (int i = 0; i < 6; ++i) gt2[size_t(i)] = 1;       // gt: 0..5
    for (int i = 2; i < 8; ++i) pred2[size_t(i)] = 1;     // pred: 2..7
    const auto m = segmentation_metrics(pred2, gt2);
    CHECK(m.dice == doctest::Approx(0.6667).epsilon(1e-3));
    CHECK(m.iou == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(m.precision == doctest::Approx(0.6667).epsilon(1e-3));
    CHECK(m.recall == doctest::Approx(0.6667).epsilon(1e-3));
}

TEST_CASE("empty-mask conventions are pinned") {
    std::vector<uint8_t> empty(9, 0), some(9, 0);
    some[4] = 1;
    const auto both = segmentation_metrics(empty, empty);
    CHECK(both.dice == 1.0);
    CHECK(both.iou == 1.0);
    CHECK(both.precision == 1.0);
    CHECK(both.recall == 1.0);

    const auto spurious = segmentation_metrics(some, empty);
    CHECK(spurious.dice == 0.0);
    CHECK(spurious.iou == 0.0);
    CHECK(spurious.precision == 0.0);
    CHECK(spurious.recall == 1.0);
}

TEST_CASE("metrics match the independent pixel-count oracle on 200 random masks") {
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<uint8_t> pred(64), gt(64);
        for (int i = 0; i < 64; ++i) {
            pred[size_t(i)] = rng.bernoulli(0.35);
            gt[size_t(i)] = rng.bernoulli(0.35);
        }
        const auto got = segmentation_metrics(pred, gt);
        const auto want = pixel_count_oracle(pred, gt);
        CHECK(got.dice == want.dice);
        CHECK(got.iou == want.iou);
        CHECK(got.precision == want.precision);
        CHECK(got.recall == want.recall);
    }
}

TEST_CASE("micro aggregation differs from per-image averaging") {
    // image 1: tiny object, perfectly predicted; image 2: large object, missed
    std::vector<uint8_t> gt1(64, 0), pred1(64, 0);
    gt1[0] = pred1[0] = 1;
    std::vector<uint8_t> gt2(64, 0), pred2(64, 0);
    for (int i = 0; i < 40; ++i) gt2[size_t(i)] = 1;

    const double macro =
        (segmentation_metrics(pred1, gt1).dice + segmentation_metrics(pred2, gt2).dice) / 2.0;
    CHECK(macro == doctest::Approx(0.5));

    MicroClassAccumulator micro({1});
    micro.add(pred1, gt1);
    micro.add(pred2, gt2);
    const auto rs = micro.results();
    // micro dice = 2*1 / (2*1 + 0 + 40)
    CHECK(rs[0].dice == doctest::Approx(2.0 / 42.0).epsilon(1e-9));
    CHECK(rs[0].dice != doctest::Approx(macro).epsilon(1e-6));
}

TEST_CASE("micro per-class metrics and the generic union") {
    // two classes; class 2 predicted poorly, class 1 perfectly
    std::vector<uint8_t> gt(16, 0), pred(16, 0);
    gt[0] = gt[1] = 1;
    pred[0] = pred[1] = 1;          // class 1 perfect
    gt[8] = gt[9] = gt[10] = 2;     // class 2: one hit, two misses
    pred[8] = 2;
    pred[12] = 2;                   // and one false positive

    MicroClassAccumulator acc({1, 2});
    acc.add(pred, gt);
    const auto rs = acc.results();
    REQUIRE(rs.size() == 3);
    CHECK(rs[0].cls == 1);
    CHECK(rs[0].dice == doctest::Approx(1.0));
    CHECK(rs[1].cls == 2);
    CHECK(rs[1].dice == doctest::Approx(2.0 * 1 / (2.0 * 1 + 1 + 2)).epsilon(1e-9));
    // generic union: TP=3 (pixels 0,1,8), FP=1 (12), FN=2 (9,10)
    CHECK(rs[2].cls == 0);
    CHECK(rs[2].dice == doctest::Approx(6.0 / 9.0).epsilon(1e-9));
    CHECK(rs[2].dice >= std::min(rs[0].dice, rs[1].dice));

    std::vector<uint8_t> bad(16, 7);
    MicroClassAccumulator acc2({1, 2});
    CHECK_THROWS_AS(acc2.add(bad, gt), std::invalid_argument);

    // perfect single image: everything 1
    MicroClassAccumulator acc3({1, 2});
    acc3.add(gt, gt);
    for (const auto& r : acc3.results()) {
        CHECK(r.dice == 1.0);
        CHECK(r.iou == 1.0);
    }
}

TEST_CASE("metrics report serializes aggregates, rows and complexity") {
    MetricsReport report;
    report.per_image.push_back({"00000", {1.0, 1.0, 1.0, 1.0}, -1});
    report.per_image.push_back({"00001", {0.5, 0.4, 0.6, 0.7}, -1});
    report.param_count = 1234;
    report.flop_count = 99;
    report.flop_note = "note";
    report.finalize_aggregates();
    CHECK(report.mean_dice == doctest::Approx(0.75));

    const std::string json = report.to_json();
    CHECK(json.find("\"mDice\"") != std::string::npos);
    CHECK(json.find("00001") != std::string::npos);
    const std::string csv = report.to_csv();
    CHECK(csv.rfind("image_id,dice,iou,precision,recall", 0) == 0);
    CHECK(csv.find("00000") != std::string::npos);
}
