#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "core/errors.hpp"
#include "core/train.hpp"
#include "test_util.hpp"

using namespace raseg;
using testutil::rand_tensor;

namespace {

namespace fs = std::filesystem;

TrainConfig smoke_config() {
    TrainConfig cfg;
    cfg.model.encoder.stage_dims = {4, 8, 8, 16, 16};
    cfg.model.encoder.heads = {1, 1, 1};
    cfg.model.encoder.sr_ratios = {2, 1, 1};
    cfg.model.decoder.channels = 16;
    cfg.model.decoder.repeats = 1;
    cfg.model.encoder.decoder_width = 16;
    cfg.loss.weight_kernel = 15;
    cfg.data.size = 64;
    cfg.data.count = 4;
    cfg.data.seed = 3;
    cfg.scales = {64};
    cfg.batch_size = 4;
    cfg.epochs = 1000;  // bounded by max_steps
    cfg.max_steps = 50;
    cfg.lr = 2e-3;
    cfg.augment = false;
    cfg.seed = 0;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("adam leaves parameters alone under zero gradients") {
    Rng rng(1);
    TensorF p = rand_tensor<float>({1, 1, 2, 2}, rng, 1.0, true);
    const std::vector<float> before = p.values();
    Adam<float> adam({{"p", p, true}}, {});
    adam.step(1e-3);  // no grad populated => g = 0
    CHECK(p.values() == before);
}

TEST_CASE("adam first step has the bias-corrected magnitude") {
    TensorF p = TensorF::zeros({1, 1, 1, 1}, true);
    p.grad()[0] = 1.f;
    Adam<float> adam({{"p", p, true}}, {});
    adam.step(1e-2);
    // m_hat = 1, v_hat = 1 -> update = lr / (1 + eps)
    CHECK(p.values()[0] == doctest::Approx(-1e-2).epsilon(1e-6));
}

TEST_CASE("adam follows the hand-computed recurrence for two steps") {
    AdamConfig acfg;
    TensorD p = TensorD::full({1, 1, 1, 1}, 0.5, true);
    Adam<double> adam({{"p", p, true}}, acfg);

    double m = 0, v = 0, x = 0.5;
    const double lr = 3e-3;
    const double grads[2] = {0.7, -0.2};
    for (int t = 1; t <= 2; ++t) {
        p.zero_grad();
        p.grad()[0] = grads[t - 1];
        adam.step(lr);

        m = acfg.beta1 * m + (1 - acfg.beta1) * grads[t - 1];
        v = acfg.beta2 * v + (1 - acfg.beta2) * grads[t - 1] * grads[t - 1];
        const double m_hat = m / (1 - std::pow(acfg.beta1, t));
        const double v_hat = v / (1 - std::pow(acfg.beta2, t));
        x -= lr * m_hat / (std::sqrt(v_hat) + acfg.eps);
        CHECK(double(p.values()[0]) == doctest::Approx(x).epsilon(1e-10));
    }
}

TEST_CASE("cosine schedule endpoints and midpoint") {
    CHECK(cosine_lr(0, 100, 1e-4) == 1e-4);
    CHECK(cosine_lr(100, 100, 1e-4) == 0.0);
    CHECK(cosine_lr(50, 100, 1e-4) == doctest::Approx(5e-5).epsilon(1e-12));
    CHECK_THROWS_AS(cosine_lr(101, 100, 1e-4), std::invalid_argument);
}

TEST_CASE("fifty training steps cut the loss in half on a fixed batch") {
    TrainConfig cfg = smoke_config();
    cfg.data.size = 128;
    cfg.data.count = 1;
    cfg.data.seed = 6;
    cfg.scales = {128};
    cfg.batch_size = 1;
    cfg.lr = 3e-2;
    TrainResult result = train(cfg, "");
    REQUIRE(result.log.size() == 50);
    const double initial = result.log.front().loss;
    const double final = result.log.back().loss;
    MESSAGE("loss ", initial, " -> ", final);
    CHECK(final < 0.5 * initial);
}

TEST_CASE("training runs and logs are reproducible; scales stay configured") {
    TrainConfig cfg = smoke_config();
    cfg.max_steps = 6;
    cfg.scales = {32, 64};
    cfg.augment = true;

    const fs::path dir_a = fs::temp_directory_path() / "raseg_train_a";
    const fs::path dir_b = fs::temp_directory_path() / "raseg_train_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    TrainResult a = train(cfg, dir_a.string());
    TrainResult b = train(cfg, dir_b.string());

    CHECK(slurp(dir_a / "logs.csv") == slurp(dir_b / "logs.csv"));
    CHECK(slurp(dir_a / "last.ckpt") == slurp(dir_b / "last.ckpt"));

    for (const auto& row : a.log)
        CHECK((row.scale == 32 || row.scale == 64));

    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("checkpoint round trip preserves eval outputs bit-exactly") {
    TrainConfig cfg = smoke_config();
    cfg.max_steps = 5;
    const fs::path dir = fs::temp_directory_path() / "raseg_ckpt_test";
    fs::remove_all(dir);
    TrainResult result = train(cfg, dir.string());

    Model<float> reloaded(cfg.model, cfg.seed);
    const CheckpointMeta meta = load_checkpoint(result.checkpoint_path, reloaded, nullptr);
    CHECK(meta.epoch == result.epochs_run);
    CHECK(meta.config_hash == config_hash(cfg));

    Rng rng(5);
    TensorF x = rand_tensor<float>({1, 3, 64, 64}, rng);
    auto ya = result.model->forward(x, RunMode::eval());
    auto yb = reloaded.forward(x, RunMode::eval());
    CHECK(ya.final_logits.values() == yb.final_logits.values());

    // a flipped config byte must be rejected
    std::string bytes = slurp(result.checkpoint_path);
    bytes[20] ^= 0x5a;
    const fs::path tampered = dir / "tampered.ckpt";
    std::ofstream(tampered, std::ios::binary).write(bytes.data(), long(bytes.size()));
    Model<float> victim(cfg.model, cfg.seed);
    CHECK_THROWS(load_checkpoint(tampered.string(), victim, nullptr));

    fs::remove_all(dir);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
    TrainConfig cfg = smoke_config();
    cfg.lr = 1e30;  // blow the parameters up on the first update
    cfg.max_steps = 8;
    CHECK_THROWS_AS(train(cfg, ""), numeric_error);
}

TEST_CASE("evaluation of an untrained model produces a well-formed report") {
    TrainConfig cfg = smoke_config();
    Model<float> model(cfg.model, 1);
    Dataset ds = Dataset::synthesize(cfg.data);
    MetricsReport report = evaluate_model(model, ds);
    REQUIRE(report.per_image.size() == 4);
    for (const auto& row : report.per_image) {
        CHECK(row.m.dice >= 0.0);
        CHECK(row.m.dice <= 1.0);
    }
    CHECK(report.param_count > 0);
    CHECK(report.flop_count > 0);

    MetricsReport again = evaluate_model(model, ds);
    CHECK(report.to_json() == again.to_json());
    CHECK(report.to_csv() == again.to_csv());
}

TEST_CASE("evaluate_checkpoint writes reports and respects the embedded config") {
    TrainConfig cfg = smoke_config();
    cfg.max_steps = 3;
    const fs::path dir = fs::temp_directory_path() / "raseg_eval_test";
    fs::remove_all(dir);
    TrainResult result = train(cfg, dir.string());

    write_split_dir((dir / "data").string(), cfg.data, {0, 1}, "val");
    const fs::path report_path = dir / "report.json";
    MetricsReport report = evaluate_checkpoint(result.checkpoint_path,
                                               (dir / "data" / "val").string(),
                                               report_path.string());
    CHECK(fs::exists(report_path));
    CHECK(fs::exists(dir / "report.csv"));
    CHECK(report.per_image.size() == 2);

    // rerun: identical bytes
    const std::string first = slurp(report_path);
    evaluate_checkpoint(result.checkpoint_path, (dir / "data" / "val").string(),
                        report_path.string());
    CHECK(slurp(report_path) == first);

    fs::remove_all(dir);
}

TEST_CASE("complexity counter matches the layer-walk accounting") {
    TrainConfig cfg = smoke_config();
    Model<float> model(cfg.model, 0);
    const Complexity walked = model.complexity(64);
    CHECK(walked.params == model.param_count());

    const Complexity counted = count_params_flops(cfg.model, 64);
    CHECK(counted.params == walked.params);
    CHECK(counted.flops == walked.flops);
}

TEST_CASE("conv flops scale quadratically with the input side") {
    ModelConfig cfg;
    cfg.encoder.stage_dims = {4, 8, 8, 16, 16};
    cfg.encoder.attn_stages.clear();  // conv-only baseline
    cfg.encoder.heads.clear();
    cfg.encoder.sr_ratios.clear();
    cfg.encoder.decoder_width = 16;
    cfg.decoder.channels = 16;
    cfg.decoder.repeats = 1;
    const Complexity small = count_params_flops(cfg, 128);
    const Complexity big = count_params_flops(cfg, 256);
    CHECK(big.flops == 4 * small.flops);
    CHECK(big.params == small.params);
}

TEST_CASE("parameter growth is affine in the repeat count") {
    TrainConfig base = smoke_config();
    auto params_at = [&](int repeats) {
        ModelConfig cfg = base.model;
        cfg.decoder.repeats = repeats;
        return count_params_flops(cfg, 64).params;
    };
    const uint64_t p2 = params_at(2), p4 = params_at(4), p6 = params_at(6);
    CHECK(p6 - p4 == p4 - p2);
    CHECK((p4 - p2) % 2 == 0);
    // the per-block cost equals half the two-block delta
    const uint64_t per_block = (p4 - p2) / 2;
    CHECK(params_at(3) == p2 + per_block);
}
