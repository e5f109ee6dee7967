// raseg command line: train / eval / stats / gen-data / gradcheck.
// Deliberately thin: everything goes through the C API in raseg.h.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "raseg.h"

namespace {

int fail(raseg_status status) {
    std::fprintf(stderr, "error (%s): %s\n", raseg_status_string(status), raseg_last_error());
    return 1;
}

struct ConfigGuard {
    raseg_config* cfg = nullptr;
    ~ConfigGuard() { raseg_config_free(cfg); }
};

int load_config(const std::string& config_path, const std::string& preset,
                const std::vector<std::string>& overrides, ConfigGuard& guard) {
    raseg_status st = !config_path.empty() ? raseg_config_load(config_path.c_str(), &guard.cfg)
                                           : raseg_config_preset(preset.c_str(), &guard.cfg);
    if (st != RASEG_OK) return fail(st);
    for (const std::string& kv : overrides) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
            return 1;
        }
        st = raseg_config_set(guard.cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
        if (st != RASEG_OK) return fail(st);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reverse-attention feature-pyramid segmentation"};
    app.require_subcommand(1);

    std::string config_path, preset = "tiny-binary", out_dir, ckpt, data_dir, report, spec_path;
    std::string module;
    std::vector<std::string> overrides;
    int input_size = 384;
    int seeds = 1;

    CLI::App* train_cmd = app.add_subcommand("train", "train a model");
    train_cmd->add_option("--config", config_path, "config JSON file");
    train_cmd->add_option("--preset", preset, "preset when no --config is given");
    train_cmd->add_option("--out", out_dir, "output directory")->required();
    train_cmd->add_option("--set", overrides, "dotted-key config override, key=value");
    train_cmd->add_option("--seeds", seeds, "repeat training over N consecutive seeds")
        ->check(CLI::PositiveNumber);

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--data", data_dir, "cached split directory")->required();
    eval_cmd->add_option("--report", report, "report JSON path")->required();

    CLI::App* stats_cmd = app.add_subcommand("stats", "parameter / flop accounting");
    stats_cmd->add_option("--config", config_path, "config JSON file");
    stats_cmd->add_option("--preset", preset, "preset when no --config is given");
    stats_cmd->add_option("--input-size", input_size, "square input size (multiple of 32)");
    stats_cmd->add_option("--set", overrides, "dotted-key config override, key=value");

    CLI::App* gen_cmd = app.add_subcommand("gen-data", "synthesize a dataset");
    gen_cmd->add_option("--spec", spec_path, "dataset spec JSON")->required();
    gen_cmd->add_option("--out", out_dir, "output directory")->required();

    CLI::App* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    grad_cmd->add_option("--module", module, "tensor | encoder | decoder | losses | all");

    CLI11_PARSE(app, argc, argv);

    if (train_cmd->parsed()) {
        for (int i = 0; i < seeds; ++i) {
            ConfigGuard guard;
            if (int rc = load_config(config_path, preset, overrides, guard)) return rc;
            std::string run_dir = out_dir;
            if (seeds > 1) {
                run_dir = out_dir + "/seed_" + std::to_string(i);
                char seed_val[32];
                raseg_status st = raseg_config_get(guard.cfg, "train.seed", seed_val,
                                                   sizeof(seed_val));
                if (st != RASEG_OK) return fail(st);
                const uint64_t base = std::stoull(seed_val);
                st = raseg_config_set(guard.cfg, "train.seed",
                                      std::to_string(base + uint64_t(i)).c_str());
                if (st != RASEG_OK) return fail(st);
            }
            char ckpt_buf[4096];
            const raseg_status st =
                raseg_train(guard.cfg, run_dir.c_str(), ckpt_buf, sizeof(ckpt_buf));
            if (st != RASEG_OK) return fail(st);
            std::printf("checkpoint: %s\n", ckpt_buf);
        }
        return 0;
    }

    if (eval_cmd->parsed()) {
        double mdice = 0;
        const raseg_status st =
            raseg_evaluate(ckpt.c_str(), data_dir.c_str(), report.c_str(), &mdice);
        if (st != RASEG_OK) return fail(st);
        std::printf("mDice: %.4f\nreport: %s\n", mdice, report.c_str());
        return 0;
    }

    if (stats_cmd->parsed()) {
        ConfigGuard guard;
        if (int rc = load_config(config_path, preset, overrides, guard)) return rc;
        uint64_t params = 0, flops = 0;
        const raseg_status st = raseg_count_complexity(guard.cfg, input_size, &params, &flops);
        if (st != RASEG_OK) return fail(st);
        std::printf(
            "{\"input_size\": %d, \"params\": %llu, \"flops\": %llu, \"gflops\": %.3f, "
            "\"note\": \"2*MACs over convs/linears/attention matmuls; "
            "norm/activation/pool/resize excluded\"}\n",
            input_size, (unsigned long long)params, (unsigned long long)flops,
            double(flops) / 1e9);
        return 0;
    }

    if (gen_cmd->parsed()) {
        const raseg_status st = raseg_gen_data(spec_path.c_str(), out_dir.c_str());
        if (st != RASEG_OK) return fail(st);
        std::printf("wrote %s/train and %s/val\n", out_dir.c_str(), out_dir.c_str());
        return 0;
    }

    if (grad_cmd->parsed()) {
        int checked = 0, failed = 0;
        const raseg_status st =
            raseg_gradcheck(module.empty() ? nullptr : module.c_str(), &checked, &failed);
        if (st != RASEG_OK) return fail(st);
        std::printf("gradcheck: %d coordinates checked, %d failed\n", checked, failed);
        return failed == 0 ? 0 : 1;
    }
    return 0;
}
