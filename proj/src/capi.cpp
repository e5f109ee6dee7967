#include "raseg.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

#include "core/config.hpp"
#include "core/errors.hpp"
#include "core/gradcheck.hpp"
#include "core/train.hpp"

using namespace raseg;

namespace {

thread_local std::string g_last_error;

raseg_status set_error(raseg_status status, const std::string& msg) {
    g_last_error = msg;
    return status;
}

template <class F>
raseg_status guarded(F&& f) {
    try {
        return f();
    } catch (const std::invalid_argument& e) {
        return set_error(RASEG_ERR_INVALID_ARG, e.what());
    } catch (const config_error& e) {
        return set_error(RASEG_ERR_CONFIG, e.what());
    } catch (const numeric_error& e) {
        return set_error(RASEG_ERR_NUMERIC, e.what());
    } catch (const std::exception& e) {
        return set_error(RASEG_ERR_IO, e.what());
    } catch (...) {
        return set_error(RASEG_ERR_INTERNAL, "unknown error");
    }
}

raseg_status require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
    return RASEG_OK;
}

void copy_out(char* buf, size_t buflen, const std::string& s) {
    if (!buf || buflen == 0) return;
    const size_t n = std::min(buflen - 1, s.size());
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
}

nlohmann::json::json_pointer dotted_pointer(const char* key) {
    std::string p = "/";
    for (const char* c = key; *c; ++c) p += *c == '.' ? '/' : *c;
    return nlohmann::json::json_pointer(p);
}

}  // namespace

struct raseg_config {
    nlohmann::json tree;

    TrainConfig parsed() const { return train_config_from_json(tree); }
};

struct raseg_model {
    TrainConfig cfg;
    std::shared_ptr<Model<float>> model;
};

extern "C" {

const char* raseg_status_string(raseg_status status) {
    switch (status) {
        case RASEG_OK: return "ok";
        case RASEG_ERR_INVALID_ARG: return "invalid argument";
        case RASEG_ERR_IO: return "io error";
        case RASEG_ERR_CONFIG: return "config error";
        case RASEG_ERR_NUMERIC: return "numeric error";
        default: return "internal error";
    }
}

const char* raseg_last_error(void) { return g_last_error.c_str(); }

const char* raseg_version(void) { return "0.1.0"; }

raseg_status raseg_config_preset(const char* name, raseg_config** out) {
    return guarded([&] {
        require(name && out, "raseg_config_preset: null argument");
        auto cfg = std::make_unique<raseg_config>();
        cfg->tree = train_config_to_json(preset_config(name));
        *out = cfg.release();
        return RASEG_OK;
    });
}

raseg_status raseg_config_load(const char* path, raseg_config** out) {
    return guarded([&] {
        require(path && out, "raseg_config_load: null argument");
        auto cfg = std::make_unique<raseg_config>();
        cfg->tree = train_config_to_json(load_train_config(path));
        *out = cfg.release();
        return RASEG_OK;
    });
}

raseg_status raseg_config_save(const raseg_config* cfg, const char* path) {
    return guarded([&] {
        require(cfg && path, "raseg_config_save: null argument");
        save_train_config(cfg->parsed(), path);
        return RASEG_OK;
    });
}

raseg_status raseg_config_set(raseg_config* cfg, const char* key, const char* value) {
    return guarded([&] {
        require(cfg && key && value, "raseg_config_set: null argument");
        nlohmann::json parsed_value;
        try {
            parsed_value = nlohmann::json::parse(value);
        } catch (const nlohmann::json::exception&) {
            parsed_value = std::string(value);
        }
        nlohmann::json candidate = cfg->tree;
        try {
            candidate[dotted_pointer(key)] = parsed_value;
        } catch (const nlohmann::json::exception& e) {
            throw config_error(std::string("config: bad key path: ") + e.what());
        }
        train_config_from_json(candidate);  // validate before committing
        cfg->tree = std::move(candidate);
        return RASEG_OK;
    });
}

raseg_status raseg_config_get(const raseg_config* cfg, const char* key, char* buf,
                              size_t buflen) {
    return guarded([&] {
        require(cfg && key && buf, "raseg_config_get: null argument");
        const nlohmann::json* node = &cfg->tree;
        try {
            node = &cfg->tree.at(dotted_pointer(key));
        } catch (const nlohmann::json::exception&) {
            throw config_error(std::string("config: no such key '") + key + "'");
        }
        copy_out(buf, buflen, node->dump());
        return RASEG_OK;
    });
}

void raseg_config_free(raseg_config* cfg) { delete cfg; }

raseg_status raseg_gen_data(const char* spec_path, const char* out_dir) {
    return guarded([&] {
        require(spec_path && out_dir, "raseg_gen_data: null argument");
        std::ifstream f(spec_path);
        if (!f) throw config_error(std::string("spec: cannot open ") + spec_path);
        nlohmann::json j;
        try {
            f >> j;
        } catch (const nlohmann::json::exception& e) {
            throw config_error(std::string("spec: parse error: ") + e.what());
        }
        double holdout = 0.9;
        if (j.contains("holdout")) holdout = j.at("holdout").get<double>();
        const SyntheticSpec spec = spec_from_json(j);
        const auto [train_idx, val_idx] = make_holdout(spec.count, holdout, spec.seed);
        write_split_dir(out_dir, spec, train_idx, "train");
        write_split_dir(out_dir, spec, val_idx, "val");
        return RASEG_OK;
    });
}

raseg_status raseg_train(const raseg_config* cfg, const char* out_dir, char* ckpt_path_buf,
                         size_t buflen) {
    return guarded([&] {
        require(cfg && out_dir, "raseg_train: null argument");
        TrainResult result = train(cfg->parsed(), out_dir);
        copy_out(ckpt_path_buf, buflen, result.checkpoint_path);
        return RASEG_OK;
    });
}

raseg_status raseg_evaluate(const char* ckpt_path, const char* data_dir,
                            const char* report_path, double* out_mdice) {
    return guarded([&] {
        require(ckpt_path && data_dir, "raseg_evaluate: null argument");
        MetricsReport report =
            evaluate_checkpoint(ckpt_path, data_dir, report_path ? report_path : "");
        if (out_mdice) *out_mdice = report.mean_dice;
        return RASEG_OK;
    });
}

raseg_status raseg_count_complexity(const raseg_config* cfg, int input_size,
                                    uint64_t* out_params, uint64_t* out_flops) {
    return guarded([&] {
        require(cfg && out_params && out_flops, "raseg_count_complexity: null argument");
        const Complexity c = count_params_flops(cfg->parsed().model, input_size);
        *out_params = c.params;
        *out_flops = c.flops;
        return RASEG_OK;
    });
}

raseg_status raseg_gradcheck(const char* module, int* out_checked, int* out_failed) {
    return guarded([&] {
        require(out_checked && out_failed, "raseg_gradcheck: null argument");
        int checked = 0, failed = 0;
        for (const auto& suite : run_gradcheck_suites(module ? module : "")) {
            checked += suite.report.checked;
            failed += suite.report.failed;
        }
        *out_checked = checked;
        *out_failed = failed;
        return RASEG_OK;
    });
}

raseg_status raseg_model_open(const char* ckpt_path, raseg_model** out) {
    return guarded([&] {
        require(ckpt_path && out, "raseg_model_open: null argument");
        const CheckpointMeta meta = read_checkpoint_meta(ckpt_path);
        auto handle = std::make_unique<raseg_model>();
        handle->cfg = train_config_from_json(nlohmann::json::parse(meta.config_json));
        handle->model = std::make_shared<Model<float>>(handle->cfg.model, handle->cfg.seed);
        load_checkpoint(ckpt_path, *handle->model, nullptr);
        *out = handle.release();
        return RASEG_OK;
    });
}

raseg_status raseg_model_num_classes(const raseg_model* model, int* out) {
    return guarded([&] {
        require(model && out, "raseg_model_num_classes: null argument");
        *out = model->cfg.model.decoder.n_out();
        return RASEG_OK;
    });
}

raseg_status raseg_model_predict(raseg_model* model, const float* image, int c, int h, int w,
                                 float* out_probs) {
    return guarded([&] {
        require(model && image && out_probs, "raseg_model_predict: null argument");
        require(c == 3, "raseg_model_predict: image must have 3 channels");
        require(h >= 32 && w >= 32 && h % 32 == 0 && w % 32 == 0,
                "raseg_model_predict: h and w must be multiples of 32");
        TensorF x = TensorF::zeros(Shape{1, c, h, w});
        std::copy(image, image + size_t(c) * h * w, x.values().begin());
        auto outputs = model->model->forward(x, RunMode::eval());
        const int n_out = model->cfg.model.decoder.n_out();
        TensorF probs = n_out == 1 ? sigmoid(outputs.final_logits)
                                   : softmax_channels(outputs.final_logits);
        std::copy(probs.values().begin(), probs.values().end(), out_probs);
        return RASEG_OK;
    });
}

void raseg_model_free(raseg_model* model) { delete model; }

}  // extern "C"
