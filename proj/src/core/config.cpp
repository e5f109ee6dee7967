#include "core/config.hpp"

#include <fstream>
#include <set>

#include "core/errors.hpp"
#include "core/hashing.hpp"

namespace raseg {

namespace {

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!known.count(key))
            throw config_error("config: unknown key '" + key + "' in " + where);
}

template <class T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void TrainConfig::validate() const {
    model.validate();
    loss.validate();
    data.validate();
    detail::check(epochs >= 1, "train config: epochs must be >= 1");
    detail::check(batch_size >= 1, "train config: batch_size must be >= 1");
    detail::check(lr > 0, "train config: lr must be positive");
    detail::check(!scales.empty(), "train config: scales must be non-empty");
    for (const int s : scales)
        detail::check(s >= 32 && s % 32 == 0, "train config: scales must be multiples of 32");
    detail::check(max_steps >= 0, "train config: max_steps must be >= 0");
    if (model.decoder.n_classes >= 2)
        detail::check(data.multiclass, "train config: multi-class model needs multiclass data");
    else
        detail::check(!data.multiclass, "train config: binary model needs binary data");
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    nlohmann::json j;
    j["version"] = 1;
    j["model"]["encoder"] = {{"stage_dims", cfg.model.encoder.stage_dims},
                             {"attn_stages", cfg.model.encoder.attn_stages},
                             {"heads", cfg.model.encoder.heads},
                             {"sr_ratios", cfg.model.encoder.sr_ratios}};
    j["model"]["decoder"] = {
        {"channels", cfg.model.decoder.channels},
        {"repeats", cfg.model.decoder.repeats},
        {"n_classes", cfg.model.decoder.n_classes},
        {"ra_variant", cfg.model.decoder.ra_variant == RaVariant::Softmax ? "softmax" : "sigmoid"},
        {"use_ra", cfg.model.decoder.use_ra},
        {"use_bottleneck", cfg.model.decoder.use_bottleneck},
        {"fusion_eps", cfg.model.decoder.fusion_eps}};
    j["loss"] = {{"gamma", cfg.loss.gamma},
                 {"alpha", cfg.loss.alpha},
                 {"weight_kernel", cfg.loss.weight_kernel},
                 {"weight_scale", cfg.loss.weight_scale},
                 {"eps", cfg.loss.eps}};
    j["data"] = spec_to_json(cfg.data);
    if (!cfg.data_dir.empty()) j["data"]["dir"] = cfg.data_dir;
    j["train"] = {{"epochs", cfg.epochs},       {"batch_size", cfg.batch_size},
                  {"lr", cfg.lr},               {"scales", cfg.scales},
                  {"seed", cfg.seed},           {"max_steps", cfg.max_steps},
                  {"augment", cfg.augment},     {"adam_beta1", cfg.adam.beta1},
                  {"adam_beta2", cfg.adam.beta2}, {"adam_eps", cfg.adam.eps}};
    return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, {"version", "model", "loss", "data", "train"}, "root");
    if (j.contains("version") && j.at("version").get<int>() != 1)
        throw config_error("config: unsupported version");

    TrainConfig cfg;
    if (j.contains("model")) {
        const auto& jm = j.at("model");
        reject_unknown_keys(jm, {"encoder", "decoder"}, "model");
        if (jm.contains("encoder")) {
            const auto& je = jm.at("encoder");
            reject_unknown_keys(je, {"stage_dims", "attn_stages", "heads", "sr_ratios"},
                                "model.encoder");
            maybe(je, "stage_dims", cfg.model.encoder.stage_dims);
            maybe(je, "attn_stages", cfg.model.encoder.attn_stages);
            maybe(je, "heads", cfg.model.encoder.heads);
            maybe(je, "sr_ratios", cfg.model.encoder.sr_ratios);
        }
        if (jm.contains("decoder")) {
            const auto& jd = jm.at("decoder");
            reject_unknown_keys(jd,
                                {"channels", "repeats", "n_classes", "ra_variant", "use_ra",
                                 "use_bottleneck", "fusion_eps"},
                                "model.decoder");
            maybe(jd, "channels", cfg.model.decoder.channels);
            maybe(jd, "repeats", cfg.model.decoder.repeats);
            maybe(jd, "n_classes", cfg.model.decoder.n_classes);
            if (jd.contains("ra_variant")) {
                const std::string v = jd.at("ra_variant").get<std::string>();
                if (v == "sigmoid") cfg.model.decoder.ra_variant = RaVariant::Sigmoid;
                else if (v == "softmax") cfg.model.decoder.ra_variant = RaVariant::Softmax;
                else throw config_error("config: ra_variant must be sigmoid or softmax");
            }
            maybe(jd, "use_ra", cfg.model.decoder.use_ra);
            maybe(jd, "use_bottleneck", cfg.model.decoder.use_bottleneck);
            maybe(jd, "fusion_eps", cfg.model.decoder.fusion_eps);
        }
    }
    if (j.contains("loss")) {
        const auto& jl = j.at("loss");
        reject_unknown_keys(jl, {"gamma", "alpha", "weight_kernel", "weight_scale", "eps"},
                            "loss");
        maybe(jl, "gamma", cfg.loss.gamma);
        maybe(jl, "alpha", cfg.loss.alpha);
        maybe(jl, "weight_kernel", cfg.loss.weight_kernel);
        maybe(jl, "weight_scale", cfg.loss.weight_scale);
        maybe(jl, "eps", cfg.loss.eps);
    }
    if (j.contains("data")) {
        nlohmann::json jd = j.at("data");
        if (jd.contains("dir")) {
            cfg.data_dir = jd.at("dir").get<std::string>();
            jd.erase("dir");
        }
        cfg.data = spec_from_json(jd);
    }
    if (j.contains("train")) {
        const auto& jt = j.at("train");
        reject_unknown_keys(jt,
                            {"epochs", "batch_size", "lr", "scales", "seed", "max_steps",
                             "augment", "adam_beta1", "adam_beta2", "adam_eps"},
                            "train");
        maybe(jt, "epochs", cfg.epochs);
        maybe(jt, "batch_size", cfg.batch_size);
        maybe(jt, "lr", cfg.lr);
        maybe(jt, "scales", cfg.scales);
        maybe(jt, "seed", cfg.seed);
        maybe(jt, "max_steps", cfg.max_steps);
        maybe(jt, "augment", cfg.augment);
        maybe(jt, "adam_beta1", cfg.adam.beta1);
        maybe(jt, "adam_beta2", cfg.adam.beta2);
        maybe(jt, "adam_eps", cfg.adam.eps);
    }
    // single source of truth for the pyramid width
    cfg.model.encoder.decoder_width = cfg.model.decoder.channels;
    cfg.validate();
    return cfg;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("config: cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config: parse error in " + path + ": " + e.what());
    }
    return train_config_from_json(j);
}

void save_train_config(const TrainConfig& cfg, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw config_error("config: cannot write " + path);
    f << train_config_to_json(cfg).dump(2) << "\n";
}

TrainConfig preset_config(const std::string& name) {
    TrainConfig cfg;
    if (name == "tiny-binary") {
        // defaults are the tiny binary setup
    } else if (name == "tiny-multiclass") {
        cfg.model.decoder.n_classes = 3;
        cfg.model.decoder.ra_variant = RaVariant::Softmax;
        cfg.data.multiclass = true;
    } else if (name == "paper-shape") {
        cfg.model.encoder.stage_dims = {32, 64, 128, 320, 512};
        cfg.model.encoder.heads = {2, 5, 8};
        cfg.model.encoder.sr_ratios = {4, 2, 1};
        cfg.model.decoder.channels = 224;
        cfg.model.decoder.repeats = 4;
        cfg.data.size = 384;
        cfg.scales = {256, 384, 512};
        cfg.epochs = 30;
        cfg.batch_size = 8;
    } else {
        throw config_error("config: unknown preset '" + name + "'");
    }
    cfg.model.encoder.decoder_width = cfg.model.decoder.channels;
    cfg.validate();
    return cfg;
}

std::string canonical_config_json(const TrainConfig& cfg) {
    return train_config_to_json(cfg).dump();  // nlohmann objects keep sorted keys
}

uint64_t config_hash(const TrainConfig& cfg) { return fnv1a64(canonical_config_json(cfg)); }

nlohmann::json spec_to_json(const SyntheticSpec& spec) {
    return {{"size", spec.size},
            {"count", spec.count},
            {"n_blobs_min", spec.n_blobs_min},
            {"n_blobs_max", spec.n_blobs_max},
            {"class_probs", spec.class_probs},
            {"texture_octaves", spec.texture_octaves},
            {"seed", spec.seed},
            {"multiclass", spec.multiclass}};
}

SyntheticSpec spec_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j,
                        {"size", "count", "n_blobs_min", "n_blobs_max", "class_probs",
                         "texture_octaves", "seed", "multiclass", "holdout"},
                        "data");
    SyntheticSpec spec;
    maybe(j, "size", spec.size);
    maybe(j, "count", spec.count);
    maybe(j, "n_blobs_min", spec.n_blobs_min);
    maybe(j, "n_blobs_max", spec.n_blobs_max);
    maybe(j, "class_probs", spec.class_probs);
    maybe(j, "texture_octaves", spec.texture_octaves);
    maybe(j, "seed", spec.seed);
    maybe(j, "multiclass", spec.multiclass);
    spec.validate();
    return spec;
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("spec: cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("spec: parse error in " + path + ": " + e.what());
    }
    return spec_from_json(j);
}

}  // namespace raseg
