#include "core/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace raseg {

namespace fs = std::filesystem;
using detail::check;

const char* const kFlopNote =
    "2*MACs over convs/linears/attention matmuls; norm/activation/pool/resize excluded";

Dataset Dataset::synthesize(const SyntheticSpec& spec) {
    Dataset ds;
    ds.multiclass = spec.multiclass;
    ds.native_size = spec.size;
    ds.samples.reserve(size_t(spec.count));
    for (int i = 0; i < spec.count; ++i) {
        ds.samples.push_back(generate_sample(spec, i));
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%05d", i);
        ds.ids.push_back(buf);
    }
    return ds;
}

Dataset Dataset::from_dir(const std::string& dir) {
    CachedDataset cached = load_split_dir(dir);
    Dataset ds;
    ds.multiclass = cached.multiclass;
    ds.native_size = cached.size;
    ds.samples = std::move(cached.samples);
    ds.ids = std::move(cached.ids);
    return ds;
}

std::string log_rows_to_csv(const std::vector<TrainLogRow>& rows) {
    std::ostringstream os;
    os << "step,scale,loss,lr\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%lld,%d,%.9g,%.9g\n", (long long)r.step, r.scale,
                      r.loss, r.lr);
        os << buf;
    }
    return os.str();
}

namespace {

struct BatchTensors {
    TensorF images;
    TensorF binary_gt;        // binary task
    std::vector<int> labels;  // multiclass task
};

BatchTensors assemble_batch(const Dataset& ds, const std::vector<int>& indices, int scale,
                            bool augment, bool multiclass, uint64_t aug_seed, int64_t step) {
    std::vector<ImageF> images;
    std::vector<Mask> masks;
    for (const int idx : indices) {
        Sample s = ds.samples[size_t(idx)];
        if (augment) {
            Rng rng = Rng::child(aug_seed ^ uint64_t(step) * 0x9e37u, uint64_t(idx));
            if (multiclass) {
                MulticlassAugConfig acfg;
                acfg.out_size = scale;
                augment_multiclass(s, acfg, rng);
            } else {
                BinaryAugConfig acfg;
                acfg.out_size = scale;
                augment_binary(s, acfg, rng);
            }
        }
        if (s.image.h != scale || s.image.w != scale) {
            s.image = resize_image(s.image, scale, scale);
            s.mask = resize_mask(s.mask, scale, scale);
        }
        images.push_back(std::move(s.image));
        masks.push_back(std::move(s.mask));
    }
    BatchTensors out;
    out.images = images_to_tensor<float>(images);
    if (multiclass)
        out.labels = masks_to_labels(masks);
    else
        out.binary_gt = masks_to_binary_tensor<float>(masks);
    return out;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    Dataset ds = cfg.data_dir.empty() ? Dataset::synthesize(cfg.data)
                                      : Dataset::from_dir(cfg.data_dir);
    check(ds.size() >= 1, "train: dataset is empty");
    check(ds.multiclass == (cfg.model.decoder.n_classes >= 2),
          "train: dataset class mode does not match the model");

    TrainResult result;
    result.model = std::make_shared<Model<float>>(cfg.model, cfg.seed);
    Model<float>& model = *result.model;
    Adam<float> adam(model.named_tensors(), cfg.adam);

    const std::string config_json = canonical_config_json(cfg);
    const int steps_per_epoch = (ds.size() + cfg.batch_size - 1) / cfg.batch_size;
    int64_t total_steps = int64_t(steps_per_epoch) * cfg.epochs;
    if (cfg.max_steps > 0) total_steps = std::min<int64_t>(total_steps, cfg.max_steps);

    if (!out_dir.empty()) fs::create_directories(out_dir);
    const std::string ckpt_path =
        out_dir.empty() ? std::string() : (fs::path(out_dir) / "last.ckpt").string();

    Rng loop_rng = Rng::child(cfg.seed, 0x747261696e /* "train" */);
    const bool multiclass = ds.multiclass;
    int64_t step = 0;
    bool done = false;
    for (int epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
        std::vector<int> order(size_t(ds.size()));
        for (int i = 0; i < ds.size(); ++i) order[size_t(i)] = i;
        for (int i = ds.size() - 1; i > 0; --i)
            std::swap(order[size_t(i)], order[size_t(loop_rng.uniform_int(0, i))]);

        for (int b = 0; b < steps_per_epoch && !done; ++b) {
            const int scale =
                cfg.scales[size_t(loop_rng.uniform_int(0, int(cfg.scales.size()) - 1))];
            std::vector<int> batch_idx;
            for (int i = b * cfg.batch_size; i < std::min((b + 1) * cfg.batch_size, ds.size());
                 ++i)
                batch_idx.push_back(order[size_t(i)]);

            BatchTensors batch = assemble_batch(ds, batch_idx, scale, cfg.augment, multiclass,
                                                cfg.seed ^ 0xa6u, step);

            auto outputs = model.forward(batch.images, RunMode::training());
            TensorF loss =
                multiclass
                    ? deep_supervision_loss_multiclass(outputs, batch.labels, scale, scale)
                    : deep_supervision_loss(outputs, batch.binary_gt, cfg.loss);

            const double loss_value = double(loss.item());
            const double lr_t = cosine_lr(step, total_steps, cfg.lr);
            if (!std::isfinite(loss_value)) {
                std::ostringstream os;
                os << "train: non-finite loss at step " << step << " (lr " << lr_t << ", loss "
                   << loss_value << ")";
                throw numeric_error(os.str());
            }

            backward(loss);
            adam.step(lr_t);
            for (auto& p : adam.params()) p.tensor.zero_grad();

            result.log.push_back({step, scale, loss_value, lr_t});
            ++step;
            done = step >= total_steps;
        }
        result.epochs_run = epoch + 1;
        if (!ckpt_path.empty())
            save_checkpoint(ckpt_path, model, config_json, epoch + 1, &adam);
    }

    result.checkpoint_path = ckpt_path;
    if (!out_dir.empty()) {
        std::ofstream f(fs::path(out_dir) / "logs.csv");
        if (!f) throw std::runtime_error("train: cannot write logs.csv");
        f << log_rows_to_csv(result.log);
    }
    return result;
}

MetricsReport evaluate_model(Model<float>& model, const Dataset& ds) {
    MetricsReport report;
    const int n_out = model.cfg.decoder.n_out();
    const bool multiclass = n_out >= 2;
    check(multiclass == ds.multiclass, "evaluate: dataset class mode does not match the model");

    std::vector<int> class_set;
    for (int c = 1; c < n_out; ++c) class_set.push_back(c);
    MicroClassAccumulator micro(class_set);

    for (size_t i = 0; i < ds.samples.size(); ++i) {
        const Sample& s = ds.samples[size_t(i)];
        auto outputs = model.forward(images_to_tensor<float>({s.image}), RunMode::eval());
        const TensorF& logits = outputs.final_logits;
        const int h = logits.shape().h, w = logits.shape().w;
        const std::string id = i < ds.ids.size() ? ds.ids[i] : std::to_string(i);

        std::vector<uint8_t> gt_binary(s.mask.v.size());
        for (size_t p = 0; p < gt_binary.size(); ++p) gt_binary[p] = s.mask.v[p] != 0;

        if (!multiclass) {
            TensorF probs = sigmoid(logits);
            std::vector<float> pv(probs.values().begin(), probs.values().end());
            report.per_image.push_back({id, segmentation_metrics_probs(pv, gt_binary, 0.5), -1});
        } else {
            // argmax over channels
            std::vector<uint8_t> pred(size_t(h) * w);
            const auto& lv = logits.values();
            for (int p = 0; p < h * w; ++p) {
                int best = 0;
                float best_v = lv[size_t(p)];
                for (int c = 1; c < n_out; ++c) {
                    const float v = lv[size_t(c) * h * w + size_t(p)];
                    if (v > best_v) {
                        best_v = v;
                        best = c;
                    }
                }
                pred[size_t(p)] = uint8_t(best);
            }
            micro.add(pred, s.mask.v);
            std::vector<uint8_t> pred_binary(pred.size());
            for (size_t p = 0; p < pred.size(); ++p) pred_binary[p] = pred[p] != 0;
            report.per_image.push_back({id, segmentation_metrics(pred_binary, gt_binary), -1});
        }
    }
    if (multiclass) report.micro = micro.results();
    report.finalize_aggregates();
    report.param_count = model.param_count();
    const Complexity cx = model.complexity(ds.native_size);
    report.flop_count = cx.flops;
    report.flop_note = kFlopNote;
    return report;
}

MetricsReport evaluate_checkpoint(const std::string& ckpt_path, const std::string& data_dir,
                                  const std::string& report_path) {
    const CheckpointMeta meta = read_checkpoint_meta(ckpt_path);
    TrainConfig cfg;
    try {
        cfg = train_config_from_json(nlohmann::json::parse(meta.config_json));
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("checkpoint: embedded config unreadable: ") + e.what());
    }
    Model<float> model(cfg.model, cfg.seed);
    load_checkpoint(ckpt_path, model, nullptr);

    Dataset ds = Dataset::from_dir(data_dir);
    MetricsReport report = evaluate_model(model, ds);

    if (!report_path.empty()) {
        std::ofstream f(report_path);
        if (!f) throw std::runtime_error("evaluate: cannot write " + report_path);
        f << report.to_json() << "\n";
        fs::path csv_path(report_path);
        csv_path.replace_extension(".csv");
        std::ofstream c(csv_path);
        if (!c) throw std::runtime_error("evaluate: cannot write " + csv_path.string());
        c << report.to_csv();
    }
    return report;
}

Complexity count_params_flops(const ModelConfig& cfg, int input_size) {
    cfg.validate();
    check(input_size >= 32 && input_size % 32 == 0,
          "count_params_flops: input size must be a multiple of 32");
    Model<float> model(cfg, 0);
    Complexity c = model.complexity(input_size);
    c.params = model.param_count();
    return c;
}

}  // namespace raseg
