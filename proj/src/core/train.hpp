#pragma once

#include <memory>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/config.hpp"
#include "core/metrics.hpp"

namespace raseg {

// In-memory dataset handed to the loops; either freshly synthesized or loaded
// from a cached split directory.
struct Dataset {
    std::vector<Sample> samples;
    std::vector<std::string> ids;
    bool multiclass = false;
    int native_size = 0;

    static Dataset synthesize(const SyntheticSpec& spec);
    static Dataset from_dir(const std::string& dir);
    int size() const { return int(samples.size()); }
};

struct TrainLogRow {
    int64_t step = 0;
    int scale = 0;
    double loss = 0;
    double lr = 0;
};

std::string log_rows_to_csv(const std::vector<TrainLogRow>& rows);

struct TrainResult {
    std::shared_ptr<Model<float>> model;
    std::vector<TrainLogRow> log;
    std::string checkpoint_path;  // empty when out_dir was empty
    int epochs_run = 0;
};

// One uniform scale per batch, deep-supervision loss, Adam with cosine decay
// to zero, checkpoint written every epoch, last checkpoint returned. A
// non-finite loss aborts with a numeric_error carrying (step, lr, loss).
TrainResult train(const TrainConfig& cfg, const std::string& out_dir);

// Eval-mode forward at the dataset's native resolution; binary masks
// thresholded at 0.5, multi-class by argmax. Micro per-class metrics are
// filled for multi-class datasets.
MetricsReport evaluate_model(Model<float>& model, const Dataset& ds);

// Loads the checkpoint (config embedded), evaluates on the split at
// `data_dir`, optionally writes <report>.json text to report_path and a CSV
// next to it.
MetricsReport evaluate_checkpoint(const std::string& ckpt_path, const std::string& data_dir,
                                  const std::string& report_path);

// Exact trainable parameter count plus the 2*MACs flop tally (convs, linears,
// attention matmuls) at the given square input size.
Complexity count_params_flops(const ModelConfig& cfg, int input_size);

extern const char* const kFlopNote;

}  // namespace raseg
