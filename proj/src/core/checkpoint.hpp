#pragma once

#include <optional>
#include <string>

#include "core/model.hpp"
#include "core/optim.hpp"

namespace raseg {

// Versioned little-endian binary checkpoint: the canonical config JSON and
// its hash, the epoch, every named tensor (parameters and batch-norm
// buffers), and optionally the Adam moments. Loading restores eval-mode
// outputs bit-exactly.
struct CheckpointMeta {
    uint32_t version = 1;
    uint64_t config_hash = 0;
    std::string config_json;
    int epoch = 0;
    bool has_optimizer = false;
};

void save_checkpoint(const std::string& path, Model<float>& model,
                     const std::string& config_json, int epoch, Adam<float>* optimizer);

// Reads only the header (cheap config inspection).
CheckpointMeta read_checkpoint_meta(const std::string& path);

// Loads tensors into an already constructed model; shapes and names must
// match. When `optimizer` is given, its moments are restored too.
CheckpointMeta load_checkpoint(const std::string& path, Model<float>& model,
                               Adam<float>* optimizer);

}  // namespace raseg
