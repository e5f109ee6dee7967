#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "core/data.hpp"
#include "core/losses.hpp"
#include "core/model.hpp"
#include "core/optim.hpp"

namespace raseg {

struct TrainConfig {
    ModelConfig model;
    LossConfig loss;
    SyntheticSpec data;
    std::string data_dir;  // when set, train from a cached split instead of synthesizing
    int epochs = 5;
    int batch_size = 4;
    double lr = 1e-4;
    std::vector<int> scales{64, 96, 128};
    uint64_t seed = 0;
    int max_steps = 0;  // 0 = run the full epoch budget
    bool augment = true;
    AdamConfig adam;

    void validate() const;
};

// Documented, versioned key/value tree (JSON). Unknown keys are rejected so
// typos fail loudly.
nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

TrainConfig load_train_config(const std::string& path);
void save_train_config(const TrainConfig& cfg, const std::string& path);

// "tiny-binary", "tiny-multiclass", "paper-shape"
TrainConfig preset_config(const std::string& name);

// Canonical (sorted-key) dump used for hashing and checkpoint embedding.
std::string canonical_config_json(const TrainConfig& cfg);
uint64_t config_hash(const TrainConfig& cfg);

SyntheticSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const SyntheticSpec& spec);
SyntheticSpec load_synthetic_spec(const std::string& path);

}  // namespace raseg
