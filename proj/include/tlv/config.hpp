#pragma once

#include <cstdint>
#include <string>

#include "tlv/model.hpp"
#include "tlv/synthdata.hpp"

namespace tlv {

struct TrainConfig {
    int epochs = 12;
    int batch_size = 64;
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    double clip_norm = 1.0;
    // ramps the reversal scale linearly from 0 to model.grl_lambda over this
    // many leading epochs; 0 keeps it constant from the start
    int grl_warmup_epochs = 0;
    std::uint64_t seed = 1;
    // -1 trains on every sensor; otherwise restricts training to one sensor
    int sensor_filter = -1;
    std::string dataset_dir = "data";

    void validate() const;
};

struct RunConfig {
    DatasetConfig data;
    ModelConfig model;
    TrainConfig train;
};

// INI-style text with [dataset] / [model] / [train] sections; '#' and ';'
// start comments. The key set is closed: anything unknown is a ConfigError.
RunConfig parse_config_text(const std::string& text, const RunConfig& base);
RunConfig load_config_file(const std::string& path, const RunConfig& base);

// "section.key=value" override, e.g. "train.lr=1e-3"
void apply_override(RunConfig& cfg, const std::string& assignment);

// canonical serialization: fixed section and key order, full float precision
std::string serialize_config(const RunConfig& cfg);

// config echo stored in checkpoints: the run config plus a [state] section
// carrying training progress
std::string serialize_config_with_state(const RunConfig& cfg, int epoch, std::int64_t step,
                                        std::int64_t adam_t);

struct EchoState {
    RunConfig cfg;
    int epoch = 0;
    std::int64_t step = 0;
    std::int64_t adam_t = 0;
};
EchoState parse_config_echo(const std::string& text);

// copy extents, vocabulary, and sensor count from a dataset into the model
void bind_model_to_data(ModelConfig& model, const DatasetConfig& data);

// TLV_CORE_DETERMINISTIC=1 pins wall-clock metric fields to zero and forces
// sequential fan-out
bool deterministic_mode();

} // namespace tlv
