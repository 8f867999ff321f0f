#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tlv/rng.hpp"
#include "tlv/tensor.hpp"

namespace tlv {

// Synthetic multi-sensor triplets. Each object is a sinusoidal texture whose
// frequency/orientation pair is fixed by its material class, with a random
// per-instance phase. Binary attributes add structure: roughness injects a
// high-frequency jitter grating, hardness scales contrast. The tactile grid
// is rendered through a sensor style (tint, gain, illumination gradient,
// noise level); the vision grid always uses the canonical style; the caption
// is a fixed template over a small closed vocabulary.
//
// style_overlap (alpha) interpolates every sensor style toward the canonical
// one: alpha = 0 keeps styles maximally separated, alpha = 1 makes them all
// identical to the canonical style.

struct DatasetConfig {
    int classes = 4;
    int sensors = 2;
    int samples_per_cell = 50; // per (class, sensor) cell
    double style_overlap = 0.5;
    int image_size = 16;
    int channels = 3;
    std::uint64_t seed = 7;

    int vocab_size() const { return 8 + classes; }
    int token_len() const { return 6; }
    void validate() const;
};

struct SensorProfile {
    int sensor = 0;
    std::array<double, 3> tint{0.0, 0.0, 0.0}; // channel c uses tint[c % 3]
    double gain = 1.0;
    double illum_x = 1.0, illum_y = 0.0;
    double noise_std = 0.02;
};

// style after overlap interpolation; sensor == -1 gives the canonical style
SensorProfile sensor_profile(const DatasetConfig& cfg, int sensor);

struct ObjectSpec {
    int material = 0;
    int sensor = 0;
    int instance = 0;
    double freq = 1.0;
    double orient = 0.0;
    double phase = 0.0;
    double jitter_phase = 0.0;
    int rough = 0;
    int hard = 0;
};

ObjectSpec object_spec(const DatasetConfig& cfg, int material, int sensor, int instance);

// [H,W,C] grid; noise_std == 0 draws nothing from the stream
Tensor render_grid(const ObjectSpec& obj, const SensorProfile& prof, const DatasetConfig& cfg,
                   CounterRng& noise);

std::vector<int> caption_tokens(const DatasetConfig& cfg, const ObjectSpec& obj);
std::vector<std::string> vocabulary(const DatasetConfig& cfg); // token id -> word

struct Triplet {
    Tensor tactile; // [H,W,C]
    Tensor vision;  // [H,W,C]
    std::vector<int> tokens;
    int sensor = 0;
    int label = 0; // material class
    int rough = 0;
    int hard = 0;
    int instance = 0;
};

struct Dataset {
    DatasetConfig cfg;
    std::vector<Triplet> train, val, test;

    const std::vector<Triplet>& split(const std::string& name) const;
};

Triplet render_triplet(const DatasetConfig& cfg, int material, int sensor, int instance);

// 8:1:1 split by instance index inside every (class, sensor) cell, so splits
// are disjoint by instance and balanced across classes and sensors
Dataset generate_dataset(const DatasetConfig& cfg);

// directory layout: manifest.json + train.bin/val.bin/test.bin ("TLVD" files,
// little-endian, f32 grids, u16 tokens, u8 labels)
void write_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

} // namespace tlv
