#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tlv/config.hpp"
#include "tlv/model.hpp"
#include "tlv/tensor.hpp"

namespace tlv {

// Frozen-feature evaluation: linear probes over embeddings, protocol grids
// over sensors and towers, and diagnostic quantities (sensor information
// proxy, gradient variance, adapter conditioning).

struct ProbeOptions {
    int epochs = 50;
    int batch_size = 64;
    double lr = 0.05;
    double weight_decay = 1e-4;
    std::uint64_t seed = 0;
};

struct ProbeResult {
    double accuracy = 0.0;
    int n_test = 0;
    int classes = 0;
};

// Multinomial logistic regression trained from zero weights with AdamW and
// deterministic shuffles. Ties in the argmax go to the lowest class index.
// Throws DomainError when the training labels hold fewer than two classes.
ProbeResult linear_probe(const Tensor& train_x, const std::vector<int>& train_y, const Tensor& test_x,
                         const std::vector<int>& test_y, int num_classes, const ProbeOptions& opts);

// Sensor-information proxy: ln(S) minus the held-out cross-entropy of a
// linear sensor probe, clamped into [0, ln S]. The split is stratified
// 80/20 per sensor. Requires >= 50 samples per sensor; a class imbalance
// beyond 10:1 sets the warning flag.
struct MiEstimate {
    double proxy = 0.0;
    bool imbalance_warning = false;
};
MiEstimate estimate_sensor_mi(const Tensor& embeddings, const std::vector<int>& sensor_ids, int sensors,
                              std::uint64_t seed);

// Mean over coordinates of the per-coordinate sample variance of the total
// loss gradient across n_trials freshly drawn batches.
double gradient_variance(ModelState& model, const Dataset& data, int batch_size, int n_trials,
                         std::uint64_t seed);

// 2-norm condition number of a square matrix via power iteration on W^T W
// (largest, then smallest through a spectral shift). Rank-deficient input
// returns +infinity; an all-zero matrix is a DegenerateInputError.
double condition_number(const Tensor& w);

enum class Protocol { intra, cross, multi, synergy };
Protocol protocol_from_name(const std::string& name);
const char* protocol_name(Protocol p);

struct RssRow {
    std::string protocol;
    std::string task;    // material | roughness | hardness
    std::string encoder; // tactile | vision_on_tactile | tactile_on_vision
    std::string sensor;  // sensor id or "all"
    double accuracy = 0.0;
    int n_test = 0;
};

struct RssOptions {
    std::vector<Protocol> protocols{Protocol::intra, Protocol::cross, Protocol::multi, Protocol::synergy};
    ProbeOptions probe;
};

// Probes are fit on train-split embeddings and scored on test-split
// embeddings of the same sensor slice. `train_sensor_filter` is the filter
// the checkpoint was trained with: intra reads that sensor, cross reads the
// held-out sensors (and rejects unfiltered models), multi reads each sensor
// of an unfiltered model, synergy swaps the image towers.
std::vector<RssRow> eval_rss(const ModelState& model, const Dataset& data, int train_sensor_filter,
                             const RssOptions& opts);

void write_rss_csv(const std::filesystem::path& path, const std::vector<RssRow>& rows);
std::vector<RssRow> read_rss_csv(const std::filesystem::path& path);

struct StabilityRow {
    int batch_size = 0;
    double accuracy = 0.0;
    int n_test = 0;
};

struct StabilityResult {
    std::vector<StabilityRow> rows;
    double spread = 0.0; // max - min accuracy
};

// Trains one model per batch size from the same seed and probes material on
// pooled test data.
StabilityResult eval_stability(const RunConfig& base, const Dataset& data,
                               const std::vector<int>& batch_sizes, const ProbeOptions& probe);

void write_stability_csv(const std::filesystem::path& path, const StabilityResult& result);

} // namespace tlv
