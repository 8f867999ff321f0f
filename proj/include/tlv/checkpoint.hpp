#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tlv/tensor.hpp"

namespace tlv {

// Model + optimizer snapshot. The config echo is the canonical serialization
// of the run configuration plus a [state] section (epoch, step, adam_t), so
// a checkpoint alone is enough to rebuild the model and resume. Tensors keep
// their registry order and full f64 payloads: save followed by load returns
// bit-identical values.
struct Checkpoint {
    std::uint32_t version = 1;
    std::string config_echo;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const;
};

// layout: "TLVC" magic, u32 version, u64 echo length + bytes, u32 tensor
// count, then per tensor: u32 name length, name bytes, u32 rank, u32 dims,
// f64 little-endian payload
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace tlv
