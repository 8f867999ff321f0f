#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tlv/config.hpp"

namespace tlv {

// Every CLI run directory gets a run_manifest.json describing what produced
// it: the subcommand, the resolved configuration, input paths, output files
// with content hashes, and the seed. The timestamp is the only
// non-reproducible field.
struct RunManifest {
    std::string command;
    std::string timestamp;
    std::uint64_t seed = 0;
    nlohmann::json config;
    nlohmann::json inputs = nlohmann::json::object();
    std::vector<std::string> outputs;
    nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json config_to_json(const RunConfig& cfg);

std::string fnv1a64_file_hex(const std::filesystem::path& path);
std::string iso8601_utc_now();

// hashes every listed output (relative to dir) and writes run_manifest.json
void write_run_manifest(const std::filesystem::path& dir, const RunManifest& m);
nlohmann::json read_run_manifest(const std::filesystem::path& dir);

} // namespace tlv
