#include "tlv/manifest.hpp"

#include <ctime>
#include <fstream>
#include <sstream>

#include "tlv/errors.hpp"
#include "tlv/rng.hpp"

namespace tlv {

nlohmann::json config_to_json(const RunConfig& cfg) {
    // reuse the canonical text form so both views always agree
    nlohmann::json out = nlohmann::json::object();
    std::istringstream in(serialize_config(cfg));
    std::string line, section;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.front() == '[') {
            section = line.substr(1, line.size() - 2);
            out[section] = nlohmann::json::object();
            continue;
        }
        const std::size_t eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        out[section][line.substr(0, eq)] = line.substr(eq + 3);
    }
    return out;
}

std::string fnv1a64_file_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("manifest: cannot hash " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::uint64_t h = fnv1a64(bytes);
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    std::uint64_t v = h;
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

std::string iso8601_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_run_manifest(const std::filesystem::path& dir, const RunManifest& m) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["command"] = m.command;
    j["timestamp"] = m.timestamp;
    j["seed"] = m.seed;
    j["config"] = m.config;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    nlohmann::json hashes = nlohmann::json::object();
    for (const auto& f : m.outputs) hashes[f] = fnv1a64_file_hex(dir / f);
    j["hashes"] = hashes;
    for (auto it = m.extra.begin(); it != m.extra.end(); ++it) j[it.key()] = it.value();
    std::ofstream out(dir / "run_manifest.json", std::ios::trunc);
    if (!out) throw LoadError("manifest: cannot write " + (dir / "run_manifest.json").string());
    out << j.dump(2) << "\n";
    if (!out) throw LoadError("manifest: short write");
}

nlohmann::json read_run_manifest(const std::filesystem::path& dir) {
    std::ifstream in(dir / "run_manifest.json");
    if (!in) throw LoadError("manifest: cannot open " + (dir / "run_manifest.json").string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("manifest: " + std::string(e.what()));
    }
}

} // namespace tlv
