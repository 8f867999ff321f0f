#include "tlv/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "tlv/errors.hpp"

namespace tlv {

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return &t;
    }
    return nullptr;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw LoadError("checkpoint: truncated file");
    }
    std::uint32_t u32() {
        need(4);
        const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
        pos += 4;
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    }
    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        const std::uint64_t hi = u32();
        return lo | (hi << 32);
    }
    double f64() {
        const std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::string out;
    out += "TLVC";
    put_u32(out, ckpt.version);
    put_u64(out, ckpt.config_echo.size());
    out += ckpt.config_echo;
    put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (int d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
        for (std::int64_t i = 0; i < t.numel(); ++i) put_f64(out, t[i]);
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw LoadError("checkpoint: cannot write " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw LoadError("checkpoint: short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw LoadError("checkpoint: cannot open " + path.string());
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r{buf, 0};
    if (r.bytes(4) != "TLVC") throw LoadError("checkpoint: bad magic");
    Checkpoint ckpt;
    ckpt.version = r.u32();
    if (ckpt.version != 1) {
        throw LoadError("checkpoint: unsupported version " + std::to_string(ckpt.version));
    }
    const std::uint64_t echo_len = r.u64();
    ckpt.config_echo = r.bytes(static_cast<std::size_t>(echo_len));
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32();
        std::string name = r.bytes(name_len);
        const std::uint32_t rank = r.u32();
        if (rank > 8) throw LoadError("checkpoint: implausible tensor rank");
        std::vector<int> shape;
        std::int64_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            const std::uint32_t ext = r.u32();
            if (ext == 0 || ext > (1u << 30)) throw LoadError("checkpoint: bad tensor extent");
            shape.push_back(static_cast<int>(ext));
            numel *= ext;
        }
        Tensor t(shape);
        for (std::int64_t j = 0; j < numel; ++j) t[j] = r.f64();
        ckpt.tensors.emplace_back(std::move(name), std::move(t));
    }
    if (r.pos != buf.size()) throw LoadError("checkpoint: trailing bytes");
    return ckpt;
}

} // namespace tlv
