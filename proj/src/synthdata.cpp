#include "tlv/synthdata.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "tlv/errors.hpp"

namespace tlv {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void DatasetConfig::validate() const {
    if (classes < 2) throw ConfigError("dataset: classes must be >= 2");
    if (classes > 248) throw ConfigError("dataset: classes must fit the u8 label field");
    if (sensors < 2 || sensors > 255) throw ConfigError("dataset: sensors must be in [2, 255]");
    if (samples_per_cell < 10) throw ConfigError("dataset: samples_per_cell must be >= 10 for 8:1:1 splits");
    if (!(style_overlap >= 0.0 && style_overlap <= 1.0)) {
        throw ConfigError("dataset: style_overlap must lie in [0, 1]");
    }
    if (image_size < 4) throw ConfigError("dataset: image_size must be >= 4");
    if (channels < 1 || channels > 8) throw ConfigError("dataset: channels must be in [1, 8]");
}

SensorProfile sensor_profile(const DatasetConfig& cfg, int sensor) {
    cfg.validate();
    SensorProfile canon;
    canon.sensor = -1;
    if (sensor == -1) return canon;
    if (sensor < 0 || sensor >= cfg.sensors) throw DomainError("sensor_profile: sensor id out of range");
    const double hue = 2.0 * kPi * sensor / cfg.sensors;
    SensorProfile base;
    base.sensor = sensor;
    for (int c = 0; c < 3; ++c) base.tint[static_cast<std::size_t>(c)] = 0.30 * std::cos(hue + 2.0 * kPi * c / 3.0);
    base.gain = cfg.sensors == 1 ? 1.0 : 0.6 + 0.8 * sensor / (cfg.sensors - 1);
    base.illum_x = std::cos(hue);
    base.illum_y = std::sin(hue);
    base.noise_std = cfg.sensors == 1 ? 0.02 : 0.02 + 0.06 * sensor / (cfg.sensors - 1);
    const double a = cfg.style_overlap;
    SensorProfile out;
    out.sensor = sensor;
    for (int c = 0; c < 3; ++c) {
        out.tint[static_cast<std::size_t>(c)] =
            (1.0 - a) * base.tint[static_cast<std::size_t>(c)] + a * canon.tint[static_cast<std::size_t>(c)];
    }
    out.gain = (1.0 - a) * base.gain + a * canon.gain;
    out.illum_x = (1.0 - a) * base.illum_x + a * canon.illum_x;
    out.illum_y = (1.0 - a) * base.illum_y + a * canon.illum_y;
    out.noise_std = (1.0 - a) * base.noise_std + a * canon.noise_std;
    return out;
}

ObjectSpec object_spec(const DatasetConfig& cfg, int material, int sensor, int instance) {
    cfg.validate();
    if (material < 0 || material >= cfg.classes) throw DomainError("object_spec: material out of range");
    if (sensor < 0 || sensor >= cfg.sensors) throw DomainError("object_spec: sensor out of range");
    if (instance < 0) throw DomainError("object_spec: instance must be non-negative");
    ObjectSpec o;
    o.material = material;
    o.sensor = sensor;
    o.instance = instance;
    const int nf = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.classes))));
    const int no = (cfg.classes + nf - 1) / nf;
    const int fi = material % nf;
    const int oi = material / nf;
    o.freq = 1.0 + (nf > 1 ? 3.0 * fi / (nf - 1) : 0.0);
    o.orient = kPi * oi / no;
    const auto ks = static_cast<std::uint64_t>(material);
    const auto ss = static_cast<std::uint64_t>(sensor);
    const auto is = static_cast<std::uint64_t>(instance);
    CounterRng phase = CounterRng::stream(cfg.seed, "phase", ks, ss, is);
    o.phase = 2.0 * kPi * phase.next_unit();
    o.jitter_phase = 2.0 * kPi * phase.next_unit();
    CounterRng labels = CounterRng::stream(cfg.seed, "labels", ks, ss, is);
    o.rough = static_cast<int>(labels.next_below(2));
    o.hard = static_cast<int>(labels.next_below(2));
    return o;
}

Tensor render_grid(const ObjectSpec& obj, const SensorProfile& prof, const DatasetConfig& cfg,
                   CounterRng& noise) {
    const int H = cfg.image_size, W = cfg.image_size, C = cfg.channels;
    Tensor out({H, W, C});
    const double ca = std::cos(obj.orient), sa = std::sin(obj.orient);
    const double contrast = obj.hard ? 1.2 : 0.8;
    std::int64_t idx = 0;
    for (int y = 0; y < H; ++y) {
        const double v = (y + 0.5) / H;
        for (int x = 0; x < W; ++x) {
            const double u = (x + 0.5) / W;
            const double a1 = u * ca + v * sa;
            const double a2 = -u * sa + v * ca;
            double tex = 0.30 * std::sin(2.0 * kPi * obj.freq * a1 + obj.phase) +
                         0.25 * std::sin(2.0 * kPi * (0.5 + obj.freq) * a2);
            if (obj.rough) tex += 0.10 * std::sin(2.0 * kPi * 6.0 * (u + v) + obj.jitter_phase);
            const double pat = contrast * tex;
            const double illum = 0.40 * (prof.illum_x * (u - 0.5) + prof.illum_y * (v - 0.5));
            for (int c = 0; c < C; ++c, ++idx) {
                double val = 0.5 + prof.gain * pat + prof.tint[static_cast<std::size_t>(c % 3)] + illum;
                if (prof.noise_std > 0.0) val += noise.next_gaussian(0.0, prof.noise_std);
                out[idx] = val;
            }
        }
    }
    return out;
}

std::vector<int> caption_tokens(const DatasetConfig& cfg, const ObjectSpec& obj) {
    if (obj.material < 0 || obj.material >= cfg.classes) {
        throw DomainError("caption_tokens: material out of range");
    }
    return {1, 8 + obj.material, 2, obj.rough ? 3 : 4, 5, obj.hard ? 6 : 7};
}

std::vector<std::string> vocabulary(const DatasetConfig& cfg) {
    std::vector<std::string> v = {"<pad>", "material", "roughness", "rough",
                                  "smooth", "hardness", "hard", "soft"};
    for (int k = 0; k < cfg.classes; ++k) v.push_back("m" + std::to_string(k));
    return v;
}

Triplet render_triplet(const DatasetConfig& cfg, int material, int sensor, int instance) {
    const ObjectSpec obj = object_spec(cfg, material, sensor, instance);
    const SensorProfile prof = sensor_profile(cfg, sensor);
    const SensorProfile canon = sensor_profile(cfg, -1);
    const auto ks = static_cast<std::uint64_t>(material);
    const auto ss = static_cast<std::uint64_t>(sensor);
    const auto is = static_cast<std::uint64_t>(instance);
    CounterRng tn = CounterRng::stream(cfg.seed, "tactile_noise", ks, ss, is);
    CounterRng vn = CounterRng::stream(cfg.seed, "vision_noise", ks, ss, is);
    Triplet t;
    t.tactile = render_grid(obj, prof, cfg, tn);
    t.vision = render_grid(obj, canon, cfg, vn);
    t.tokens = caption_tokens(cfg, obj);
    t.sensor = sensor;
    t.label = material;
    t.rough = obj.rough;
    t.hard = obj.hard;
    t.instance = instance;
    return t;
}

const std::vector<Triplet>& Dataset::split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "val") return val;
    if (name == "test") return test;
    throw ConfigError("dataset: unknown split '" + name + "'");
}

Dataset generate_dataset(const DatasetConfig& cfg) {
    cfg.validate();
    Dataset data;
    data.cfg = cfg;
    const int n = cfg.samples_per_cell;
    const int n_val = n / 10;
    const int n_test = n / 10;
    const int n_train = n - n_val - n_test;
    for (int k = 0; k < cfg.classes; ++k) {
        for (int s = 0; s < cfg.sensors; ++s) {
            for (int i = 0; i < n; ++i) {
                Triplet t = render_triplet(cfg, k, s, i);
                if (i < n_train) {
                    data.train.push_back(std::move(t));
                } else if (i < n_train + n_val) {
                    data.val.push_back(std::move(t));
                } else {
                    data.test.push_back(std::move(t));
                }
            }
        }
    }
    return data;
}

namespace {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    const char* where;

    void need(std::size_t n) {
        if (pos + n > buf.size()) throw LoadError(std::string(where) + ": truncated file");
    }
    std::uint16_t u16() {
        need(2);
        const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
        pos += 2;
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }
    std::uint32_t u32() {
        need(4);
        const auto* p = reinterpret_cast<const unsigned char*>(buf.data() + pos);
        pos += 4;
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    float f32() {
        const std::uint32_t bits = u32();
        float f;
        std::memcpy(&f, &bits, 4);
        return f;
    }
};

std::string encode_split(const Dataset& data, const std::vector<Triplet>& split) {
    std::string out;
    out += "TLVD";
    put_u32(out, 1); // version
    put_u32(out, static_cast<std::uint32_t>(data.cfg.classes));
    put_u32(out, static_cast<std::uint32_t>(data.cfg.sensors));
    put_u32(out, static_cast<std::uint32_t>(data.cfg.image_size));
    put_u32(out, static_cast<std::uint32_t>(data.cfg.channels));
    put_u32(out, static_cast<std::uint32_t>(data.cfg.token_len()));
    put_u32(out, static_cast<std::uint32_t>(split.size()));
    for (const Triplet& t : split) {
        out.push_back(static_cast<char>(t.label));
        out.push_back(static_cast<char>(t.sensor));
        out.push_back(static_cast<char>(t.rough));
        out.push_back(static_cast<char>(t.hard));
        put_u32(out, static_cast<std::uint32_t>(t.instance));
        for (std::int64_t i = 0; i < t.tactile.numel(); ++i) put_f32(out, static_cast<float>(t.tactile[i]));
        for (std::int64_t i = 0; i < t.vision.numel(); ++i) put_f32(out, static_cast<float>(t.vision[i]));
        for (int id : t.tokens) put_u16(out, static_cast<std::uint16_t>(id));
    }
    return out;
}

std::vector<Triplet> decode_split(const std::string& buf, const DatasetConfig& cfg, const char* where) {
    Reader r{buf, 0, where};
    r.need(4);
    if (buf.compare(0, 4, "TLVD") != 0) throw LoadError(std::string(where) + ": bad magic");
    r.pos = 4;
    const std::uint32_t version = r.u32();
    if (version != 1) throw LoadError(std::string(where) + ": unsupported version " + std::to_string(version));
    const std::uint32_t classes = r.u32(), sensors = r.u32(), img = r.u32(), chans = r.u32(),
                        tok = r.u32(), count = r.u32();
    if (static_cast<int>(classes) != cfg.classes || static_cast<int>(sensors) != cfg.sensors ||
        static_cast<int>(img) != cfg.image_size || static_cast<int>(chans) != cfg.channels ||
        static_cast<int>(tok) != cfg.token_len()) {
        throw LoadError(std::string(where) + ": header disagrees with manifest");
    }
    std::vector<Triplet> out;
    out.reserve(count);
    const std::int64_t pix = static_cast<std::int64_t>(img) * img * chans;
    for (std::uint32_t n = 0; n < count; ++n) {
        Triplet t;
        t.label = r.u8();
        t.sensor = r.u8();
        t.rough = r.u8();
        t.hard = r.u8();
        t.instance = static_cast<int>(r.u32());
        if (t.label >= cfg.classes || t.sensor >= cfg.sensors) {
            throw LoadError(std::string(where) + ": record label/sensor out of range");
        }
        t.tactile = Tensor({cfg.image_size, cfg.image_size, cfg.channels});
        for (std::int64_t i = 0; i < pix; ++i) t.tactile[i] = static_cast<double>(r.f32());
        t.vision = Tensor({cfg.image_size, cfg.image_size, cfg.channels});
        for (std::int64_t i = 0; i < pix; ++i) t.vision[i] = static_cast<double>(r.f32());
        t.tokens.resize(static_cast<std::size_t>(tok));
        for (auto& id : t.tokens) id = static_cast<int>(r.u16());
        out.push_back(std::move(t));
    }
    if (r.pos != buf.size()) throw LoadError(std::string(where) + ": trailing bytes");
    return out;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw LoadError("cannot open " + p.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return buf;
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw LoadError("cannot write " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw LoadError("short write to " + p.string());
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

} // namespace

void write_dataset(const Dataset& data, const std::filesystem::path& dir) {
    data.cfg.validate();
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["format"] = "TLVD";
    manifest["version"] = 1;
    manifest["classes"] = data.cfg.classes;
    manifest["sensors"] = data.cfg.sensors;
    manifest["samples_per_cell"] = data.cfg.samples_per_cell;
    manifest["style_overlap"] = data.cfg.style_overlap;
    manifest["image_size"] = data.cfg.image_size;
    manifest["channels"] = data.cfg.channels;
    manifest["token_len"] = data.cfg.token_len();
    manifest["vocab_size"] = data.cfg.vocab_size();
    manifest["seed"] = data.cfg.seed;
    nlohmann::json splits = nlohmann::json::object();
    nlohmann::json hashes = nlohmann::json::object();
    const std::pair<const char*, const std::vector<Triplet>*> parts[] = {
        {"train", &data.train}, {"val", &data.val}, {"test", &data.test}};
    for (const auto& [name, vec] : parts) {
        const std::string bytes = encode_split(data, *vec);
        const std::string file = std::string(name) + ".bin";
        write_file(dir / file, bytes);
        splits[name] = {{"file", file}, {"count", vec->size()}};
        hashes[file] = hex64(fnv1a64(bytes));
    }
    manifest["splits"] = splits;
    manifest["hashes"] = hashes;
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("dataset manifest: " + std::string(e.what()));
    }
    Dataset data;
    try {
        if (manifest.at("format").get<std::string>() != "TLVD") throw LoadError("dataset manifest: wrong format tag");
        if (manifest.at("version").get<int>() != 1) throw LoadError("dataset manifest: unsupported version");
        data.cfg.classes = manifest.at("classes").get<int>();
        data.cfg.sensors = manifest.at("sensors").get<int>();
        data.cfg.samples_per_cell = manifest.at("samples_per_cell").get<int>();
        data.cfg.style_overlap = manifest.at("style_overlap").get<double>();
        data.cfg.image_size = manifest.at("image_size").get<int>();
        data.cfg.channels = manifest.at("channels").get<int>();
        data.cfg.seed = manifest.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("dataset manifest: " + std::string(e.what()));
    }
    data.cfg.validate();
    for (const char* name : {"train", "val", "test"}) {
        const auto& split = manifest.at("splits").at(name);
        const std::string file = split.at("file").get<std::string>();
        const std::string bytes = read_file(dir / file);
        const std::string want = manifest.at("hashes").at(file).get<std::string>();
        if (hex64(fnv1a64(bytes)) != want) throw LoadError(file + ": content hash mismatch");
        auto vec = decode_split(bytes, data.cfg, file.c_str());
        if (vec.size() != split.at("count").get<std::size_t>()) {
            throw LoadError(file + ": record count disagrees with manifest");
        }
        data.split(name); // validates the name
        (name == std::string("train") ? data.train : name == std::string("val") ? data.val : data.test) =
            std::move(vec);
    }
    return data;
}

} // namespace tlv
