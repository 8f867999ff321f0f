#include "tlv/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "tlv/errors.hpp"

namespace tlv {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("train: betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw ConfigError("train: adam_eps must be positive");
    if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
    if (!(clip_norm > 0.0)) throw ConfigError("train: clip_norm must be positive");
    if (grl_warmup_epochs < 0) throw ConfigError("train: grl_warmup_epochs must be >= 0");
    if (sensor_filter < -1) throw ConfigError("train: sensor_filter must be -1 or a sensor id");
    if (dataset_dir.empty()) throw ConfigError("train: dataset_dir must not be empty");
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

long long parse_ll(const std::string& s, const std::string& what) {
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno != 0 || end == s.c_str() || *end != '\0') {
        throw ConfigError(what + ": expected integer, got '" + s + "'");
    }
    return v;
}

int parse_int(const std::string& s, const std::string& what) {
    const long long v = parse_ll(s, what);
    if (v < -(1LL << 31) || v >= (1LL << 31)) throw ConfigError(what + ": integer out of range");
    return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (errno != 0 || end == s.c_str() || *end != '\0' || s.find('-') != std::string::npos) {
        throw ConfigError(what + ": expected unsigned integer, got '" + s + "'");
    }
    return v;
}

double parse_double(const std::string& s, const std::string& what) {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (errno != 0 || end == s.c_str() || *end != '\0') {
        throw ConfigError(what + ": expected number, got '" + s + "'");
    }
    return v;
}

bool parse_bool(const std::string& s, const std::string& what) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError(what + ": expected true/false, got '" + s + "'");
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct KeyDef {
    const char* section;
    const char* key;
    void (*set)(RunConfig&, const std::string&, const std::string&);
    std::string (*get)(const RunConfig&);
};

#define INT_KEY(sec, name, field)                                                      \
    KeyDef{sec, name,                                                                  \
           [](RunConfig& c, const std::string& v, const std::string& w) {              \
               c.field = parse_int(v, w);                                              \
           },                                                                          \
           [](const RunConfig& c) { return std::to_string(c.field); }}
#define U64_KEY(sec, name, field)                                                      \
    KeyDef{sec, name,                                                                  \
           [](RunConfig& c, const std::string& v, const std::string& w) {              \
               c.field = parse_u64(v, w);                                              \
           },                                                                          \
           [](const RunConfig& c) { return std::to_string(c.field); }}
#define DBL_KEY(sec, name, field)                                                      \
    KeyDef{sec, name,                                                                  \
           [](RunConfig& c, const std::string& v, const std::string& w) {              \
               c.field = parse_double(v, w);                                           \
           },                                                                          \
           [](const RunConfig& c) { return fmt_double(c.field); }}
#define BOOL_KEY(sec, name, field)                                                     \
    KeyDef{sec, name,                                                                  \
           [](RunConfig& c, const std::string& v, const std::string& w) {              \
               c.field = parse_bool(v, w);                                             \
           },                                                                          \
           [](const RunConfig& c) { return c.field ? std::string("true") : std::string("false"); }}
#define STR_KEY(sec, name, field)                                                      \
    KeyDef{sec, name,                                                                  \
           [](RunConfig& c, const std::string& v, const std::string&) { c.field = v; }, \
           [](const RunConfig& c) { return c.field; }}

const std::vector<KeyDef>& schema() {
    static const std::vector<KeyDef> defs = {
        INT_KEY("dataset", "classes", data.classes),
        INT_KEY("dataset", "sensors", data.sensors),
        INT_KEY("dataset", "samples_per_cell", data.samples_per_cell),
        DBL_KEY("dataset", "style_overlap", data.style_overlap),
        INT_KEY("dataset", "image_size", data.image_size),
        INT_KEY("dataset", "channels", data.channels),
        U64_KEY("dataset", "seed", data.seed),

        INT_KEY("model", "dim", model.dim),
        INT_KEY("model", "heads", model.heads),
        INT_KEY("model", "t_layers", model.t_layers),
        INT_KEY("model", "v_layers", model.v_layers),
        INT_KEY("model", "l_layers", model.l_layers),
        INT_KEY("model", "patch_size", model.patch_size),
        INT_KEY("model", "image_size", model.image_size),
        INT_KEY("model", "channels", model.channels),
        INT_KEY("model", "vocab_size", model.vocab_size),
        INT_KEY("model", "max_token_len", model.max_token_len),
        INT_KEY("model", "sensors", model.sensors),
        INT_KEY("model", "uba_levels", model.uba_levels),
        INT_KEY("model", "uba_rank", model.uba_rank),
        BOOL_KEY("model", "use_sam", model.use_sam),

        INT_KEY("train", "epochs", train.epochs),
        INT_KEY("train", "batch_size", train.batch_size),
        DBL_KEY("train", "lr", train.lr),
        DBL_KEY("train", "beta1", train.beta1),
        DBL_KEY("train", "beta2", train.beta2),
        DBL_KEY("train", "adam_eps", train.adam_eps),
        DBL_KEY("train", "weight_decay", train.weight_decay),
        DBL_KEY("train", "clip_norm", train.clip_norm),
        INT_KEY("train", "grl_warmup_epochs", train.grl_warmup_epochs),
        DBL_KEY("train", "lambda_dl", model.lambda_dl),
        DBL_KEY("train", "tau_cl", model.tau_cl),
        DBL_KEY("train", "tau_dl", model.tau_dl),
        DBL_KEY("train", "grl_lambda", model.grl_lambda),
        U64_KEY("train", "seed", train.seed),
        INT_KEY("train", "sensor_filter", train.sensor_filter),
        STR_KEY("train", "dataset_dir", train.dataset_dir),
    };
    return defs;
}

#undef INT_KEY
#undef U64_KEY
#undef DBL_KEY
#undef BOOL_KEY
#undef STR_KEY

const KeyDef* find_key(const std::string& section, const std::string& key) {
    for (const auto& d : schema()) {
        if (section == d.section && key == d.key) return &d;
    }
    return nullptr;
}

struct ParsedLine {
    std::string section, key, value;
};

// returns section/key/value triples; state_out receives [state] entries when
// allowed, otherwise their presence is an error
std::vector<ParsedLine> parse_ini(const std::string& text, bool allow_state,
                                  std::vector<ParsedLine>* state_out) {
    std::vector<ParsedLine> out;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t cut = line.find_first_of("#;");
        if (cut != std::string::npos) line = line.substr(0, cut);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "dataset" && section != "model" && section != "train" &&
                !(allow_state && section == "state")) {
                throw ConfigError("config line " + std::to_string(lineno) + ": unknown section [" + section + "]");
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        if (section.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": key outside any section");
        }
        ParsedLine pl{section, trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
        if (pl.key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (section == "state") {
            state_out->push_back(std::move(pl));
        } else {
            out.push_back(std::move(pl));
        }
    }
    return out;
}

void apply_lines(RunConfig& cfg, const std::vector<ParsedLine>& lines) {
    for (const auto& pl : lines) {
        const KeyDef* def = find_key(pl.section, pl.key);
        if (!def) throw ConfigError("unknown config key " + pl.section + "." + pl.key);
        def->set(cfg, pl.value, pl.section + "." + pl.key);
    }
}

} // namespace

RunConfig parse_config_text(const std::string& text, const RunConfig& base) {
    RunConfig cfg = base;
    apply_lines(cfg, parse_ini(text, false, nullptr));
    return cfg;
}

RunConfig load_config_file(const std::string& path, const RunConfig& base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), base);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override must look like section.key=value");
    const std::string dotted = trim(assignment.substr(0, eq));
    const std::string value = trim(assignment.substr(eq + 1));
    const std::size_t dot = dotted.find('.');
    if (dot == std::string::npos) throw ConfigError("override key must be section.key, got '" + dotted + "'");
    const std::string section = dotted.substr(0, dot);
    const std::string key = dotted.substr(dot + 1);
    const KeyDef* def = find_key(section, key);
    if (!def) throw ConfigError("unknown config key " + dotted);
    def->set(cfg, value, dotted);
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    const char* last_section = "";
    for (const auto& d : schema()) {
        if (std::string(last_section) != d.section) {
            if (*last_section) out << "\n";
            out << "[" << d.section << "]\n";
            last_section = d.section;
        }
        out << d.key << " = " << d.get(cfg) << "\n";
    }
    return out.str();
}

std::string serialize_config_with_state(const RunConfig& cfg, int epoch, std::int64_t step,
                                        std::int64_t adam_t) {
    std::ostringstream out;
    out << serialize_config(cfg);
    out << "\n[state]\n";
    out << "epoch = " << epoch << "\n";
    out << "step = " << step << "\n";
    out << "adam_t = " << adam_t << "\n";
    return out.str();
}

EchoState parse_config_echo(const std::string& text) {
    EchoState st;
    std::vector<ParsedLine> state_lines;
    const auto lines = parse_ini(text, true, &state_lines);
    apply_lines(st.cfg, lines);
    for (const auto& pl : state_lines) {
        if (pl.key == "epoch") {
            st.epoch = parse_int(pl.value, "state.epoch");
        } else if (pl.key == "step") {
            st.step = parse_ll(pl.value, "state.step");
        } else if (pl.key == "adam_t") {
            st.adam_t = parse_ll(pl.value, "state.adam_t");
        } else {
            throw ConfigError("unknown state key " + pl.key);
        }
    }
    return st;
}

void bind_model_to_data(ModelConfig& model, const DatasetConfig& data) {
    model.image_size = data.image_size;
    model.channels = data.channels;
    model.vocab_size = data.vocab_size();
    model.max_token_len = data.token_len();
    model.sensors = data.sensors;
}

bool deterministic_mode() {
    const char* v = std::getenv("TLV_CORE_DETERMINISTIC");
    return v != nullptr && std::string(v) == "1";
}

} // namespace tlv
