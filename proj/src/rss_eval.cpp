#include "tlv/rss_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

#include "tlv/errors.hpp"
#include "tlv/rng.hpp"
#include "tlv/trainer.hpp"

namespace tlv {

namespace {

// softmax regression weights fit with AdamW; shared by the probe and the
// sensor-information estimate
std::pair<Tensor, Tensor> fit_softmax(const Tensor& x, const std::vector<int>& y, int classes,
                                      const ProbeOptions& opts) {
    require_rank(x, 2, "fit_softmax");
    const int N = x.dim(0), d = x.dim(1);
    if (N == 0) throw DomainError("fit_softmax: empty training set");
    if (static_cast<int>(y.size()) != N) throw ShapeError("fit_softmax: one label per row required");
    if (classes < 2) throw DomainError("fit_softmax: need at least two classes");
    std::set<int> seen;
    for (int v : y) {
        if (v < 0 || v >= classes) throw DomainError("fit_softmax: label out of range");
        seen.insert(v);
    }
    if (seen.size() < 2) throw DomainError("degenerate task: training labels hold a single class");
    if (opts.epochs < 1 || opts.batch_size < 1) throw ConfigError("fit_softmax: bad probe options");

    std::vector<Parameter> params;
    Var W = make_leaf(Tensor::zeros({classes, d}));
    Var b = make_leaf(Tensor::zeros({classes}));
    params.push_back({"probe.w", W, true});
    params.push_back({"probe.b", b, true});
    AdamW opt(opts.lr, 0.9, 0.999, 1e-8, opts.weight_decay);

    std::vector<int> idx(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int e = 0; e < opts.epochs; ++e) {
        std::vector<int> order = idx;
        CounterRng rng = CounterRng::stream(opts.seed, "probe_shuffle", static_cast<std::uint64_t>(e));
        rng.shuffle(order);
        for (int lo = 0; lo < N; lo += opts.batch_size) {
            const int hi = std::min(N, lo + opts.batch_size);
            const int B = hi - lo;
            Tensor xb({B, d});
            std::vector<int> yb(static_cast<std::size_t>(B));
            for (int i = 0; i < B; ++i) {
                const int src = order[static_cast<std::size_t>(lo + i)];
                for (int c = 0; c < d; ++c) xb.at(i, c) = x.at(src, c);
                yb[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(src)];
            }
            zero_grads(params);
            Var logits = ops::linear(make_const(std::move(xb)), W, b);
            Var loss = ops::scale(ops::mean_all(ops::gather_rows(ops::log_softmax_rows(logits, 1.0), yb)), -1.0);
            backward(loss);
            opt.step(params);
        }
    }
    return {W->val, b->val};
}

int argmax_lowest(const double* v, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

// mean cross-entropy of the fitted weights on a held-out set
double softmax_ce(const Tensor& W, const Tensor& b, const Tensor& x, const std::vector<int>& y) {
    const int N = x.dim(0), d = x.dim(1), K = W.dim(0);
    double total = 0.0;
    std::vector<double> logits(static_cast<std::size_t>(K));
    for (int i = 0; i < N; ++i) {
        for (int k = 0; k < K; ++k) {
            double s = b[k];
            for (int c = 0; c < d; ++c) s += W.at(k, c) * x.at(i, c);
            logits[static_cast<std::size_t>(k)] = s;
        }
        double mx = logits[0];
        for (double v : logits) mx = std::max(mx, v);
        double z = 0.0;
        for (double v : logits) z += std::exp(v - mx);
        total += -(logits[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])] - mx - std::log(z));
    }
    return total / N;
}

} // namespace

ProbeResult linear_probe(const Tensor& train_x, const std::vector<int>& train_y, const Tensor& test_x,
                         const std::vector<int>& test_y, int num_classes, const ProbeOptions& opts) {
    require_rank(test_x, 2, "linear_probe test");
    if (test_x.dim(1) != train_x.dim(1)) throw ShapeError("linear_probe: train/test widths differ");
    if (test_x.dim(0) == 0 || static_cast<int>(test_y.size()) != test_x.dim(0)) {
        throw ShapeError("linear_probe: one label per test row required");
    }
    auto [W, b] = fit_softmax(train_x, train_y, num_classes, opts);
    const int N = test_x.dim(0), d = test_x.dim(1);
    int correct = 0;
    std::vector<double> logits(static_cast<std::size_t>(num_classes));
    for (int i = 0; i < N; ++i) {
        const int yt = test_y[static_cast<std::size_t>(i)];
        if (yt < 0 || yt >= num_classes) throw DomainError("linear_probe: test label out of range");
        for (int k = 0; k < num_classes; ++k) {
            double s = b[k];
            for (int c = 0; c < d; ++c) s += W.at(k, c) * test_x.at(i, c);
            logits[static_cast<std::size_t>(k)] = s;
        }
        if (argmax_lowest(logits.data(), num_classes) == yt) ++correct;
    }
    ProbeResult out;
    out.accuracy = static_cast<double>(correct) / N;
    out.n_test = N;
    out.classes = num_classes;
    return out;
}

MiEstimate estimate_sensor_mi(const Tensor& embeddings, const std::vector<int>& sensor_ids, int sensors,
                              std::uint64_t seed) {
    require_rank(embeddings, 2, "estimate_sensor_mi");
    const int N = embeddings.dim(0), d = embeddings.dim(1);
    if (static_cast<int>(sensor_ids.size()) != N) throw ShapeError("estimate_sensor_mi: one sensor id per row");
    if (sensors < 2) throw DomainError("estimate_sensor_mi: need at least two sensors");
    std::vector<std::vector<int>> by_sensor(static_cast<std::size_t>(sensors));
    for (int i = 0; i < N; ++i) {
        const int s = sensor_ids[static_cast<std::size_t>(i)];
        if (s < 0 || s >= sensors) throw DomainError("estimate_sensor_mi: sensor id out of range");
        by_sensor[static_cast<std::size_t>(s)].push_back(i);
    }
    std::size_t mn = by_sensor[0].size(), mx = by_sensor[0].size();
    for (const auto& v : by_sensor) {
        mn = std::min(mn, v.size());
        mx = std::max(mx, v.size());
    }
    if (mn < 50) {
        throw DomainError("estimate_sensor_mi: need at least 50 samples per sensor, got " +
                          std::to_string(mn));
    }
    MiEstimate out;
    out.imbalance_warning = mx > 10 * mn;

    std::vector<int> fit_idx, held_idx;
    for (int s = 0; s < sensors; ++s) {
        auto rows = by_sensor[static_cast<std::size_t>(s)];
        CounterRng rng = CounterRng::stream(seed, "mi_split", static_cast<std::uint64_t>(s));
        rng.shuffle(rows);
        const std::size_t held = rows.size() / 5;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            (i < held ? held_idx : fit_idx).push_back(rows[i]);
        }
    }
    auto gather = [&](const std::vector<int>& rows, Tensor& x, std::vector<int>& y) {
        x = Tensor({static_cast<int>(rows.size()), d});
        y.resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (int c = 0; c < d; ++c) x.at(static_cast<int>(i), c) = embeddings.at(rows[i], c);
            y[i] = sensor_ids[static_cast<std::size_t>(rows[i])];
        }
    };
    Tensor fx, hx;
    std::vector<int> fy, hy;
    gather(fit_idx, fx, fy);
    gather(held_idx, hx, hy);
    ProbeOptions opts;
    opts.seed = seed;
    auto [W, b] = fit_softmax(fx, fy, sensors, opts);
    const double ce = softmax_ce(W, b, hx, hy);
    const double cap = std::log(static_cast<double>(sensors));
    out.proxy = std::clamp(cap - ce, 0.0, cap);
    return out;
}

double gradient_variance(ModelState& model, const Dataset& data, int batch_size, int n_trials,
                         std::uint64_t seed) {
    if (n_trials < 2) throw DomainError("gradient_variance: need at least two trials");
    if (batch_size < 1) throw ConfigError("gradient_variance: batch_size must be positive");
    if (static_cast<int>(data.train.size()) < batch_size) {
        throw DomainError("gradient_variance: batch_size exceeds training split");
    }
    auto& params = model.params();
    std::int64_t P = 0;
    for (const auto& p : params) {
        if (p.trainable) P += p.node->val.numel();
    }
    std::vector<double> sum(static_cast<std::size_t>(P), 0.0), sumsq(static_cast<std::size_t>(P), 0.0);
    std::vector<int> base(data.train.size());
    for (std::size_t i = 0; i < base.size(); ++i) base[i] = static_cast<int>(i);
    for (int trial = 0; trial < n_trials; ++trial) {
        std::vector<int> idx = base;
        CounterRng rng = CounterRng::stream(seed, "gradvar", static_cast<std::uint64_t>(trial));
        rng.shuffle(idx);
        std::vector<const Triplet*> batch;
        batch.reserve(static_cast<std::size_t>(batch_size));
        for (int j = 0; j < batch_size; ++j) batch.push_back(&data.train[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])]);
        zero_grads(params);
        ModelState::Losses ls = model.batch_loss(batch);
        backward(ls.total);
        std::size_t k = 0;
        for (const auto& p : params) {
            if (!p.trainable) continue;
            for (std::int64_t j = 0; j < p.node->grad.numel(); ++j, ++k) {
                const double g = p.node->grad[j];
                sum[k] += g;
                sumsq[k] += g * g;
            }
        }
    }
    double acc = 0.0;
    const double n = static_cast<double>(n_trials);
    for (std::size_t k = 0; k < sum.size(); ++k) {
        const double var = (sumsq[k] - sum[k] * sum[k] / n) / (n - 1.0);
        acc += std::max(0.0, var);
    }
    return acc / static_cast<double>(P);
}

double condition_number(const Tensor& w) {
    require_rank(w, 2, "condition_number");
    const int r = w.dim(0);
    if (w.dim(1) != r) throw ShapeError("condition_number: matrix must be square");
    bool any = false;
    for (std::int64_t i = 0; i < w.numel(); ++i) {
        if (w[i] != 0.0) {
            any = true;
            break;
        }
    }
    if (!any) throw DegenerateInputError("condition_number: zero matrix");

    Tensor A({r, r});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) {
            double s = 0.0;
            for (int k = 0; k < r; ++k) s += w.at(k, i) * w.at(k, j);
            A.at(i, j) = s;
        }

    auto rayleigh_power = [r](const Tensor& M) -> double {
        CounterRng rng = CounterRng::stream(42, "condnum_v0");
        std::vector<double> v(static_cast<std::size_t>(r));
        double nv = 0.0;
        for (auto& x : v) {
            x = rng.next_gaussian(0.0, 1.0);
            nv += x * x;
        }
        nv = std::sqrt(nv);
        for (auto& x : v) x /= nv;
        std::vector<double> mv(static_cast<std::size_t>(r));
        double lam = 0.0;
        for (int it = 0; it < 5000; ++it) {
            double norm2 = 0.0;
            for (int i = 0; i < r; ++i) {
                double s = 0.0;
                for (int j = 0; j < r; ++j) s += M.at(i, j) * v[static_cast<std::size_t>(j)];
                mv[static_cast<std::size_t>(i)] = s;
                norm2 += s * s;
            }
            const double norm = std::sqrt(norm2);
            if (norm < 1e-300) return 0.0; // M annihilates the iterate
            double quot = 0.0;
            for (int i = 0; i < r; ++i) quot += v[static_cast<std::size_t>(i)] * mv[static_cast<std::size_t>(i)];
            for (int i = 0; i < r; ++i) v[static_cast<std::size_t>(i)] = mv[static_cast<std::size_t>(i)] / norm;
            if (it > 8 && std::abs(quot - lam) <= 1e-15 * std::max(1.0, std::abs(quot))) {
                return quot;
            }
            lam = quot;
        }
        return lam;
    };

    const double lmax = rayleigh_power(A);
    if (!(lmax > 0.0)) throw DegenerateInputError("condition_number: spectral estimate collapsed");
    Tensor B({r, r});
    const double shift = lmax * (1.0 + 1e-12);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) B.at(i, j) = (i == j ? shift : 0.0) - A.at(i, j);
    const double mu = rayleigh_power(B);
    const double lmin = std::max(0.0, shift - mu);
    if (lmin <= lmax * 1e-13) return std::numeric_limits<double>::infinity();
    return std::sqrt(lmax / lmin);
}

Protocol protocol_from_name(const std::string& name) {
    if (name == "intra") return Protocol::intra;
    if (name == "cross") return Protocol::cross;
    if (name == "multi") return Protocol::multi;
    if (name == "synergy") return Protocol::synergy;
    throw ConfigError("unknown protocol '" + name + "'");
}

const char* protocol_name(Protocol p) {
    switch (p) {
        case Protocol::intra: return "intra";
        case Protocol::cross: return "cross";
        case Protocol::multi: return "multi";
        case Protocol::synergy: return "synergy";
    }
    return "?";
}

namespace {

enum class Tower { tactile, vision_on_tactile, tactile_on_vision };

const char* tower_name(Tower t) {
    switch (t) {
        case Tower::tactile: return "tactile";
        case Tower::vision_on_tactile: return "vision_on_tactile";
        case Tower::tactile_on_vision: return "tactile_on_vision";
    }
    return "?";
}

std::vector<int> sensor_slice(const std::vector<Triplet>& split, int sensor) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < split.size(); ++i) {
        if (sensor == -1 || split[i].sensor == sensor) idx.push_back(static_cast<int>(i));
    }
    return idx;
}

Tensor embed_slice(const ModelState& model, const std::vector<Triplet>& split, const std::vector<int>& idx,
                   Tower tower) {
    if (idx.empty()) throw DomainError("eval_rss: empty sensor slice");
    const int d = model.config().dim;
    Tensor out({static_cast<int>(idx.size()), d});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const Triplet& t = split[static_cast<std::size_t>(idx[i])];
        Tensor z;
        switch (tower) {
            case Tower::tactile: z = model.embed_tactile(t.tactile, t.sensor); break;
            case Tower::vision_on_tactile: z = model.embed_with_vision_tower(t.tactile); break;
            case Tower::tactile_on_vision: z = model.embed_with_tactile_tower(t.vision, t.sensor); break;
        }
        for (int c = 0; c < d; ++c) out.at(static_cast<int>(i), c) = z[c];
    }
    return out;
}

struct Task {
    const char* name;
    int classes;
    int (*label)(const Triplet&);
};

const Task kTasks[] = {
    {"material", 0, [](const Triplet& t) { return t.label; }},
    {"roughness", 2, [](const Triplet& t) { return t.rough; }},
    {"hardness", 2, [](const Triplet& t) { return t.hard; }},
};

std::vector<int> task_labels(const std::vector<Triplet>& split, const std::vector<int>& idx,
                             const Task& task) {
    std::vector<int> y;
    y.reserve(idx.size());
    for (int i : idx) y.push_back(task.label(split[static_cast<std::size_t>(i)]));
    return y;
}

void probe_sensor_block(const ModelState& model, const Dataset& data, int sensor, Tower tower,
                        const char* protocol, const std::string& sensor_str, const RssOptions& opts,
                        std::vector<RssRow>& rows) {
    const auto train_idx = sensor_slice(data.train, sensor);
    const auto test_idx = sensor_slice(data.test, sensor);
    const Tensor train_x = embed_slice(model, data.train, train_idx, tower);
    const Tensor test_x = embed_slice(model, data.test, test_idx, tower);
    for (const Task& task : kTasks) {
        const int classes = task.classes == 0 ? data.cfg.classes : task.classes;
        const ProbeResult pr =
            linear_probe(train_x, task_labels(data.train, train_idx, task), test_x,
                         task_labels(data.test, test_idx, task), classes, opts.probe);
        rows.push_back(RssRow{protocol, task.name, tower_name(tower), sensor_str, pr.accuracy, pr.n_test});
    }
}

} // namespace

std::vector<RssRow> eval_rss(const ModelState& model, const Dataset& data, int train_sensor_filter,
                             const RssOptions& opts) {
    if (opts.protocols.empty()) throw ConfigError("eval_rss: no protocols requested");
    if (train_sensor_filter != -1 &&
        (train_sensor_filter < 0 || train_sensor_filter >= data.cfg.sensors)) {
        throw ConfigError("eval_rss: sensor filter outside the dataset's sensors");
    }
    std::vector<RssRow> rows;
    for (Protocol p : opts.protocols) {
        switch (p) {
            case Protocol::intra: {
                const std::string sensor_str =
                    train_sensor_filter == -1 ? "all" : std::to_string(train_sensor_filter);
                probe_sensor_block(model, data, train_sensor_filter, Tower::tactile, "intra", sensor_str,
                                   opts, rows);
                break;
            }
            case Protocol::cross: {
                if (train_sensor_filter == -1) {
                    throw ConfigError("eval_rss: cross protocol needs a model trained with a sensor filter");
                }
                for (int s = 0; s < data.cfg.sensors; ++s) {
                    if (s == train_sensor_filter) continue;
                    probe_sensor_block(model, data, s, Tower::tactile, "cross", std::to_string(s), opts,
                                       rows);
                }
                break;
            }
            case Protocol::multi: {
                if (train_sensor_filter != -1) {
                    throw ConfigError("eval_rss: multi protocol needs a model trained on every sensor");
                }
                for (int s = 0; s < data.cfg.sensors; ++s) {
                    probe_sensor_block(model, data, s, Tower::tactile, "multi", std::to_string(s), opts,
                                       rows);
                }
                break;
            }
            case Protocol::synergy: {
                probe_sensor_block(model, data, -1, Tower::vision_on_tactile, "synergy", "all", opts, rows);
                probe_sensor_block(model, data, -1, Tower::tactile_on_vision, "synergy", "all", opts, rows);
                break;
            }
        }
    }
    return rows;
}

void write_rss_csv(const std::filesystem::path& path, const std::vector<RssRow>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw LoadError("rss: cannot write " + path.string());
    out << "protocol,task,encoder,sensor,accuracy,n_test\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%d\n", r.accuracy, r.n_test);
        out << r.protocol << "," << r.task << "," << r.encoder << "," << r.sensor << "," << buf;
    }
    if (!out) throw LoadError("rss: short write to " + path.string());
}

std::vector<RssRow> read_rss_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("rss: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "protocol,task,encoder,sensor,accuracy,n_test") {
        throw LoadError("rss: unexpected header in " + path.string());
    }
    std::vector<RssRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        RssRow r;
        std::size_t pos = 0;
        auto field = [&]() {
            const std::size_t cut = line.find(',', pos);
            if (cut == std::string::npos) throw LoadError("rss: malformed row '" + line + "'");
            std::string s = line.substr(pos, cut - pos);
            pos = cut + 1;
            return s;
        };
        r.protocol = field();
        r.task = field();
        r.encoder = field();
        r.sensor = field();
        const std::string acc = field();
        r.accuracy = std::strtod(acc.c_str(), nullptr);
        r.n_test = std::atoi(line.c_str() + pos);
        rows.push_back(std::move(r));
    }
    return rows;
}

StabilityResult eval_stability(const RunConfig& base, const Dataset& data,
                               const std::vector<int>& batch_sizes, const ProbeOptions& probe) {
    if (batch_sizes.empty()) throw ConfigError("eval_stability: no batch sizes given");
    StabilityResult out;
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    for (int size : batch_sizes) {
        if (size < 1) throw ConfigError("eval_stability: batch sizes must be positive");
        RunConfig cfg = base;
        cfg.train.batch_size = size;
        TrainSession session(cfg);
        session.run(data);
        const auto train_idx = sensor_slice(data.train, -1);
        const auto test_idx = sensor_slice(data.test, -1);
        const Tensor train_x = embed_slice(session.model(), data.train, train_idx, Tower::tactile);
        const Tensor test_x = embed_slice(session.model(), data.test, test_idx, Tower::tactile);
        const ProbeResult pr = linear_probe(train_x, task_labels(data.train, train_idx, kTasks[0]), test_x,
                                            task_labels(data.test, test_idx, kTasks[0]), data.cfg.classes,
                                            probe);
        out.rows.push_back(StabilityRow{size, pr.accuracy, pr.n_test});
        mn = std::min(mn, pr.accuracy);
        mx = std::max(mx, pr.accuracy);
    }
    out.spread = mx - mn;
    return out;
}

void write_stability_csv(const std::filesystem::path& path, const StabilityResult& result) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw LoadError("stability: cannot write " + path.string());
    out << "batch_size,accuracy,n_test\n";
    char buf[96];
    for (const auto& r : result.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%d\n", r.batch_size, r.accuracy, r.n_test);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "# spread = %.17g\n", result.spread);
    out << buf;
    if (!out) throw LoadError("stability: short write to " + path.string());
}

} // namespace tlv
