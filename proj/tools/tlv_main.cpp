#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tlv/checkpoint.hpp"
#include "tlv/config.hpp"
#include "tlv/errors.hpp"
#include "tlv/manifest.hpp"
#include "tlv/model.hpp"
#include "tlv/numerics.hpp"
#include "tlv/rss_eval.hpp"
#include "tlv/synthdata.hpp"
#include "tlv/trainer.hpp"

namespace fs = std::filesystem;
using namespace tlv;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int jobs = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o, const std::string& default_out) {
    o.out = default_out;
    cmd->add_option("--config", o.config_path, "config file (INI sections: dataset/model/train)");
    cmd->add_option("--set", o.sets, "override, e.g. --set train.lr=1e-3")->take_all();
    cmd->add_option("--out", o.out, "output directory")->capture_default_str();
    cmd->add_option("--seed", o.seed, "root seed (sets dataset.seed and train.seed)")
        ->each([&o](const std::string&) { o.seed_given = true; });
    cmd->add_option("--jobs", o.jobs, "max parallel runs for sweeps")->check(CLI::PositiveNumber);
}

RunConfig resolve_config(const CommonOpts& o) {
    RunConfig cfg;
    if (!o.config_path.empty()) cfg = load_config_file(o.config_path, cfg);
    for (const auto& s : o.sets) apply_override(cfg, s);
    if (o.seed_given) {
        cfg.data.seed = o.seed;
        cfg.train.seed = o.seed;
    }
    return cfg;
}

int effective_jobs(int requested) {
    if (deterministic_mode()) return 1;
    return std::max(1, requested);
}

void run_parallel(std::vector<std::function<void()>>& tasks, int jobs) {
    jobs = std::min<int>(jobs, static_cast<int>(tasks.size()));
    if (jobs <= 1) {
        for (auto& t : tasks) t();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(tasks.size());
    for (int w = 0; w < jobs; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= tasks.size()) return;
                try {
                    tasks[i]();
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

Dataset load_bound_dataset(RunConfig& cfg) {
    Dataset data = read_dataset(cfg.train.dataset_dir);
    bind_model_to_data(cfg.model, data.cfg);
    return data;
}

double probe_material_accuracy(const ModelState& model, const Dataset& data, std::uint64_t seed) {
    RssOptions opts;
    opts.protocols = {Protocol::intra};
    opts.probe.seed = seed;
    const auto rows = eval_rss(model, data, -1, opts);
    for (const auto& r : rows) {
        if (r.task == "material") return r.accuracy;
    }
    throw DomainError("probe: no material row produced");
}

int cmd_gen_data(const CommonOpts& o) {
    RunConfig cfg = resolve_config(o);
    const Dataset data = generate_dataset(cfg.data);
    write_dataset(data, o.out);
    RunManifest m;
    m.command = "gen-data";
    m.timestamp = iso8601_utc_now();
    m.seed = cfg.data.seed;
    m.config = config_to_json(cfg);
    m.outputs = {"manifest.json", "train.bin", "val.bin", "test.bin"};
    m.extra["counts"] = {{"train", data.train.size()}, {"val", data.val.size()}, {"test", data.test.size()}};
    write_run_manifest(o.out, m);
    std::cout << "wrote dataset to " << o.out << " (train=" << data.train.size()
              << " val=" << data.val.size() << " test=" << data.test.size() << ")\n";
    return 0;
}

int cmd_train(const CommonOpts& o, const std::string& resume_path) {
    std::unique_ptr<TrainSession> session;
    RunConfig cfg;
    if (!resume_path.empty()) {
        if (!o.config_path.empty() || !o.sets.empty() || o.seed_given) {
            throw ConfigError("train: --resume continues the saved configuration; drop --config/--set/--seed");
        }
        session = std::make_unique<TrainSession>(load_checkpoint(resume_path));
        cfg = session->config();
    } else {
        cfg = resolve_config(o);
    }
    Dataset data = read_dataset(cfg.train.dataset_dir);
    if (!session) {
        bind_model_to_data(cfg.model, data.cfg);
        session = std::make_unique<TrainSession>(cfg);
        cfg = session->config();
    }
    const auto metrics = session->run(data);
    fs::create_directories(o.out);
    write_metrics_csv(fs::path(o.out) / "metrics.csv", metrics);
    save_checkpoint(session->snapshot(), fs::path(o.out) / "model.tlvc");
    RunManifest m;
    m.command = "train";
    m.timestamp = iso8601_utc_now();
    m.seed = cfg.train.seed;
    m.config = config_to_json(cfg);
    m.inputs["dataset"] = cfg.train.dataset_dir;
    if (!resume_path.empty()) m.inputs["resume"] = resume_path;
    m.outputs = {"metrics.csv", "model.tlvc"};
    m.extra["steps"] = session->step();
    m.extra["epochs"] = session->epoch();
    if (!metrics.empty()) m.extra["final_l_total"] = metrics.back().l_total;
    write_run_manifest(o.out, m);
    if (!metrics.empty()) {
        std::printf("trained %d epochs, %lld steps, final l_total=%.6f\n", session->epoch(),
                    static_cast<long long>(session->step()), metrics.back().l_total);
    } else {
        std::printf("nothing to train: checkpoint already at epoch %d\n", session->epoch());
    }
    return 0;
}

int cmd_eval_rss(const CommonOpts& o, const std::string& ckpt_path, const std::string& data_dir,
                 const std::string& protocols_csv, int trials, bool no_theory) {
    TrainSession session(load_checkpoint(ckpt_path));
    const RunConfig& cfg = session.config();
    const std::string dir = data_dir.empty() ? cfg.train.dataset_dir : data_dir;
    Dataset data = read_dataset(dir);
    if (data.cfg.sensors != cfg.model.sensors) {
        throw ConfigError("eval-rss: dataset sensor count does not match the checkpointed model");
    }
    const int filter = cfg.train.sensor_filter;
    RssOptions opts;
    opts.probe.seed = o.seed_given ? o.seed : 0;
    if (protocols_csv.empty()) {
        opts.protocols = filter == -1
                             ? std::vector<Protocol>{Protocol::intra, Protocol::multi, Protocol::synergy}
                             : std::vector<Protocol>{Protocol::intra, Protocol::cross, Protocol::synergy};
    } else {
        opts.protocols.clear();
        for (const auto& name : split_csv(protocols_csv)) opts.protocols.push_back(protocol_from_name(name));
    }
    const auto rows = eval_rss(session.model(), data, filter, opts);
    fs::create_directories(o.out);
    write_rss_csv(fs::path(o.out) / "rss.csv", rows);

    int theory_rows = 0;
    if (!no_theory) {
        std::ofstream th(fs::path(o.out) / "theory.csv", std::ios::trunc);
        th << "metric,scope,value\n";
        char buf[128];
        // the mi bound needs every sensor trained on and enough rows per
        // sensor; skip the row (with a note) when the dataset cannot support it
        if (filter == -1 && data.train.size() / static_cast<std::size_t>(data.cfg.sensors) >= 50) {
            const auto idx = training_indices(data, -1);
            Tensor emb({static_cast<int>(idx.size()), cfg.model.dim});
            std::vector<int> sensors;
            sensors.reserve(idx.size());
            for (std::size_t i = 0; i < idx.size(); ++i) {
                const Triplet& t = data.train[static_cast<std::size_t>(idx[i])];
                const Tensor z = session.model().embed_tactile(t.tactile, t.sensor);
                for (int c = 0; c < cfg.model.dim; ++c) emb.at(static_cast<int>(i), c) = z[c];
                sensors.push_back(t.sensor);
            }
            const MiEstimate mi = estimate_sensor_mi(emb, sensors, data.cfg.sensors, opts.probe.seed);
            std::snprintf(buf, sizeof(buf), "mi_proxy,train,%.17g\n", mi.proxy);
            th << buf;
            ++theory_rows;
            if (mi.imbalance_warning) std::cerr << "warning: sensor classes imbalanced beyond 10:1\n";
        } else if (filter == -1) {
            std::cerr << "note: dataset too small for the sensor-mi bound; skipping mi_proxy\n";
        }
        const double gv = gradient_variance(session.model(), data, cfg.train.batch_size, trials,
                                            opts.probe.seed);
        std::snprintf(buf, sizeof(buf), "grad_variance,batch=%d,%.17g\n", cfg.train.batch_size, gv);
        th << buf;
        ++theory_rows;
        const auto& uba = session.model().uba();
        for (std::size_t lv = 0; lv < uba.levels.size(); ++lv) {
            const double kappa = condition_number(uba.levels[lv].w_sh->val);
            std::snprintf(buf, sizeof(buf), "kappa,level=%zu,%.17g\n", lv, kappa);
            th << buf;
            ++theory_rows;
        }
        if (!th) throw LoadError("eval-rss: short write to theory.csv");
    }

    RunManifest m;
    m.command = "eval-rss";
    m.timestamp = iso8601_utc_now();
    m.seed = opts.probe.seed;
    m.config = config_to_json(cfg);
    m.inputs["checkpoint"] = ckpt_path;
    m.inputs["dataset"] = dir;
    m.outputs = {"rss.csv"};
    if (!no_theory) m.outputs.push_back("theory.csv");
    m.extra["cells"] = rows.size();
    m.extra["theory_rows"] = theory_rows;
    write_run_manifest(o.out, m);
    std::cout << "wrote " << rows.size() << " probe rows to " << o.out << "/rss.csv\n";
    return 0;
}

int cmd_sweep_batch(const CommonOpts& o, const std::string& sizes_csv) {
    RunConfig cfg = resolve_config(o);
    Dataset data = load_bound_dataset(cfg);
    std::vector<int> sizes;
    for (const auto& s : split_csv(sizes_csv)) sizes.push_back(std::stoi(s));
    if (sizes.empty()) throw ConfigError("sweep-batch: --sizes must list at least one batch size");

    StabilityResult result;
    result.rows.resize(sizes.size());
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        tasks.push_back([&, i] {
            RunConfig c = cfg;
            c.train.batch_size = sizes[i];
            TrainSession session(c);
            session.run(data);
            const double acc = probe_material_accuracy(session.model(), data, cfg.train.seed);
            result.rows[i] = StabilityRow{sizes[i], acc, static_cast<int>(data.test.size())};
        });
    }
    run_parallel(tasks, effective_jobs(o.jobs));
    double mn = result.rows[0].accuracy, mx = result.rows[0].accuracy;
    for (const auto& r : result.rows) {
        mn = std::min(mn, r.accuracy);
        mx = std::max(mx, r.accuracy);
    }
    result.spread = mx - mn;
    fs::create_directories(o.out);
    write_stability_csv(fs::path(o.out) / "stability.csv", result);
    RunManifest m;
    m.command = "sweep-batch";
    m.timestamp = iso8601_utc_now();
    m.seed = cfg.train.seed;
    m.config = config_to_json(cfg);
    m.inputs["dataset"] = cfg.train.dataset_dir;
    m.outputs = {"stability.csv"};
    m.extra["cells"] = result.rows.size();
    m.extra["spread"] = result.spread;
    write_run_manifest(o.out, m);
    std::printf("accuracy spread over %zu batch sizes: %.4f\n", result.rows.size(), result.spread);
    return 0;
}

int cmd_ablate(const CommonOpts& o, const std::string& knob, const std::string& values_csv) {
    RunConfig cfg = resolve_config(o);
    Dataset data = load_bound_dataset(cfg);

    struct Variant {
        std::string value;
        RunConfig cfg;
    };
    std::vector<Variant> variants;
    variants.push_back({"baseline", cfg});
    if (knob == "no-sam") {
        RunConfig c = cfg;
        c.model.use_sam = false;
        variants.push_back({"off", c});
    } else if (knob == "no-dl") {
        RunConfig c = cfg;
        c.model.lambda_dl = 0.0;
        variants.push_back({"off", c});
    } else if (knob == "no-uba") {
        RunConfig c = cfg;
        c.model.uba_levels = 0;
        variants.push_back({"off", c});
    } else if (knob == "lambda_dl" || knob == "n_uba" || knob == "d_shared") {
        if (values_csv.empty()) throw ConfigError("ablate: --values required for knob " + knob);
        for (const auto& v : split_csv(values_csv)) {
            RunConfig c = cfg;
            if (knob == "lambda_dl") {
                c.model.lambda_dl = std::stod(v);
            } else if (knob == "n_uba") {
                c.model.uba_levels = std::stoi(v);
            } else {
                c.model.uba_rank = std::stoi(v);
            }
            variants.push_back({v, c});
        }
    } else {
        throw ConfigError("ablate: unknown knob '" + knob +
                          "' (expected no-sam, no-dl, no-uba, lambda_dl, n_uba, d_shared)");
    }

    struct Row {
        std::string value, task;
        double accuracy;
        int n_test;
    };
    std::vector<std::vector<Row>> all(variants.size());
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < variants.size(); ++i) {
        tasks.push_back([&, i] {
            TrainSession session(variants[i].cfg);
            session.run(data);
            RssOptions opts;
            opts.protocols = {Protocol::intra};
            opts.probe.seed = cfg.train.seed;
            for (const auto& r : eval_rss(session.model(), data, -1, opts)) {
                all[i].push_back(Row{variants[i].value, r.task, r.accuracy, r.n_test});
            }
        });
    }
    run_parallel(tasks, effective_jobs(o.jobs));

    fs::create_directories(o.out);
    std::ofstream out(fs::path(o.out) / "ablate.csv", std::ios::trunc);
    out << "knob,value,task,accuracy,n_test\n";
    char buf[160];
    std::size_t rows = 0;
    for (const auto& vec : all) {
        for (const auto& r : vec) {
            std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.17g,%d\n", knob.c_str(), r.value.c_str(),
                          r.task.c_str(), r.accuracy, r.n_test);
            out << buf;
            ++rows;
        }
    }
    if (!out) throw LoadError("ablate: short write to ablate.csv");
    RunManifest m;
    m.command = "ablate";
    m.timestamp = iso8601_utc_now();
    m.seed = cfg.train.seed;
    m.config = config_to_json(cfg);
    m.inputs["dataset"] = cfg.train.dataset_dir;
    m.outputs = {"ablate.csv"};
    m.extra["cells"] = rows;
    m.extra["knob"] = knob;
    write_run_manifest(o.out, m);
    std::cout << "wrote " << rows << " ablation rows to " << o.out << "/ablate.csv\n";
    return 0;
}

int cmd_grad_check(int seeds, double eps, int coords) {
    DatasetConfig dc;
    dc.classes = 2;
    dc.sensors = 2;
    dc.samples_per_cell = 10;
    dc.image_size = 8;
    dc.channels = 3;
    dc.seed = 11;
    ModelConfig mc;
    mc.dim = 8;
    mc.heads = 2;
    mc.t_layers = 2;
    mc.v_layers = 2;
    mc.l_layers = 2;
    mc.patch_size = 4;
    mc.uba_levels = 2;
    mc.uba_rank = 4;
    // the reversal layer's backward is deliberately not the derivative of the
    // forward value, so the difference oracle runs with the adversarial term
    // off; the reversal contract has its own oracle in the test suite
    mc.lambda_dl = 0.0;
    bind_model_to_data(mc, dc);
    const Triplet a = render_triplet(dc, 0, 0, 0);
    const Triplet b = render_triplet(dc, 1, 1, 0);
    const std::vector<const Triplet*> batch = {&a, &b};
    double worst = 0.0;
    for (int s = 0; s < seeds; ++s) {
        ModelState model(mc, static_cast<std::uint64_t>(s) + 1);
        FiniteDiffOptions opts;
        opts.eps = eps;
        opts.max_coords_per_param = coords;
        opts.seed = static_cast<std::uint64_t>(s);
        const double err = finite_diff_check(
            [&] { return model.batch_loss(batch).total; }, model.params(), opts);
        worst = std::max(worst, err);
    }
    std::printf("max_rel_error = %.3e over %d seeds (threshold 1e-4)\n", worst, seeds);
    return worst < 1e-4 ? 0 : 2;
}

int cmd_report(const std::string& dir, const std::string& out_dir) {
    if (!fs::is_directory(dir)) throw ConfigError("report: not a directory: " + dir);
    std::vector<fs::path> manifest_dirs;
    const fs::path out_abs = fs::weakly_canonical(out_dir);
    for (auto it = fs::recursive_directory_iterator(dir); it != fs::recursive_directory_iterator(); ++it) {
        if (it->is_regular_file() && it->path().filename() == "run_manifest.json") {
            if (fs::weakly_canonical(it->path().parent_path()) == out_abs) continue;
            manifest_dirs.push_back(it->path().parent_path());
        }
    }
    std::sort(manifest_dirs.begin(), manifest_dirs.end());
    if (manifest_dirs.empty()) throw ConfigError("report: no run_manifest.json found under " + dir);

    std::ostringstream summary;
    std::vector<std::pair<std::string, RssRow>> merged;
    std::vector<std::string> convergence_lines;
    std::size_t expected_cells = 0;
    std::size_t runs = 0;
    for (const auto& mdir : manifest_dirs) {
        const nlohmann::json j = read_run_manifest(mdir);
        const std::string command = j.value("command", "?");
        if (command == "report") continue;
        ++runs;
        const std::string rel = fs::relative(mdir, dir).string();
        summary << rel << ": " << command << " seed=" << j.value("seed", 0ull);
        if (j.contains("cells")) summary << " cells=" << j["cells"].get<std::size_t>();
        summary << "\n";
        if (j.contains("cells") && fs::exists(mdir / "rss.csv")) {
            expected_cells += j["cells"].get<std::size_t>();
            for (const auto& row : read_rss_csv(mdir / "rss.csv")) merged.emplace_back(rel, row);
        }
        if (fs::exists(mdir / "metrics.csv")) {
            const auto means = per_epoch_mean_total(read_metrics_csv(mdir / "metrics.csv"));
            for (std::size_t e = 0; e < means.size(); ++e) {
                char buf[128];
                std::snprintf(buf, sizeof(buf), "%s,%zu,%.17g", rel.c_str(), e, means[e]);
                convergence_lines.push_back(buf);
            }
        }
    }
    if (runs == 0) throw ConfigError("report: no non-report runs under " + dir);
    std::sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) {
        const auto key = [](const auto& p) {
            return std::tie(p.first, p.second.protocol, p.second.task, p.second.encoder, p.second.sensor);
        };
        return key(a) < key(b);
    });
    if (merged.size() != expected_cells) {
        throw LoadError("report: merged rss rows (" + std::to_string(merged.size()) +
                        ") disagree with manifest cell counts (" + std::to_string(expected_cells) + ")");
    }

    fs::create_directories(out_dir);
    {
        std::ofstream f(fs::path(out_dir) / "rss_all.csv", std::ios::trunc);
        f << "run,protocol,task,encoder,sensor,accuracy,n_test\n";
        char buf[160];
        for (const auto& [run, r] : merged) {
            std::snprintf(buf, sizeof(buf), "%.17g,%d\n", r.accuracy, r.n_test);
            f << run << "," << r.protocol << "," << r.task << "," << r.encoder << "," << r.sensor << ","
              << buf;
        }
    }
    if (!convergence_lines.empty()) {
        std::ofstream f(fs::path(out_dir) / "convergence.csv", std::ios::trunc);
        f << "run,epoch,mean_l_total\n";
        for (const auto& line : convergence_lines) f << line << "\n";
    }
    {
        std::ofstream f(fs::path(out_dir) / "summary.txt", std::ios::trunc);
        f << "runs: " << runs << "\n";
        f << "rss rows: " << merged.size() << " (manifest cells: " << expected_cells << ")\n\n";
        f << summary.str();
    }
    RunManifest m;
    m.command = "report";
    m.timestamp = iso8601_utc_now();
    m.config = nlohmann::json::object();
    m.inputs["dir"] = dir;
    m.outputs = {"summary.txt", "rss_all.csv"};
    if (!convergence_lines.empty()) m.outputs.push_back("convergence.csv");
    write_run_manifest(out_dir, m);
    std::cout << "report over " << runs << " runs written to " << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tri-modal contrastive representation trainer and evaluation harness"};
    app.require_subcommand(1);

    std::function<int()> action;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic multi-sensor dataset");
    auto gen_opts = std::make_shared<CommonOpts>();
    add_common(gen, *gen_opts, "data");
    gen->callback([gen_opts, &action] { action = [gen_opts] { return cmd_gen_data(*gen_opts); }; });

    auto* train = app.add_subcommand("train", "train the tri-modal model");
    auto train_opts = std::make_shared<CommonOpts>();
    auto resume_path = std::make_shared<std::string>();
    auto train_data = std::make_shared<std::string>();
    add_common(train, *train_opts, "run");
    train->add_option("--resume", *resume_path, "checkpoint to continue from");
    train->add_option("--data", *train_data, "dataset directory (shorthand for train.dataset_dir)");
    train->callback([=, &action] {
        action = [=] {
            CommonOpts o = *train_opts;
            if (!train_data->empty()) o.sets.push_back("train.dataset_dir=" + *train_data);
            return cmd_train(o, *resume_path);
        };
    });

    auto* ev = app.add_subcommand("eval-rss", "probe robustness/synergy metrics from a checkpoint");
    auto ev_opts = std::make_shared<CommonOpts>();
    auto ev_ckpt = std::make_shared<std::string>();
    auto ev_data = std::make_shared<std::string>();
    auto ev_protocols = std::make_shared<std::string>();
    auto ev_trials = std::make_shared<int>(8);
    auto ev_no_theory = std::make_shared<bool>(false);
    add_common(ev, *ev_opts, "eval");
    ev->add_option("--checkpoint", *ev_ckpt, "trained model checkpoint")->required();
    ev->add_option("--data", *ev_data, "dataset directory (defaults to the one in the checkpoint)");
    ev->add_option("--protocols", *ev_protocols, "comma list: intra,cross,multi,synergy");
    ev->add_option("--trials", *ev_trials, "batches for the gradient variance estimate")
        ->check(CLI::PositiveNumber);
    ev->add_flag("--no-theory", *ev_no_theory, "skip theory.csv diagnostics");
    ev->callback([=, &action] {
        action = [=] {
            return cmd_eval_rss(*ev_opts, *ev_ckpt, *ev_data, *ev_protocols, *ev_trials, *ev_no_theory);
        };
    });

    auto* sweep = app.add_subcommand("sweep-batch", "train across batch sizes and measure accuracy spread");
    auto sweep_opts = std::make_shared<CommonOpts>();
    auto sweep_sizes = std::make_shared<std::string>("8,16,32,64");
    add_common(sweep, *sweep_opts, "sweep");
    sweep->add_option("--sizes", *sweep_sizes, "comma list of batch sizes")->capture_default_str();
    sweep->callback([=, &action] {
        action = [=] { return cmd_sweep_batch(*sweep_opts, *sweep_sizes); };
    });

    auto* ab = app.add_subcommand("ablate", "paired runs with one component or knob changed");
    auto ab_opts = std::make_shared<CommonOpts>();
    auto ab_knob = std::make_shared<std::string>();
    auto ab_values = std::make_shared<std::string>();
    add_common(ab, *ab_opts, "ablate");
    ab->add_option("--knob", *ab_knob, "no-sam | no-dl | no-uba | lambda_dl | n_uba | d_shared")->required();
    ab->add_option("--values", *ab_values, "comma list of knob values (hyperparameter knobs)");
    ab->callback([=, &action] {
        action = [=] { return cmd_ablate(*ab_opts, *ab_knob, *ab_values); };
    });

    auto* gc = app.add_subcommand("grad-check", "finite-difference audit of the full loss gradient");
    auto gc_seeds = std::make_shared<int>(3);
    auto gc_eps = std::make_shared<double>(1e-5);
    auto gc_coords = std::make_shared<int>(2);
    gc->add_option("--seeds", *gc_seeds, "number of fresh initializations")->check(CLI::PositiveNumber);
    gc->add_option("--eps", *gc_eps, "central difference step");
    gc->add_option("--coords", *gc_coords, "probed coordinates per parameter (0 = all)");
    gc->callback([=, &action] {
        action = [=] { return cmd_grad_check(*gc_seeds, *gc_eps, *gc_coords); };
    });

    auto* rep = app.add_subcommand("report", "summarize every run under a directory");
    auto rep_dir = std::make_shared<std::string>();
    auto rep_out = std::make_shared<std::string>();
    rep->add_option("--dir", *rep_dir, "directory holding run outputs")->required();
    rep->add_option("--out", *rep_out, "report output directory (default <dir>/report)");
    rep->callback([=, &action] {
        action = [=] {
            return cmd_report(*rep_dir, rep_out->empty() ? *rep_dir + "/report" : *rep_out);
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1; // usage problems are validation errors
    }

    try {
        return action ? action() : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 2;
    }
}
