#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "tlv/checkpoint.hpp"
#include "tlv/config.hpp"
#include "tlv/errors.hpp"
#include "tlv/model.hpp"
#include "tlv/numerics.hpp"
#include "tlv/objective.hpp"
#include "tlv/rss_eval.hpp"
#include "tlv/synthdata.hpp"
#include "tlv/trainer.hpp"
#include "tlv/uba.hpp"

namespace py = pybind11;
using namespace tlv;

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

void apply_dict(RunConfig& cfg, const py::dict& overrides, const std::string& allowed_prefix) {
    for (const auto& item : overrides) {
        const std::string key = py::cast<std::string>(py::str(item.first));
        if (!allowed_prefix.empty() && key.rfind(allowed_prefix, 0) != 0) {
            throw ConfigError("override '" + key + "' must start with '" + allowed_prefix + "'");
        }
        std::string value = py::cast<std::string>(py::str(item.second));
        if (py::isinstance<py::bool_>(item.second)) value = lower(value);
        apply_override(cfg, key + "=" + value);
    }
}

Tensor grid_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 3) throw ShapeError("grid must be a (H, W, C) array");
    Tensor t({static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))});
    std::copy(a.data(), a.data() + a.size(), t.data());
    return t;
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> a(shape);
    std::copy(t.data(), t.data() + t.numel(), a.mutable_data());
    return a;
}

Tensor matrix_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
    Tensor t({static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1))});
    std::copy(a.data(), a.data() + a.size(), t.data());
    return t;
}

py::dict triplet_to_dict(const Triplet& t) {
    py::dict d;
    d["tactile"] = array_from_tensor(t.tactile);
    d["vision"] = array_from_tensor(t.vision);
    d["tokens"] = t.tokens;
    d["sensor"] = t.sensor;
    d["label"] = t.label;
    d["rough"] = t.rough;
    d["hard"] = t.hard;
    d["instance"] = t.instance;
    return d;
}

struct PyDataset {
    Dataset data;

    static PyDataset generate(const py::dict& overrides, const py::object& seed) {
        RunConfig cfg;
        apply_dict(cfg, overrides, "dataset.");
        if (!seed.is_none()) cfg.data.seed = py::cast<std::uint64_t>(seed);
        return PyDataset{generate_dataset(cfg.data)};
    }
    static PyDataset load(const std::string& dir) { return PyDataset{read_dataset(dir)}; }
    void save(const std::string& dir) const { write_dataset(data, dir); }

    py::dict counts() const {
        py::dict d;
        d["train"] = data.train.size();
        d["val"] = data.val.size();
        d["test"] = data.test.size();
        return d;
    }
    py::dict triplet(const std::string& split, std::size_t i) const {
        const auto& v = data.split(split);
        if (i >= v.size()) throw DomainError("triplet index out of range");
        return triplet_to_dict(v[i]);
    }
    std::vector<std::string> vocab() const { return vocabulary(data.cfg); }
};

py::dict metrics_to_dict(const MetricsRecord& r) {
    py::dict d;
    d["epoch"] = r.epoch;
    d["step"] = r.step;
    d["l_total"] = r.l_total;
    d["l_tv"] = r.l_tv;
    d["l_tl"] = r.l_tl;
    d["l_vl"] = r.l_vl;
    d["l_dl"] = r.l_dl;
    d["grad_norm"] = r.grad_norm;
    d["wall_ms"] = r.wall_ms;
    return d;
}

struct PyModel {
    std::unique_ptr<TrainSession> session;

    PyModel(const PyDataset& ds, const py::dict& overrides, std::uint64_t seed) {
        RunConfig cfg;
        cfg.data = ds.data.cfg;
        cfg.train.seed = seed;
        apply_dict(cfg, overrides, "");
        bind_model_to_data(cfg.model, ds.data.cfg);
        session = std::make_unique<TrainSession>(cfg);
    }
    explicit PyModel(const std::string& path)
        : session(std::make_unique<TrainSession>(load_checkpoint(path))) {}

    py::list fit(const PyDataset& ds) {
        py::list out;
        for (const auto& r : session->run(ds.data)) out.append(metrics_to_dict(r));
        return out;
    }
    py::dict loss(const PyDataset& ds, const std::string& split, const std::vector<int>& indices) {
        const auto& v = ds.data.split(split);
        std::vector<const Triplet*> batch;
        for (int i : indices) {
            if (i < 0 || static_cast<std::size_t>(i) >= v.size()) {
                throw DomainError("loss: index out of range");
            }
            batch.push_back(&v[static_cast<std::size_t>(i)]);
        }
        const auto l = session->model().batch_loss(batch);
        py::dict d;
        d["total"] = l.total->val[0];
        d["tv"] = l.tv->val[0];
        d["tl"] = l.tl->val[0];
        d["vl"] = l.vl->val[0];
        d["dl"] = l.dl->val[0];
        return d;
    }

    py::array_t<double> embed_tactile(
        const py::array_t<double, py::array::c_style | py::array::forcecast>& grid, int sensor) {
        return array_from_tensor(session->model().embed_tactile(grid_from_array(grid), sensor));
    }
    py::array_t<double> embed_vision(
        const py::array_t<double, py::array::c_style | py::array::forcecast>& grid) {
        return array_from_tensor(session->model().embed_vision(grid_from_array(grid)));
    }
    py::array_t<double> embed_text(const std::vector<int>& tokens) {
        return array_from_tensor(session->model().embed_language(tokens));
    }

    py::list eval_rss_py(const PyDataset& ds, const std::vector<std::string>& protocols) {
        RssOptions opts;
        const int filter = session->config().train.sensor_filter;
        if (!protocols.empty()) {
            opts.protocols.clear();
            for (const auto& p : protocols) opts.protocols.push_back(protocol_from_name(p));
        } else if (filter == -1) {
            opts.protocols = {Protocol::intra, Protocol::multi, Protocol::synergy};
        } else {
            opts.protocols = {Protocol::intra, Protocol::cross, Protocol::synergy};
        }
        py::list out;
        for (const auto& r : eval_rss(session->model(), ds.data, filter, opts)) {
            py::dict d;
            d["protocol"] = r.protocol;
            d["task"] = r.task;
            d["encoder"] = r.encoder;
            d["sensor"] = r.sensor;
            d["accuracy"] = r.accuracy;
            d["n_test"] = r.n_test;
            out.append(d);
        }
        return out;
    }

    void save(const std::string& path) const { save_checkpoint(session->snapshot(), path); }
    std::string config_text() const { return serialize_config(session->config()); }
    int epoch() const { return session->epoch(); }
    std::int64_t step() const { return session->step(); }
    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& p : session->model().params()) n += static_cast<std::size_t>(p.node->val.numel());
        return n;
    }
    double adapter_fraction() const {
        const ModelConfig& mc = session->config().model;
        const std::array<EncoderConfig, 3> enc = {mc.encoder(Modality::tactile),
                                                  mc.encoder(Modality::vision),
                                                  mc.encoder(Modality::language)};
        return count_trainable_fraction(enc, mc.uba_levels, mc.uba_rank, mc.sensors);
    }
};

double grad_check_py(int seeds, int coords, double eps) {
    DatasetConfig dc;
    dc.classes = 2;
    dc.sensors = 2;
    dc.samples_per_cell = 10;
    dc.image_size = 8;
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
    mc.lambda_dl = 0.0; // the reversal layer is exempt from the difference oracle
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
        worst = std::max(worst, finite_diff_check([&] { return model.batch_loss(batch).total; },
                                                  model.params(), opts));
    }
    return worst;
}

} // namespace

PYBIND11_MODULE(_tlvcore, m) {
    m.doc() = "tri-modal contrastive representation learner core";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

    m.def("softmax", [](const std::vector<double>& v, double temp) { return softmax_temp(v, temp); },
          py::arg("values"), py::arg("temp") = 1.0);
    m.def("l2_normalize", [](const std::vector<double>& v) { return l2_normalize(v); }, py::arg("values"));
    m.def("cosine", [](const std::vector<double>& a, const std::vector<double>& b) {
              return cosine_similarity(a, b);
          },
          py::arg("a"), py::arg("b"));
    m.def("pair_infonce",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& b, double tau) {
              const Var va = make_const(matrix_from_array(a));
              const Var vb = make_const(matrix_from_array(b));
              return pair_infonce(va, vb, tau)->val[0];
          },
          py::arg("a"), py::arg("b"), py::arg("tau") = 0.05);
    m.def("condition_number",
          [](const py::array_t<double, py::array::c_style | py::array::forcecast>& w) {
              return condition_number(matrix_from_array(w));
          },
          py::arg("w"));
    m.def("grad_check", &grad_check_py, py::arg("seeds") = 1, py::arg("coords") = 2,
          py::arg("eps") = 1e-5);

    py::class_<PyDataset>(m, "Dataset")
        .def_static("generate", &PyDataset::generate, py::arg("overrides") = py::dict(),
                    py::arg("seed") = py::none())
        .def_static("load", &PyDataset::load, py::arg("dir"))
        .def("save", &PyDataset::save, py::arg("dir"))
        .def("counts", &PyDataset::counts)
        .def("triplet", &PyDataset::triplet, py::arg("split"), py::arg("index"))
        .def("vocab", &PyDataset::vocab);

    py::class_<PyModel>(m, "Model")
        .def(py::init<const PyDataset&, const py::dict&, std::uint64_t>(), py::arg("dataset"),
             py::arg("overrides") = py::dict(), py::arg("seed") = 1)
        .def_static("load", [](const std::string& path) { return std::make_unique<PyModel>(path); },
                    py::arg("path"))
        .def("fit", &PyModel::fit, py::arg("dataset"))
        .def("loss", &PyModel::loss, py::arg("dataset"), py::arg("split"), py::arg("indices"))
        .def("embed_tactile", &PyModel::embed_tactile, py::arg("grid"), py::arg("sensor") = -1)
        .def("embed_vision", &PyModel::embed_vision, py::arg("grid"))
        .def("embed_text", &PyModel::embed_text, py::arg("tokens"))
        .def("eval_rss", &PyModel::eval_rss_py, py::arg("dataset"),
             py::arg("protocols") = std::vector<std::string>{})
        .def("save", &PyModel::save, py::arg("path"))
        .def("config_text", &PyModel::config_text)
        .def("epoch", &PyModel::epoch)
        .def("step", &PyModel::step)
        .def("param_count", &PyModel::param_count)
        .def("adapter_fraction", &PyModel::adapter_fraction);
}
