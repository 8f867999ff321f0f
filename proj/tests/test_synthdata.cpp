#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "tlv/errors.hpp"
#include "tlv/rng.hpp"
#include "tlv/synthdata.hpp"

using namespace tlv;
namespace fs = std::filesystem;

namespace {

DatasetConfig small_cfg() {
    DatasetConfig c;
    c.classes = 4;
    c.sensors = 2;
    c.samples_per_cell = 50;
    c.image_size = 8;
    c.seed = 7;
    return c;
}

fs::path fresh_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

} // namespace

TEST_CASE("split sizes, balance, and disjointness") {
    const Dataset d = generate_dataset(small_cfg());
    CHECK(d.train.size() == 320);
    CHECK(d.val.size() == 40);
    CHECK(d.test.size() == 40);

    std::map<std::pair<int, int>, int> cell_train;
    std::set<std::tuple<int, int, int>> seen;
    auto scan = [&](const std::vector<Triplet>& split, bool count) {
        for (const Triplet& t : split) {
            if (count) ++cell_train[{t.label, t.sensor}];
            const auto key = std::make_tuple(t.label, t.sensor, t.instance);
            CHECK(seen.insert(key).second); // no instance reappears anywhere
        }
    };
    scan(d.train, true);
    scan(d.val, false);
    scan(d.test, false);
    for (const auto& [cell, n] : cell_train) CHECK(n == 40);
    CHECK(cell_train.size() == 8);

    CHECK(&d.split("train") == &d.train);
    CHECK(&d.split("val") == &d.val);
    CHECK(&d.split("test") == &d.test);
    CHECK_THROWS_AS(d.split("nope"), ConfigError);
}

TEST_CASE("generation is bit-deterministic") {
    const Dataset a = generate_dataset(small_cfg());
    const Dataset b = generate_dataset(small_cfg());
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i : {std::size_t(0), a.train.size() / 2, a.train.size() - 1}) {
        const Triplet &x = a.train[i], &y = b.train[i];
        CHECK(x.tokens == y.tokens);
        for (std::int64_t j = 0; j < x.tactile.numel(); ++j) CHECK(x.tactile[j] == y.tactile[j]);
        for (std::int64_t j = 0; j < x.vision.numel(); ++j) CHECK(x.vision[j] == y.vision[j]);
    }
}

TEST_CASE("captions follow the template") {
    const DatasetConfig cfg = small_cfg();
    const Dataset d = generate_dataset(cfg);
    CHECK(cfg.vocab_size() == 12);
    const auto vocab = vocabulary(cfg);
    CHECK(vocab.size() == 12);
    for (const Triplet& t : d.test) {
        REQUIRE(t.tokens.size() == 6);
        CHECK(t.tokens[0] == 1);
        CHECK(t.tokens[1] == 8 + t.label);
        CHECK(t.tokens[2] == 2);
        CHECK(t.tokens[3] == (t.rough ? 3 : 4));
        CHECK(t.tokens[4] == 5);
        CHECK(t.tokens[5] == (t.hard ? 6 : 7));
    }
}

TEST_CASE("style overlap interpolates sensor profiles") {
    DatasetConfig cfg = small_cfg();

    cfg.style_overlap = 1.0;
    const SensorProfile canon = sensor_profile(cfg, -1);
    for (int s = 0; s < cfg.sensors; ++s) {
        const SensorProfile p = sensor_profile(cfg, s);
        CHECK(p.tint == canon.tint);
        CHECK(p.gain == canon.gain);
        CHECK(p.illum_x == canon.illum_x);
        CHECK(p.illum_y == canon.illum_y);
        CHECK(p.noise_std == canon.noise_std);
    }

    cfg.style_overlap = 0.0;
    const SensorProfile p0 = sensor_profile(cfg, 0);
    const SensorProfile p1 = sensor_profile(cfg, 1);
    CHECK(p0.tint != p1.tint);
    CHECK(p0.gain != p1.gain);
    CHECK(p0.tint != canon.tint);

    cfg.style_overlap = 0.5;
    const SensorProfile mid = sensor_profile(cfg, 0);
    CHECK(mid.gain == doctest::Approx(0.5 * p0.gain + 0.5 * canon.gain).epsilon(1e-15));

    CHECK_THROWS_AS(sensor_profile(cfg, 5), DomainError);
}

TEST_CASE("rendering is a pure function of spec and profile") {
    const DatasetConfig cfg = small_cfg();
    const ObjectSpec obj = object_spec(cfg, 1, 0, 3);
    SensorProfile prof = sensor_profile(cfg, 0);
    prof.noise_std = 0.0;
    CounterRng n1 = CounterRng::stream(1, "n");
    CounterRng n2 = CounterRng::stream(1, "n");
    const Tensor a = render_grid(obj, prof, cfg, n1);
    const Tensor b = render_grid(obj, prof, cfg, n2);
    CHECK(n1.counter() == 0); // zero noise draws nothing
    for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);

    ObjectSpec other = obj;
    other.freq += 1.0;
    const Tensor c = render_grid(other, prof, cfg, n1);
    bool differs = false;
    for (std::int64_t i = 0; i < a.numel(); ++i) differs |= a[i] != c[i];
    CHECK(differs);
}

TEST_CASE("dataset files round-trip exactly") {
    DatasetConfig cfg = small_cfg();
    cfg.samples_per_cell = 10;
    const Dataset d = generate_dataset(cfg);
    const fs::path dir1 = fresh_dir("tlv_ds_rt1");
    const fs::path dir2 = fresh_dir("tlv_ds_rt2");
    write_dataset(d, dir1);
    const Dataset r = read_dataset(dir1);
    CHECK(r.cfg.classes == cfg.classes);
    CHECK(r.train.size() == d.train.size());
    write_dataset(r, dir2);
    for (const char* f : {"train.bin", "val.bin", "test.bin"}) {
        std::ifstream a(dir1 / f, std::ios::binary), b(dir2 / f, std::ios::binary);
        const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
        const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
        CHECK(sa == sb);
        CHECK(!sa.empty());
    }
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("corrupt dataset files are rejected") {
    DatasetConfig cfg = small_cfg();
    cfg.samples_per_cell = 10;
    const Dataset d = generate_dataset(cfg);
    const fs::path dir = fresh_dir("tlv_ds_bad");
    write_dataset(d, dir);
    {
        std::fstream f(dir / "train.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_AS(read_dataset(dir), LoadError);
    fs::remove_all(dir);
    CHECK_THROWS_AS(read_dataset("/nonexistent/tlv"), LoadError);
}

TEST_CASE("config validation rejects bad extents") {
    DatasetConfig cfg = small_cfg();
    cfg.classes = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_cfg();
    cfg.style_overlap = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_cfg();
    cfg.samples_per_cell = 5; // cannot split 8:1:1
    CHECK_THROWS_AS(generate_dataset(cfg), ConfigError);
}
