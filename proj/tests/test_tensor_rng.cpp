#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tlv/errors.hpp"
#include "tlv/rng.hpp"
#include "tlv/tensor.hpp"

using namespace tlv;

TEST_CASE("tensor shape and indexing") {
    Tensor t({2, 3});
    CHECK(t.rank() == 2);
    CHECK(t.numel() == 6);
    t.at(1, 2) = 5.0;
    CHECK(t[5] == 5.0);
    t.fill(1.5);
    CHECK(t.at(0, 0) == 1.5);

    const Tensor v = Tensor::vec({1, 2, 3});
    CHECK(v.rank() == 1);
    CHECK(v.dim(0) == 3);
    CHECK(Tensor::scalar(4.0)[0] == 4.0);
    CHECK(Tensor::full({2, 2}, 7.0)[3] == 7.0);
    CHECK(Tensor::zeros({3})[2] == 0.0);
}

TEST_CASE("tensor shape guards") {
    const Tensor a({2, 3});
    const Tensor b({3, 2});
    CHECK_THROWS_AS(require_same_shape(a, b, "t"), ShapeError);
    CHECK_THROWS_AS(require_rank(a, 1, "t"), ShapeError);
    CHECK_NOTHROW(require_rank(a, 2, "t"));
    CHECK(a.same_shape(Tensor({2, 3})));
}

TEST_CASE("fnv1a64 reference vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("counter rng matches the splitmix64 reference stream") {
    // key 0 must reproduce the canonical splitmix64 sequence for seed 0
    CounterRng rng(0);
    CHECK(rng.next_u64() == 0xe220a8397b1dcdafULL);
    CHECK(rng.next_u64() == 0x6e789e6aa1b965f4ULL);
    CHECK(rng.next_u64() == 0x06c45d188009454fULL);
}

TEST_CASE("streams are reproducible and independent") {
    CounterRng a = CounterRng::stream(7, "weights", 1, 2, 3);
    CounterRng b = CounterRng::stream(7, "weights", 1, 2, 3);
    CHECK(a.next_u64() == b.next_u64());
    CHECK(a.next_u64() == b.next_u64());

    CounterRng c = CounterRng::stream(7, "weights", 1, 2, 4);
    CounterRng d = CounterRng::stream(7, "bias", 1, 2, 3);
    CounterRng e = CounterRng::stream(8, "weights", 1, 2, 3);
    CounterRng base = CounterRng::stream(7, "weights", 1, 2, 3);
    const std::uint64_t first = base.next_u64();
    CHECK(c.next_u64() != first);
    CHECK(d.next_u64() != first);
    CHECK(e.next_u64() != first);
}

TEST_CASE("unit draws stay in range") {
    CounterRng rng = CounterRng::stream(3, "unit");
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.next_unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("gaussian draws have sane moments") {
    CounterRng rng = CounterRng::stream(5, "gauss");
    const int n = 20000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.next_gaussian(0.0, 1.0);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(var - 1.0) < 0.1);
}

TEST_CASE("next_below bounds and shuffle permutes") {
    CounterRng rng = CounterRng::stream(9, "below");
    for (int i = 0; i < 500; ++i) CHECK(rng.next_below(10) < 10);

    std::vector<int> v(20);
    std::iota(v.begin(), v.end(), 0);
    std::vector<int> w = v;
    CounterRng s1 = CounterRng::stream(9, "shuffle");
    CounterRng s2 = CounterRng::stream(9, "shuffle");
    s1.shuffle(v);
    s2.shuffle(w);
    CHECK(v == w);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(20);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(sorted == expect);
}
