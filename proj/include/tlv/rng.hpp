#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace tlv {

// 64-bit FNV-1a over a byte string. Also used for content hashes in run
// manifests, so it lives here rather than in an anonymous namespace.
std::uint64_t fnv1a64(std::string_view bytes);

// SplitMix64 finalizer: bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

// Counter-based PRNG.
//
//   output(i) = mix64(key + (i+1) * GOLDEN)   with GOLDEN = 0x9E3779B97F4A7C15
//
// The key of a stream is derived from a root seed, a label, and up to three
// substream indices:
//
//   key = mix64(mix64(mix64(mix64(seed ^ fnv1a64(label)) ^ (a+1)*GOLDEN)
//                     ^ (b+1)*GOLDEN) ^ (c+1)*GOLDEN)
//
// so every (object, sensor, draw purpose) combination gets an independent
// sequence that is reproducible across platforms: the generator does integer
// arithmetic only, and the float mappings below use fixed IEEE expressions.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    static CounterRng stream(std::uint64_t seed, std::string_view label,
                             std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0);

    std::uint64_t next_u64();

    // uniform in [0,1) with 53 random bits
    double next_unit();

    // Box-Muller; consumes two uniforms per call, the sine partner is dropped
    double next_gaussian(double mu, double sigma);

    // uniform in [0, n) by rejection; n must be positive
    std::uint64_t next_below(std::uint64_t n);

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }
    void set_counter(std::uint64_t c) { counter_ = c; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace tlv
