#include "tlv/rng.hpp"

#include <cmath>

#include "tlv/errors.hpp"

namespace tlv {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

CounterRng CounterRng::stream(std::uint64_t seed, std::string_view label,
                              std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t k = mix64(seed ^ fnv1a64(label));
    k = mix64(k ^ (a + 1) * kGolden);
    k = mix64(k ^ (b + 1) * kGolden);
    k = mix64(k ^ (c + 1) * kGolden);
    return CounterRng(k);
}

std::uint64_t CounterRng::next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double CounterRng::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::next_gaussian(double mu, double sigma) {
    // u1 in (0,1] so the log is finite
    const double u1 = 1.0 - next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    return mu + sigma * r * std::cos(theta);
}

std::uint64_t CounterRng::next_below(std::uint64_t n) {
    if (n == 0) throw DomainError("next_below: n must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
    for (;;) {
        const std::uint64_t x = next_u64();
        if (x <= limit) return x % n;
    }
}

} // namespace tlv
