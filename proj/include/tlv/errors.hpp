#pragma once

#include <stdexcept>
#include <string>

namespace tlv {

// Shape disagreement between tensor arguments (mismatched extents,
// indivisible dimensions, wrong rank).
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid configuration value: non-positive temperature, unknown config key,
// hook index out of range, bad CLI override.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Value outside an operation's domain: empty batch, sensor id out of range,
// label set too small for a probe.
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Numerically degenerate input where the math has no answer: near-zero
// vector fed to a normalizer, zero matrix fed to a spectral routine.
struct DegenerateInputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// The finite-difference checker refuses to certify a loss that does not
// reproduce its own value on repeated evaluation.
struct OracleInvalidError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A dataset or checkpoint file failed to read back: bad magic, unsupported
// version, truncation, or checksum-level corruption.
struct LoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training aborted mid-run (non-finite loss); message carries the step
// diagnostics needed to reproduce.
struct TrainAbortError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace tlv
