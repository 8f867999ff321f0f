#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "tlv/autograd.hpp"
#include "tlv/encoders.hpp"

namespace tlv {

// Bridging adapters: low-rank residual blocks attached to the top layers of
// every encoder. Each level owns per-modality down/up projections around one
// shared r x r core, so the core sees every modality's traffic:
//
//   H + up_m( shared( down_m(H) ) )
//
// applied tokenwise. Up projections start at zero, which makes a freshly
// initialized adapter an exact identity.

struct UbaLevelParams {
    std::array<Var, 3> w_down; // [r, d_m], indexed by Modality
    std::array<Var, 3> w_up;   // [d_m, r]
    Var w_sh;                  // [r, r], one object shared by all modalities
};

struct UbaParams {
    std::vector<UbaLevelParams> levels;
    int rank = 0;
};

UbaParams init_uba(int levels, int rank, const std::array<int, 3>& dims, std::uint64_t seed,
                   std::vector<Parameter>& registry);

// residual adapter output for tokens [T,d_m] (or a single [d_m] row)
Var uba_apply(const Var& h, Modality m, const UbaLevelParams& level);

// Which encoder layer gets which adapter level. Levels attach to the last
// `levels` layers of each encoder, deepest level last, so a depth-D stack
// with L levels bridges layers D-L .. D-1 (0-based). Every encoder must be
// at least L layers deep.
struct PlacementPlan {
    // per modality: (layer index, level index) pairs in layer order
    std::array<std::vector<std::pair<int, int>>, 3> entries;
};

PlacementPlan plan_placement(const std::array<int, 3>& depths, int levels);

// Fraction of trainable scalars contributed by the adapter stack plus the
// sensor modulator, relative to the full model including frozen-size towers.
double count_trainable_fraction(const std::array<EncoderConfig, 3>& encoders, int levels, int rank,
                                int sensors);

} // namespace tlv
