#pragma once

#include <cstdint>
#include <vector>

#include "tlv/autograd.hpp"

namespace tlv {

// Sensor-aware modulation of tactile features plus the adversarial
// sensor-identity objective.
//
// A routing head scores S sensors from a feature h: r = softmax(W_r h).
// Modulation rescales the feature by its own sensor's routing weight:
// h_mod = (1 + r_s) * h. The decoupling loss pushes sensor identity OUT of
// h: the feature first passes a gradient-reversal gate, then a softmax over
// cosine similarities to per-sensor centroids gives p(s|h); the loss is the
// mean negative log of the true sensor's probability. Reversal makes the
// encoder climb that objective while the centroids still descend it.

struct SamParams {
    Var w_r;       // [S, d]
    Var centroids; // [S, d]
    int sensors = 0;
};

SamParams init_sam(int sensors, int dim, std::uint64_t seed, std::vector<Parameter>& registry);

// softmax(W_r h) over sensors; h is [d]
Var route(const Var& h, const SamParams& p);

// (1 + r[sensor]) * h with gradient flowing through both factors
Var modulate(const Var& h, const Var& r, int sensor);

// routing + modulation with the sensor picked by highest routing weight
// (lowest index wins ties); used at inference when the sensor is unknown
Var modulate_auto(const Var& h, const SamParams& p);

// p(s|h): softmax over cosine(h, centroid_s) / tau
Var sensor_posterior(const Var& h, const SamParams& p, double tau);

// mean over the batch of -log p(true sensor | grad_reverse(h))
Var decoupling_loss(const std::vector<Var>& feats, const std::vector<int>& sensors,
                    const SamParams& p, double tau, double grl_lambda);

} // namespace tlv
