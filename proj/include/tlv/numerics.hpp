#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "tlv/autograd.hpp"
#include "tlv/tensor.hpp"

namespace tlv {

// Plain-value numeric kernels shared by model code, evaluation, and tests.
// All of them validate that inputs and outputs are finite.

// softmax of x / tau
std::vector<double> softmax_temp(const std::vector<double>& x, double tau);

// x / ||x||_2; throws DegenerateInputError when ||x|| < eps
std::vector<double> l2_normalize(const std::vector<double>& x, double eps = 1e-12);

// cos(a, b); throws DegenerateInputError when either norm is < eps
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b, double eps = 1e-12);

double global_grad_norm(const std::vector<Parameter>& params);

// Scales all gradients by max_norm / norm when the global norm exceeds
// max_norm. Returns the pre-clip norm.
double clip_grad_norm(std::vector<Parameter>& params, double max_norm);

struct FiniteDiffOptions {
    double eps = 1e-5;
    // cap on probed coordinates per parameter; 0 probes every coordinate
    int max_coords_per_param = 0;
    std::uint64_t seed = 0;
};

// Central-difference gradient audit.
//
// make_loss rebuilds the scalar loss graph from the current parameter
// values. The harness first evaluates it twice and refuses (OracleInvalidError)
// if the two values differ, since a non-deterministic loss cannot be checked.
// It then runs one backward pass for the analytic gradients and, for each
// probed coordinate theta_i, forms
//
//   g_c = (loss(theta_i + eps) - loss(theta_i - eps)) / (2 eps)
//
// and returns the max over coordinates of |g_a - g_c| / max(1, |g_c|).
// Only entries of `params` with trainable == true are probed.
double finite_diff_check(const std::function<Var()>& make_loss,
                         std::vector<Parameter>& params,
                         const FiniteDiffOptions& opts = {});

} // namespace tlv
