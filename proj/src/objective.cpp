#include "tlv/objective.hpp"

#include <cmath>

#include "tlv/errors.hpp"

namespace tlv {

Var pair_infonce(const Var& zx, const Var& zy, double tau) {
    if (!(tau > 0.0)) throw ConfigError("pair_infonce: temperature must be positive");
    require_rank(zx->val, 2, "pair_infonce zx");
    require_same_shape(zx->val, zy->val, "pair_infonce");
    const int N = zx->val.dim(0), d = zx->val.dim(1);
    if (N < 1) throw DomainError("pair_infonce: empty batch");
    for (const Var* z : {&zx, &zy}) {
        for (int i = 0; i < N; ++i) {
            double n2 = 0.0;
            for (int c = 0; c < d; ++c) n2 += (*z)->val.at(i, c) * (*z)->val.at(i, c);
            if (std::abs(n2 - 1.0) > 1e-8) {
                throw DomainError("pair_infonce: row " + std::to_string(i) + " is not unit length");
            }
        }
    }
    std::vector<int> diag(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) diag[static_cast<std::size_t>(i)] = i;
    Var rows = ops::log_softmax_rows(ops::matmul_nt(zx, zy), tau);
    Var cols = ops::log_softmax_rows(ops::matmul_nt(zy, zx), tau);
    Var sum = ops::add(ops::mean_all(ops::gather_rows(rows, diag)),
                       ops::mean_all(ops::gather_rows(cols, diag)));
    return ops::scale(sum, -0.5);
}

} // namespace tlv
