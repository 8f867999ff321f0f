#pragma once

#include "tlv/autograd.hpp"

namespace tlv {

// Symmetric InfoNCE over two aligned embedding batches zx, zy of shape
// [N, d] whose rows are unit length (checked). With S = zx zy^T / tau,
//
//   loss = -(1/2N) sum_i [ log softmax_row(S)_ii + log softmax_col(S)_ii ]
//
// A batch of one pairs each row only with itself, so the loss is exactly 0.
Var pair_infonce(const Var& zx, const Var& zy, double tau);

} // namespace tlv
