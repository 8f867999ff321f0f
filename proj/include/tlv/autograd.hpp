#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tlv/tensor.hpp"

namespace tlv {

// Reverse-mode tape. Every op builds a Node holding its forward value and a
// closure that routes the node's gradient to its parents. Graphs are rebuilt
// per forward pass; leaves (parameters) persist across passes and keep their
// gradient buffers between zero_grad calls.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor val;
    Tensor grad; // same shape, zero-initialized
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;
    bool requires_grad = false;

    Node(Tensor v, bool req);
};

// leaf with requires_grad = true (trainable)
Var make_leaf(Tensor v);
// leaf with requires_grad = false (input data)
Var make_const(Tensor v);

// Seeds root->grad with 1 and runs the tape in reverse topological order.
// root must hold exactly one element. Gradients accumulate, so zero leaf
// grads before building the graph.
void backward(const Var& root);

// named trainable leaf
struct Parameter {
    std::string name;
    Var node;
    bool trainable = true;
};

void zero_grads(std::vector<Parameter>& params);

namespace ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
// broadcast multiply by a one-element Var; gradient flows into both
Var mul_scalar_var(const Var& a, const Var& s);

Var matmul(const Var& a, const Var& b);    // [m,k] x [k,n]
Var matmul_nt(const Var& a, const Var& b); // [m,k] x [n,k]^T -> [m,n]
Var linear(const Var& x, const Var& w, const Var& b); // x[m,k] w[n,k]^T + b[n]

// Multi-head softmax attention over one sequence: q,k,v are [T,d],
// d % heads == 0. Scores are scaled by 1/sqrt(d/heads).
Var mha(const Var& q, const Var& k, const Var& v, int heads);

// normalizes over the last dimension; x is [d] or [T,d], gamma/beta are [d]
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// exact gaussian gelu: x * Phi(x)
Var gelu(const Var& x);

// rows of x (rank-1 input is one row); tau > 0 divides logits
Var softmax_rows(const Var& x, double tau);
Var log_softmax_rows(const Var& x, double tau);

// rowwise x / ||x||; throws DegenerateInputError when a row norm is < eps
Var l2_normalize_rows(const Var& x, double eps = 1e-12);

// forward identity, backward multiplies the incoming gradient by -lambda
Var grad_reverse(const Var& x, double lambda);

Var vstack(const std::vector<Var>& rows);          // N x [d] -> [N,d]
Var vconcat(const Var& a, const Var& b);           // [ra,C],[rb,C] -> [ra+rb,C]
Var slice_row(const Var& x, int row);              // [T,d] -> [d]
Var slice_rows(const Var& x, int start, int count); // [T,d] -> [count,d]
Var pick(const Var& x, int i);                     // [n] -> [1]
Var gather_rows(const Var& x, const std::vector<int>& idx); // [N,S] -> [N], idx[i] per row
Var embed_rows(const Var& table, const std::vector<int>& ids); // [V,d] -> [n,d]
Var mean_all(const Var& x); // -> [1]
Var sum_all(const Var& x);  // -> [1]
Var reshape(const Var& x, std::vector<int> shape);

} // namespace ops

} // namespace tlv
