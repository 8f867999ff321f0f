#include "tlv/autograd.hpp"

#include <cmath>
#include <unordered_set>
#include <utility>

#include "tlv/errors.hpp"

namespace tlv {

Node::Node(Tensor v, bool req)
    : val(std::move(v)), grad(Tensor::zeros(val.shape())), requires_grad(req) {}

Var make_leaf(Tensor v) { return std::make_shared<Node>(std::move(v), true); }
Var make_const(Tensor v) { return std::make_shared<Node>(std::move(v), false); }

void backward(const Var& root) {
    if (!root) throw DomainError("backward: null root");
    if (root->val.numel() != 1) throw ShapeError("backward: root must hold one element");
    // iterative post-order DFS; reversed post-order is a topological order
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& top = stack.back();
        if (top.second < top.first->parents.size()) {
            Node* p = top.first->parents[top.second++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(top.first);
            stack.pop_back();
        }
    }
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
}

void zero_grads(std::vector<Parameter>& params) {
    for (auto& p : params) p.node->grad.fill(0.0);
}

namespace ops {

namespace {

Var make_op(Tensor val, std::vector<Var> parents, std::function<void(Node&)> bw) {
    bool req = false;
    for (const auto& p : parents) req = req || p->requires_grad;
    auto n = std::make_shared<Node>(std::move(val), req);
    if (req) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(bw);
    }
    return n;
}

// C[m,n] += A[m,k] B[k,n]
void mm_nn_acc(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<std::size_t>(i) * k;
        double* c = C + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = a[p];
            const double* b = B + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C[m,n] += A[m,k] B[n,k]^T
void mm_nt_acc(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<std::size_t>(i) * k;
        double* c = C + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* b = B + static_cast<std::size_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += a[p] * b[p];
            c[j] += s;
        }
    }
}

// C[k,n] += A[m,k]^T B[m,n]
void mm_tn_acc(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<std::size_t>(i) * k;
        const double* b = B + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = a[p];
            double* c = C + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

void require_rank2(const Var& v, const char* where) { require_rank(v->val, 2, where); }

// rows/cols view of a rank-1 or rank-2 tensor treated rowwise
void row_view(const Tensor& t, int& rows, int& cols, const char* where) {
    if (t.rank() == 1) {
        rows = 1;
        cols = t.dim(0);
    } else if (t.rank() == 2) {
        rows = t.dim(0);
        cols = t.dim(1);
    } else {
        throw ShapeError(std::string(where) + ": expected rank 1 or 2, got " + t.shape_str());
    }
}

} // namespace

Var add(const Var& a, const Var& b) {
    require_same_shape(a->val, b->val, "add");
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += b->val[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        for (int s = 0; s < 2; ++s) {
            Node& p = *n.parents[s];
            if (!p.requires_grad) continue;
            for (std::int64_t i = 0; i < n.grad.numel(); ++i) p.grad[i] += n.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a->val, b->val, "sub");
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] -= b->val[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        for (std::int64_t i = 0; i < n.grad.numel(); ++i) {
            if (pa.requires_grad) pa.grad[i] += n.grad[i];
            if (pb.requires_grad) pb.grad[i] -= n.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a->val, b->val, "mul");
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= b->val[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        for (std::int64_t i = 0; i < n.grad.numel(); ++i) {
            if (pa.requires_grad) pa.grad[i] += n.grad[i] * pb.val[i];
            if (pb.requires_grad) pb.grad[i] += n.grad[i] * pa.val[i];
        }
    });
}

Var scale(const Var& a, double c) {
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= c;
    return make_op(std::move(out), {a}, [c](Node& n) {
        Node& pa = *n.parents[0];
        if (!pa.requires_grad) return;
        for (std::int64_t i = 0; i < n.grad.numel(); ++i) pa.grad[i] += c * n.grad[i];
    });
}

Var mul_scalar_var(const Var& a, const Var& s) {
    if (s->val.numel() != 1) throw ShapeError("mul_scalar_var: scalar operand must hold one element");
    const double sv = s->val[0];
    Tensor out = a->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= sv;
    return make_op(std::move(out), {a, s}, [sv](Node& n) {
        Node& pa = *n.parents[0];
        Node& ps = *n.parents[1];
        double acc = 0.0;
        for (std::int64_t i = 0; i < n.grad.numel(); ++i) {
            if (pa.requires_grad) pa.grad[i] += sv * n.grad[i];
            acc += n.grad[i] * pa.val[i];
        }
        if (ps.requires_grad) ps.grad[0] += acc;
    });
}

Var matmul(const Var& a, const Var& b) {
    require_rank2(a, "matmul lhs");
    require_rank2(b, "matmul rhs");
    const int m = a->val.dim(0), k = a->val.dim(1), n = b->val.dim(1);
    if (b->val.dim(0) != k) {
        throw ShapeError("matmul: inner dims disagree " + a->val.shape_str() + " x " + b->val.shape_str());
    }
    Tensor out({m, n});
    mm_nn_acc(a->val.data(), b->val.data(), out.data(), m, k, n);
    return make_op(std::move(out), {a, b}, [m, k, n](Node& nd) {
        Node& pa = *nd.parents[0];
        Node& pb = *nd.parents[1];
        if (pa.requires_grad) mm_nt_acc(nd.grad.data(), pb.val.data(), pa.grad.data(), m, n, k);
        if (pb.requires_grad) mm_tn_acc(pa.val.data(), nd.grad.data(), pb.grad.data(), m, k, n);
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    require_rank2(a, "matmul_nt lhs");
    require_rank2(b, "matmul_nt rhs");
    const int m = a->val.dim(0), k = a->val.dim(1), n = b->val.dim(0);
    if (b->val.dim(1) != k) {
        throw ShapeError("matmul_nt: inner dims disagree " + a->val.shape_str() + " x " + b->val.shape_str());
    }
    Tensor out({m, n});
    mm_nt_acc(a->val.data(), b->val.data(), out.data(), m, k, n);
    return make_op(std::move(out), {a, b}, [m, k, n](Node& nd) {
        Node& pa = *nd.parents[0];
        Node& pb = *nd.parents[1];
        if (pa.requires_grad) mm_nn_acc(nd.grad.data(), pb.val.data(), pa.grad.data(), m, n, k);
        if (pb.requires_grad) mm_tn_acc(nd.grad.data(), pa.val.data(), pb.grad.data(), m, n, k);
    });
}

Var linear(const Var& x, const Var& w, const Var& b) {
    require_rank2(x, "linear input");
    require_rank2(w, "linear weight");
    require_rank(b->val, 1, "linear bias");
    const int m = x->val.dim(0), k = x->val.dim(1), n = w->val.dim(0);
    if (w->val.dim(1) != k || b->val.dim(0) != n) {
        throw ShapeError("linear: shapes disagree x" + x->val.shape_str() + " w" + w->val.shape_str() +
                         " b" + b->val.shape_str());
    }
    Tensor out({m, n});
    mm_nt_acc(x->val.data(), w->val.data(), out.data(), m, k, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) += b->val[j];
    return make_op(std::move(out), {x, w, b}, [m, k, n](Node& nd) {
        Node& px = *nd.parents[0];
        Node& pw = *nd.parents[1];
        Node& pb = *nd.parents[2];
        if (px.requires_grad) mm_nn_acc(nd.grad.data(), pw.val.data(), px.grad.data(), m, n, k);
        if (pw.requires_grad) mm_tn_acc(nd.grad.data(), px.val.data(), pw.grad.data(), m, n, k);
        if (pb.requires_grad) {
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) pb.grad[j] += nd.grad.at(i, j);
        }
    });
}

Var mha(const Var& q, const Var& k, const Var& v, int heads) {
    require_rank2(q, "mha q");
    require_same_shape(q->val, k->val, "mha q/k");
    require_same_shape(q->val, v->val, "mha q/v");
    const int T = q->val.dim(0), d = q->val.dim(1);
    if (heads <= 0 || d % heads != 0) {
        throw ConfigError("mha: heads " + std::to_string(heads) + " must divide width " + std::to_string(d));
    }
    const int dh = d / heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

    auto probs = std::make_shared<std::vector<Tensor>>();
    probs->reserve(static_cast<std::size_t>(heads));
    Tensor out({T, d});
    for (int h = 0; h < heads; ++h) {
        const int off = h * dh;
        Tensor P({T, T});
        for (int i = 0; i < T; ++i) {
            double mx = -1e300;
            for (int j = 0; j < T; ++j) {
                double s = 0.0;
                for (int c = 0; c < dh; ++c) s += q->val.at(i, off + c) * k->val.at(j, off + c);
                P.at(i, j) = s * sc;
                mx = std::max(mx, P.at(i, j));
            }
            double z = 0.0;
            for (int j = 0; j < T; ++j) {
                P.at(i, j) = std::exp(P.at(i, j) - mx);
                z += P.at(i, j);
            }
            for (int j = 0; j < T; ++j) P.at(i, j) /= z;
            for (int c = 0; c < dh; ++c) {
                double s = 0.0;
                for (int j = 0; j < T; ++j) s += P.at(i, j) * v->val.at(j, off + c);
                out.at(i, off + c) = s;
            }
        }
        probs->push_back(std::move(P));
    }

    return make_op(std::move(out), {q, k, v}, [T, dh, heads, sc, probs](Node& nd) {
        Node& pq = *nd.parents[0];
        Node& pk = *nd.parents[1];
        Node& pv = *nd.parents[2];
        Tensor dP({T, T});
        Tensor dS({T, T});
        for (int h = 0; h < heads; ++h) {
            const int off = h * dh;
            const Tensor& P = (*probs)[static_cast<std::size_t>(h)];
            for (int i = 0; i < T; ++i) {
                for (int j = 0; j < T; ++j) {
                    double s = 0.0;
                    for (int c = 0; c < dh; ++c) s += nd.grad.at(i, off + c) * pv.val.at(j, off + c);
                    dP.at(i, j) = s;
                }
            }
            if (pv.requires_grad) {
                for (int j = 0; j < T; ++j)
                    for (int c = 0; c < dh; ++c) {
                        double s = 0.0;
                        for (int i = 0; i < T; ++i) s += P.at(i, j) * nd.grad.at(i, off + c);
                        pv.grad.at(j, off + c) += s;
                    }
            }
            for (int i = 0; i < T; ++i) {
                double dot = 0.0;
                for (int j = 0; j < T; ++j) dot += dP.at(i, j) * P.at(i, j);
                for (int j = 0; j < T; ++j) dS.at(i, j) = P.at(i, j) * (dP.at(i, j) - dot);
            }
            if (pq.requires_grad) {
                for (int i = 0; i < T; ++i)
                    for (int c = 0; c < dh; ++c) {
                        double s = 0.0;
                        for (int j = 0; j < T; ++j) s += dS.at(i, j) * pk.val.at(j, off + c);
                        pq.grad.at(i, off + c) += sc * s;
                    }
            }
            if (pk.requires_grad) {
                for (int j = 0; j < T; ++j)
                    for (int c = 0; c < dh; ++c) {
                        double s = 0.0;
                        for (int i = 0; i < T; ++i) s += dS.at(i, j) * pq.val.at(i, off + c);
                        pk.grad.at(j, off + c) += sc * s;
                    }
            }
        }
    });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    int R = 0, C = 0;
    row_view(x->val, R, C, "layer_norm");
    require_rank(gamma->val, 1, "layer_norm gamma");
    require_rank(beta->val, 1, "layer_norm beta");
    if (gamma->val.dim(0) != C || beta->val.dim(0) != C) {
        throw ShapeError("layer_norm: gamma/beta width must match " + std::to_string(C));
    }
    auto xhat = std::make_shared<Tensor>(Tensor({R, C}));
    auto sigma = std::make_shared<std::vector<double>>(static_cast<std::size_t>(R));
    Tensor out(x->val.shape());
    for (int r = 0; r < R; ++r) {
        const double* xr = x->val.data() + static_cast<std::size_t>(r) * C;
        double mu = 0.0;
        for (int c = 0; c < C; ++c) mu += xr[c];
        mu /= C;
        double var = 0.0;
        for (int c = 0; c < C; ++c) var += (xr[c] - mu) * (xr[c] - mu);
        var /= C;
        const double sg = std::sqrt(var + eps);
        (*sigma)[static_cast<std::size_t>(r)] = sg;
        double* xh = xhat->data() + static_cast<std::size_t>(r) * C;
        double* o = out.data() + static_cast<std::size_t>(r) * C;
        for (int c = 0; c < C; ++c) {
            xh[c] = (xr[c] - mu) / sg;
            o[c] = gamma->val[c] * xh[c] + beta->val[c];
        }
    }
    return make_op(std::move(out), {x, gamma, beta}, [R, C, xhat, sigma](Node& nd) {
        Node& px = *nd.parents[0];
        Node& pg = *nd.parents[1];
        Node& pb = *nd.parents[2];
        for (int r = 0; r < R; ++r) {
            const double* g = nd.grad.data() + static_cast<std::size_t>(r) * C;
            const double* xh = xhat->data() + static_cast<std::size_t>(r) * C;
            const double sg = (*sigma)[static_cast<std::size_t>(r)];
            double m1 = 0.0, m2 = 0.0;
            for (int c = 0; c < C; ++c) {
                const double gh = g[c] * pg.val[c];
                m1 += gh;
                m2 += gh * xh[c];
            }
            m1 /= C;
            m2 /= C;
            if (px.requires_grad) {
                double* gx = px.grad.data() + static_cast<std::size_t>(r) * C;
                for (int c = 0; c < C; ++c) {
                    const double gh = g[c] * pg.val[c];
                    gx[c] += (gh - m1 - xh[c] * m2) / sg;
                }
            }
            if (pg.requires_grad)
                for (int c = 0; c < C; ++c) pg.grad[c] += g[c] * xh[c];
            if (pb.requires_grad)
                for (int c = 0; c < C; ++c) pb.grad[c] += g[c];
        }
    });
}

Var gelu(const Var& x) {
    Tensor out = x->val;
    for (std::int64_t i = 0; i < out.numel(); ++i) {
        const double v = out[i];
        out[i] = v * 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
    }
    return make_op(std::move(out), {x}, [](Node& nd) {
        Node& px = *nd.parents[0];
        if (!px.requires_grad) return;
        constexpr double inv_sqrt_2pi = 0.3989422804014327;
        for (std::int64_t i = 0; i < nd.grad.numel(); ++i) {
            const double v = px.val[i];
            const double phi = 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
            const double dens = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            px.grad[i] += nd.grad[i] * (phi + v * dens);
        }
    });
}

namespace {
void check_tau(double tau, const char* where) {
    if (!(tau > 0.0)) throw ConfigError(std::string(where) + ": temperature must be positive");
}
} // namespace

Var softmax_rows(const Var& x, double tau) {
    check_tau(tau, "softmax_rows");
    int R = 0, C = 0;
    row_view(x->val, R, C, "softmax_rows");
    Tensor out(x->val.shape());
    for (int r = 0; r < R; ++r) {
        const double* xr = x->val.data() + static_cast<std::size_t>(r) * C;
        double* o = out.data() + static_cast<std::size_t>(r) * C;
        double mx = -1e300;
        for (int c = 0; c < C; ++c) mx = std::max(mx, xr[c] / tau);
        double z = 0.0;
        for (int c = 0; c < C; ++c) {
            o[c] = std::exp(xr[c] / tau - mx);
            z += o[c];
        }
        for (int c = 0; c < C; ++c) o[c] /= z;
    }
    return make_op(std::move(out), {x}, [R, C, tau](Node& nd) {
        Node& px = *nd.parents[0];
        if (!px.requires_grad) return;
        for (int r = 0; r < R; ++r) {
            const double* p = nd.val.data() + static_cast<std::size_t>(r) * C;
            const double* g = nd.grad.data() + static_cast<std::size_t>(r) * C;
            double* gx = px.grad.data() + static_cast<std::size_t>(r) * C;
            double dot = 0.0;
            for (int c = 0; c < C; ++c) dot += g[c] * p[c];
            for (int c = 0; c < C; ++c) gx[c] += p[c] * (g[c] - dot) / tau;
        }
    });
}

Var log_softmax_rows(const Var& x, double tau) {
    check_tau(tau, "log_softmax_rows");
    int R = 0, C = 0;
    row_view(x->val, R, C, "log_softmax_rows");
    Tensor out(x->val.shape());
    for (int r = 0; r < R; ++r) {
        const double* xr = x->val.data() + static_cast<std::size_t>(r) * C;
        double* o = out.data() + static_cast<std::size_t>(r) * C;
        double mx = -1e300;
        for (int c = 0; c < C; ++c) mx = std::max(mx, xr[c] / tau);
        double z = 0.0;
        for (int c = 0; c < C; ++c) z += std::exp(xr[c] / tau - mx);
        const double lse = mx + std::log(z);
        for (int c = 0; c < C; ++c) o[c] = xr[c] / tau - lse;
    }
    return make_op(std::move(out), {x}, [R, C, tau](Node& nd) {
        Node& px = *nd.parents[0];
        if (!px.requires_grad) return;
        for (int r = 0; r < R; ++r) {
            const double* y = nd.val.data() + static_cast<std::size_t>(r) * C;
            const double* g = nd.grad.data() + static_cast<std::size_t>(r) * C;
            double* gx = px.grad.data() + static_cast<std::size_t>(r) * C;
            double gs = 0.0;
            for (int c = 0; c < C; ++c) gs += g[c];
            for (int c = 0; c < C; ++c) gx[c] += (g[c] - std::exp(y[c]) * gs) / tau;
        }
    });
}

Var l2_normalize_rows(const Var& x, double eps) {
    int R = 0, C = 0;
    row_view(x->val, R, C, "l2_normalize_rows");
    Tensor out(x->val.shape());
    for (int r = 0; r < R; ++r) {
        const double* xr = x->val.data() + static_cast<std::size_t>(r) * C;
        double n2 = 0.0;
        for (int c = 0; c < C; ++c) n2 += xr[c] * xr[c];
        const double nr = std::sqrt(n2);
        if (nr < eps) throw DegenerateInputError("l2_normalize_rows: row " + std::to_string(r) + " has near-zero norm");
        double* o = out.data() + static_cast<std::size_t>(r) * C;
        for (int c = 0; c < C; ++c) o[c] = xr[c] / nr;
    }
    return make_op(std::move(out), {x}, [R, C](Node& nd) {
        Node& px = *nd.parents[0];
        if (!px.requires_grad) return;
        for (int r = 0; r < R; ++r) {
            const double* xr = px.val.data() + static_cast<std::size_t>(r) * C;
            const double* y = nd.val.data() + static_cast<std::size_t>(r) * C;
            const double* g = nd.grad.data() + static_cast<std::size_t>(r) * C;
            double* gx = px.grad.data() + static_cast<std::size_t>(r) * C;
            double n2 = 0.0;
            for (int c = 0; c < C; ++c) n2 += xr[c] * xr[c];
            const double nr = std::sqrt(n2);
            double dot = 0.0;
            for (int c = 0; c < C; ++c) dot += y[c] * g[c];
            for (int c = 0; c < C; ++c) gx[c] += (g[c] - y[c] * dot) / nr;
        }
    });
}

Var grad_reverse(const Var& x, double lambda) {
    Tensor out = x->val;
    return make_op(std::move(out), {x}, [lambda](Node& nd) {
        Node& px = *nd.parents[0];
        if (!px.requires_grad) return;
        for (std::int64_t i = 0; i < nd.grad.numel(); ++i) px.grad[i] += -lambda * nd.grad[i];
    });
}

Var vstack(const std::vector<Var>& rows) {
    if (rows.empty()) throw DomainError("vstack: empty row list");
    const int d = rows[0]->val.dim(0);
    for (const auto& r : rows) {
        require_rank(r->val, 1, "vstack row");
        if (r->val.dim(0) != d) throw ShapeError("vstack: rows must share length");
    }
    const int N = static_cast<int>(rows.size());
    Tensor out({N, d});
    for (int i = 0; i < N; ++i)
        for (int c = 0; c < d; ++c) out.at(i, c) = rows[static_cast<std::size_t>(i)]->val[c];
    std::vector<Var> parents(rows.begin(), rows.end());
    return make_op(std::move(out), std::move(parents), [N, d](Node& nd) {
        for (int i = 0; i < N; ++i) {
            Node& p = *nd.parents[static_cast<std::size_t>(i)];
            if (!p.requires_grad) continue;
            for (int c = 0; c < d; ++c) p.grad[c] += nd.grad.at(i, c);
        }
    });
}

Var vconcat(const Var& a, const Var& b) {
    require_rank2(a, "vconcat lhs");
    require_rank2(b, "vconcat rhs");
    if (a->val.dim(1) != b->val.dim(1)) throw ShapeError("vconcat: column counts differ");
    const int ra = a->val.dim(0), rb = b->val.dim(0), C = a->val.dim(1);
    Tensor out({ra + rb, C});
    for (int i = 0; i < ra; ++i)
        for (int c = 0; c < C; ++c) out.at(i, c) = a->val.at(i, c);
    for (int i = 0; i < rb; ++i)
        for (int c = 0; c < C; ++c) out.at(ra + i, c) = b->val.at(i, c);
    return make_op(std::move(out), {a, b}, [ra, rb, C](Node& nd) {
        Node& pa = *nd.parents[0];
        Node& pb = *nd.parents[1];
        if (pa.requires_grad)
            for (int i = 0; i < ra; ++i)
                for (int c = 0; c < C; ++c) pa.grad.at(i, c) += nd.grad.at(i, c);
        if (pb.requires_grad)
            for (int i = 0; i < rb; ++i)
                for (int c = 0; c < C; ++c) pb.grad.at(i, c) += nd.grad.at(ra + i, c);
    });
}

Var slice_row(const Var& x, int row) {
    require_rank2(x, "slice_row");
    const int R = x->val.dim(0), C = x->val.dim(1);
    if (row < 0 || row >= R) throw DomainError("slice_row: index out of range");
    Tensor out({C});
    for (int c = 0; c < C; ++c) out[c] = x->val.at(row, c);
    return make_op(std::move(out), {x}, [row, C](Node& nd) {
        Node& px = *nd.parents[0];
        if (!px.requires_grad) return;
        for (int c = 0; c < C; ++c) px.grad.at(row, c) += nd.grad[c];
    });
}

Var slice_rows(const Var& x, int start, int count) {
    require_rank2(x, "slice_rows");
    const int R = x->val.dim(0), C = x->val.dim(1);
    if (start < 0 || count <= 0 || start + count > R) throw DomainError("slice_rows: range out of bounds");
    Tensor out({count, C});
    for (int i = 0; i < count; ++i)
        for (int c = 0; c < C; ++c) out.at(i, c) = x->val.at(start + i, c);
    return make_op(std::move(out), {x}, [start, count, C](Node& nd) {
        Node& px = *nd.parents[0];
        if (!px.requires_grad) return;
        for (int i = 0; i < count; ++i)
            for (int c = 0; c < C; ++c) px.grad.at(start + i, c) += nd.grad.at(i, c);
    });
}

Var pick(const Var& x, int i) {
    require_rank(x->val, 1, "pick");
    if (i < 0 || i >= x->val.dim(0)) throw DomainError("pick: index out of range");
    Tensor out({1}, {x->val[i]});
    return make_op(std::move(out), {x}, [i](Node& nd) {
        Node& px = *nd.parents[0];
        if (px.requires_grad) px.grad[i] += nd.grad[0];
    });
}

Var gather_rows(const Var& x, const std::vector<int>& idx) {
    require_rank2(x, "gather_rows");
    const int R = x->val.dim(0), C = x->val.dim(1);
    if (static_cast<int>(idx.size()) != R) throw ShapeError("gather_rows: one index per row required");
    Tensor out({R});
    for (int r = 0; r < R; ++r) {
        if (idx[static_cast<std::size_t>(r)] < 0 || idx[static_cast<std::size_t>(r)] >= C) {
            throw DomainError("gather_rows: index out of range at row " + std::to_string(r));
        }
        out[r] = x->val.at(r, idx[static_cast<std::size_t>(r)]);
    }
    auto ids = std::make_shared<std::vector<int>>(idx);
    return make_op(std::move(out), {x}, [ids](Node& nd) {
        Node& px = *nd.parents[0];
        if (!px.requires_grad) return;
        for (std::size_t r = 0; r < ids->size(); ++r) px.grad.at(static_cast<int>(r), (*ids)[r]) += nd.grad[static_cast<std::int64_t>(r)];
    });
}

Var embed_rows(const Var& table, const std::vector<int>& ids) {
    require_rank2(table, "embed_rows table");
    const int V = table->val.dim(0), d = table->val.dim(1);
    const int n = static_cast<int>(ids.size());
    if (n == 0) throw DomainError("embed_rows: empty id list");
    Tensor out({n, d});
    for (int i = 0; i < n; ++i) {
        const int id = ids[static_cast<std::size_t>(i)];
        if (id < 0 || id >= V) throw DomainError("embed_rows: id " + std::to_string(id) + " outside vocab");
        for (int c = 0; c < d; ++c) out.at(i, c) = table->val.at(id, c);
    }
    auto kept = std::make_shared<std::vector<int>>(ids);
    return make_op(std::move(out), {table}, [kept, d](Node& nd) {
        Node& pt = *nd.parents[0];
        if (!pt.requires_grad) return;
        for (std::size_t i = 0; i < kept->size(); ++i)
            for (int c = 0; c < d; ++c) pt.grad.at((*kept)[i], c) += nd.grad.at(static_cast<int>(i), c);
    });
}

Var mean_all(const Var& x) {
    const std::int64_t n = x->val.numel();
    if (n == 0) throw DomainError("mean_all: empty tensor");
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i) s += x->val[i];
    Tensor out({1}, {s / static_cast<double>(n)});
    return make_op(std::move(out), {x}, [n](Node& nd) {
        Node& px = *nd.parents[0];
        if (!px.requires_grad) return;
        const double g = nd.grad[0] / static_cast<double>(n);
        for (std::int64_t i = 0; i < n; ++i) px.grad[i] += g;
    });
}

Var sum_all(const Var& x) {
    const std::int64_t n = x->val.numel();
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i) s += x->val[i];
    Tensor out({1}, {s});
    return make_op(std::move(out), {x}, [n](Node& nd) {
        Node& px = *nd.parents[0];
        if (!px.requires_grad) return;
        for (std::int64_t i = 0; i < n; ++i) px.grad[i] += nd.grad[0];
    });
}

Var reshape(const Var& x, std::vector<int> shape) {
    if (shape_numel(shape) != x->val.numel()) {
        throw ShapeError("reshape: element count mismatch " + x->val.shape_str() + " -> " + shape_to_string(shape));
    }
    Tensor out(std::move(shape), x->val.values());
    return make_op(std::move(out), {x}, [](Node& nd) {
        Node& px = *nd.parents[0];
        if (!px.requires_grad) return;
        for (std::int64_t i = 0; i < nd.grad.numel(); ++i) px.grad[i] += nd.grad[i];
    });
}

} // namespace ops

} // namespace tlv
