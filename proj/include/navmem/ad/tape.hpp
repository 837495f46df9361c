#pragma once

#include "navmem/ad/tensor.hpp"

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace navmem::ad {

// Trainable tensor plus its persistent gradient / Adam state.
struct Parameter {
    std::string name;
    Tensor value;
    std::vector<double> grad;
    std::vector<double> adam_m;
    std::vector<double> adam_v;

    Parameter(std::string n, Tensor t) : name(std::move(n)), value(std::move(t)) {
        value.requires_grad = true;
        grad.assign(value.numel(), 0.0);
        adam_m.assign(value.numel(), 0.0);
        adam_v.assign(value.numel(), 0.0);
    }
};

using NodeId = std::size_t;

// Reverse-mode tape over a fixed operator set. Nodes are appended in
// topological order by construction; backward walks them once in reverse.
// Tapes are single-owner and single-threaded; parallelism happens across
// tapes (one per packed chunk / episode), never inside one.
class Tape {
public:
    struct Node {
        const char* op;
        Tensor value;
        std::vector<double> grad;  // lazily allocated
        bool needs_grad = false;
        Parameter* param = nullptr;             // set for param leaves
        std::function<void(Tape&, Node&)> back; // null for leaves
    };

    std::size_t size() const { return nodes_.size(); }
    const Tensor& val(NodeId id) const { return nodes_[id].value; }
    const std::vector<double>& grad(NodeId id) const { return nodes_[id].grad; }
    const char* op_name(NodeId id) const { return nodes_[id].op; }

    // ---- leaves ----

    NodeId leaf(Tensor t) {
        Node n;
        n.op = "leaf";
        n.value = std::move(t);
        return push(std::move(n));
    }

    NodeId param(Parameter& p) {
        Node n;
        n.op = "param";
        n.value = p.value;  // snapshot; parameters mutate only between tapes
        n.needs_grad = true;
        n.param = &p;
        return push(std::move(n));
    }

    // ---- ops ----

    NodeId matmul(NodeId a, NodeId b) {
        const Tensor& A = val2d(a, "matmul lhs");
        const Tensor& B = val2d(b, "matmul rhs");
        if (A.cols() != B.rows())
            throw std::invalid_argument("matmul: inner dimensions differ: " + shape_str(A.shape) + " vs " + shape_str(B.shape));
        int m = A.rows(), k = A.cols(), p = B.cols();
        Tensor Y = Tensor::zeros({m, p});
        for (int i = 0; i < m; ++i) {
            const double* arow = &A.data[static_cast<std::size_t>(i) * k];
            double* yrow = &Y.data[static_cast<std::size_t>(i) * p];
            for (int kk = 0; kk < k; ++kk) {
                double av = arow[kk];
                if (av == 0.0) continue;
                const double* brow = &B.data[static_cast<std::size_t>(kk) * p];
                for (int j = 0; j < p; ++j) yrow[j] += av * brow[j];
            }
        }
        return make("matmul", std::move(Y), {a, b}, [a, b, m, k, p](Tape& t, Node& n) {
            const double* dy = n.grad.data();
            if (t.needs(a)) {
                const Tensor& B = t.nodes_[b].value;
                double* da = t.grad_buf(a);
                for (int i = 0; i < m; ++i)
                    for (int kk = 0; kk < k; ++kk) {
                        const double* dyrow = dy + static_cast<std::size_t>(i) * p;
                        const double* brow = &B.data[static_cast<std::size_t>(kk) * p];
                        double acc = 0.0;
                        for (int j = 0; j < p; ++j) acc += dyrow[j] * brow[j];
                        da[static_cast<std::size_t>(i) * k + kk] += acc;
                    }
            }
            if (t.needs(b)) {
                const Tensor& A = t.nodes_[a].value;
                double* db = t.grad_buf(b);
                for (int i = 0; i < m; ++i) {
                    const double* arow = &A.data[static_cast<std::size_t>(i) * k];
                    const double* dyrow = dy + static_cast<std::size_t>(i) * p;
                    for (int kk = 0; kk < k; ++kk) {
                        double av = arow[kk];
                        if (av == 0.0) continue;
                        double* dbrow = db + static_cast<std::size_t>(kk) * p;
                        for (int j = 0; j < p; ++j) dbrow[j] += av * dyrow[j];
                    }
                }
            }
        });
    }

    // Y = A * B^T. A:[m x k], B:[n x k] -> [m x n]. The attention score kernel.
    NodeId matmul_bt(NodeId a, NodeId b) {
        const Tensor& A = val2d(a, "matmul_bt lhs");
        const Tensor& B = val2d(b, "matmul_bt rhs");
        if (A.cols() != B.cols())
            throw std::invalid_argument("matmul_bt: inner dimensions differ: " + shape_str(A.shape) + " vs " + shape_str(B.shape));
        int m = A.rows(), k = A.cols(), nn = B.rows();
        Tensor Y = Tensor::zeros({m, nn});
        for (int i = 0; i < m; ++i) {
            const double* arow = &A.data[static_cast<std::size_t>(i) * k];
            double* yrow = &Y.data[static_cast<std::size_t>(i) * nn];
            for (int j = 0; j < nn; ++j) {
                const double* brow = &B.data[static_cast<std::size_t>(j) * k];
                double acc = 0.0;
                for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
                yrow[j] = acc;
            }
        }
        return make("matmul_bt", std::move(Y), {a, b}, [a, b, m, k, nn](Tape& t, Node& n) {
            const double* dy = n.grad.data();
            if (t.needs(a)) {
                const Tensor& B = t.nodes_[b].value;
                double* da = t.grad_buf(a);
                for (int i = 0; i < m; ++i) {
                    const double* dyrow = dy + static_cast<std::size_t>(i) * nn;
                    double* darow = da + static_cast<std::size_t>(i) * k;
                    for (int j = 0; j < nn; ++j) {
                        double g = dyrow[j];
                        if (g == 0.0) continue;
                        const double* brow = &B.data[static_cast<std::size_t>(j) * k];
                        for (int kk = 0; kk < k; ++kk) darow[kk] += g * brow[kk];
                    }
                }
            }
            if (t.needs(b)) {
                const Tensor& A = t.nodes_[a].value;
                double* db = t.grad_buf(b);
                for (int i = 0; i < m; ++i) {
                    const double* dyrow = dy + static_cast<std::size_t>(i) * nn;
                    const double* arow = &A.data[static_cast<std::size_t>(i) * k];
                    for (int j = 0; j < nn; ++j) {
                        double g = dyrow[j];
                        if (g == 0.0) continue;
                        double* dbrow = db + static_cast<std::size_t>(j) * k;
                        for (int kk = 0; kk < k; ++kk) dbrow[kk] += g * arow[kk];
                    }
                }
            }
        });
    }

    NodeId add(NodeId a, NodeId b) {
        const Tensor& A = nodes_[a].value;
        const Tensor& B = nodes_[b].value;
        if (!A.same_shape(B))
            throw std::invalid_argument("add: shape mismatch: " + shape_str(A.shape) + " vs " + shape_str(B.shape));
        Tensor Y = A;
        for (std::size_t i = 0; i < Y.data.size(); ++i) Y.data[i] += B.data[i];
        return make("add", std::move(Y), {a, b}, [a, b](Tape& t, Node& n) {
            for (NodeId in : {a, b}) {
                if (!t.needs(in)) continue;
                double* d = t.grad_buf(in);
                for (std::size_t i = 0; i < n.grad.size(); ++i) d[i] += n.grad[i];
            }
        });
    }

    // [n x C] + [C] broadcast over the last dimension (the only broadcast).
    NodeId add_bias(NodeId a, NodeId bias) {
        const Tensor& A = val2d(a, "add_bias lhs");
        const Tensor& B = nodes_[bias].value;
        if (static_cast<std::size_t>(A.cols()) != B.numel())
            throw std::invalid_argument("add_bias: bias length " + shape_str(B.shape) + " vs cols of " + shape_str(A.shape));
        int n = A.rows(), c = A.cols();
        Tensor Y = A;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < c; ++j) Y.data[static_cast<std::size_t>(i) * c + j] += B.data[static_cast<std::size_t>(j)];
        return make("add_bias", std::move(Y), {a, bias}, [a, bias, n, c](Tape& t, Node& nd) {
            if (t.needs(a)) {
                double* d = t.grad_buf(a);
                for (std::size_t i = 0; i < nd.grad.size(); ++i) d[i] += nd.grad[i];
            }
            if (t.needs(bias)) {
                double* d = t.grad_buf(bias);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < c; ++j) d[j] += nd.grad[static_cast<std::size_t>(i) * c + j];
            }
        });
    }

    NodeId mul(NodeId a, NodeId b) {
        const Tensor& A = nodes_[a].value;
        const Tensor& B = nodes_[b].value;
        if (!A.same_shape(B))
            throw std::invalid_argument("mul: shape mismatch: " + shape_str(A.shape) + " vs " + shape_str(B.shape));
        Tensor Y = A;
        for (std::size_t i = 0; i < Y.data.size(); ++i) Y.data[i] *= B.data[i];
        return make("mul", std::move(Y), {a, b}, [a, b](Tape& t, Node& n) {
            if (t.needs(a)) {
                const Tensor& B = t.nodes_[b].value;
                double* d = t.grad_buf(a);
                for (std::size_t i = 0; i < n.grad.size(); ++i) d[i] += n.grad[i] * B.data[i];
            }
            if (t.needs(b)) {
                const Tensor& A = t.nodes_[a].value;
                double* d = t.grad_buf(b);
                for (std::size_t i = 0; i < n.grad.size(); ++i) d[i] += n.grad[i] * A.data[i];
            }
        });
    }

    NodeId scale(NodeId a, double c) {
        Tensor Y = nodes_[a].value;
        for (double& v : Y.data) v *= c;
        return make("scale", std::move(Y), {a}, [a, c](Tape& t, Node& n) {
            if (!t.needs(a)) return;
            double* d = t.grad_buf(a);
            for (std::size_t i = 0; i < n.grad.size(); ++i) d[i] += c * n.grad[i];
        });
    }

    // Row-wise softmax with per-row support limit: row i sees columns
    // [0, limits[i]); everything past the limit is exactly zero. A full
    // causal or packed block mask reduces to these limits. Stabilized by
    // max subtraction inside the support.
    NodeId softmax_rows_limited(NodeId x, std::vector<int> limits) {
        const Tensor& X = val2d(x, "softmax input");
        int n = X.rows(), c = X.cols();
        if (static_cast<int>(limits.size()) != n) throw std::invalid_argument("softmax: limits size != rows");
        Tensor Y = Tensor::zeros({n, c});
        for (int i = 0; i < n; ++i) {
            int lim = limits[static_cast<std::size_t>(i)];
            if (lim < 1 || lim > c) throw std::invalid_argument("softmax: row limit out of range");
            const double* xr = &X.data[static_cast<std::size_t>(i) * c];
            double* yr = &Y.data[static_cast<std::size_t>(i) * c];
            double mx = xr[0];
            for (int j = 1; j < lim; ++j) mx = std::max(mx, xr[j]);
            double sum = 0.0;
            for (int j = 0; j < lim; ++j) {
                yr[j] = std::exp(xr[j] - mx);
                sum += yr[j];
            }
            for (int j = 0; j < lim; ++j) yr[j] /= sum;
        }
        auto lims = std::make_shared<std::vector<int>>(std::move(limits));
        return make("softmax_rows", std::move(Y), {x}, [x, lims, n, c](Tape& t, Node& nd) {
            if (!t.needs(x)) return;
            double* dx = t.grad_buf(x);
            const double* y = nd.value.data.data();
            const double* dy = nd.grad.data();
            for (int i = 0; i < n; ++i) {
                int lim = (*lims)[static_cast<std::size_t>(i)];
                std::size_t off = static_cast<std::size_t>(i) * c;
                double dot = 0.0;
                for (int j = 0; j < lim; ++j) dot += dy[off + j] * y[off + j];
                for (int j = 0; j < lim; ++j) dx[off + j] += y[off + j] * (dy[off + j] - dot);
            }
        });
    }

    NodeId softmax_rows(NodeId x) {
        const Tensor& X = val2d(x, "softmax input");
        return softmax_rows_limited(x, std::vector<int>(static_cast<std::size_t>(X.rows()), X.cols()));
    }

    static constexpr double kLayerNormEps = 1e-5;

    NodeId layernorm(NodeId x, NodeId gain, NodeId bias) {
        const Tensor& X = val2d(x, "layernorm input");
        const Tensor& G = nodes_[gain].value;
        const Tensor& B = nodes_[bias].value;
        int n = X.rows(), c = X.cols();
        if (G.numel() != static_cast<std::size_t>(c) || B.numel() != static_cast<std::size_t>(c))
            throw std::invalid_argument("layernorm: gain/bias length != last dim");
        Tensor Y = Tensor::zeros({n, c});
        auto saved = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) * 2);  // mean, inv-std per row
        for (int i = 0; i < n; ++i) {
            const double* xr = &X.data[static_cast<std::size_t>(i) * c];
            double mu = 0.0;
            for (int j = 0; j < c; ++j) mu += xr[j];
            mu /= c;
            double var = 0.0;
            for (int j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
            var /= c;
            double inv = 1.0 / std::sqrt(var + kLayerNormEps);
            (*saved)[static_cast<std::size_t>(i) * 2] = mu;
            (*saved)[static_cast<std::size_t>(i) * 2 + 1] = inv;
            double* yr = &Y.data[static_cast<std::size_t>(i) * c];
            for (int j = 0; j < c; ++j) yr[j] = G.data[static_cast<std::size_t>(j)] * (xr[j] - mu) * inv + B.data[static_cast<std::size_t>(j)];
        }
        return make("layernorm", std::move(Y), {x, gain, bias}, [x, gain, bias, saved, n, c](Tape& t, Node& nd) {
            const Tensor& X = t.nodes_[x].value;
            const Tensor& G = t.nodes_[gain].value;
            const double* dy = nd.grad.data();
            double* dx = t.needs(x) ? t.grad_buf(x) : nullptr;
            double* dg = t.needs(gain) ? t.grad_buf(gain) : nullptr;
            double* db = t.needs(bias) ? t.grad_buf(bias) : nullptr;
            for (int i = 0; i < n; ++i) {
                std::size_t off = static_cast<std::size_t>(i) * c;
                double mu = (*saved)[static_cast<std::size_t>(i) * 2];
                double inv = (*saved)[static_cast<std::size_t>(i) * 2 + 1];
                if (dg || db) {
                    for (int j = 0; j < c; ++j) {
                        double xhat = (X.data[off + j] - mu) * inv;
                        if (dg) dg[j] += dy[off + j] * xhat;
                        if (db) db[j] += dy[off + j];
                    }
                }
                if (dx) {
                    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                    for (int j = 0; j < c; ++j) {
                        double xhat = (X.data[off + j] - mu) * inv;
                        double dxh = dy[off + j] * G.data[static_cast<std::size_t>(j)];
                        sum_dxhat += dxh;
                        sum_dxhat_xhat += dxh * xhat;
                    }
                    for (int j = 0; j < c; ++j) {
                        double xhat = (X.data[off + j] - mu) * inv;
                        double dxh = dy[off + j] * G.data[static_cast<std::size_t>(j)];
                        dx[off + j] += inv * (dxh - (sum_dxhat + xhat * sum_dxhat_xhat) / c);
                    }
                }
            }
        });
    }

    // Exact GELU, x * Phi(x).
    NodeId gelu(NodeId x) {
        const Tensor& X = nodes_[x].value;
        Tensor Y = X;
        for (double& v : Y.data) v = v * 0.5 * (1.0 + std::erf(v * 0.7071067811865475244));
        return make("gelu", std::move(Y), {x}, [x](Tape& t, Node& n) {
            if (!t.needs(x)) return;
            const Tensor& X = t.nodes_[x].value;
            double* dx = t.grad_buf(x);
            for (std::size_t i = 0; i < n.grad.size(); ++i) {
                double v = X.data[i];
                double phi = 0.5 * (1.0 + std::erf(v * 0.7071067811865475244));
                double pdf = std::exp(-0.5 * v * v) * 0.3989422804014326779;
                dx[i] += n.grad[i] * (phi + v * pdf);
            }
        });
    }

    // Rows of `table` gathered by index.
    NodeId embed(NodeId table, std::vector<int> indices) {
        const Tensor& T = val2d(table, "embedding table");
        int v = T.rows(), c = T.cols();
        Tensor Y = Tensor::zeros({static_cast<int>(indices.size()), c});
        for (std::size_t i = 0; i < indices.size(); ++i) {
            int ix = indices[i];
            if (ix < 0 || ix >= v)
                throw std::out_of_range("embed: index " + std::to_string(ix) + " outside table of " + std::to_string(v) + " rows");
            for (int j = 0; j < c; ++j) Y.data[i * c + j] = T.data[static_cast<std::size_t>(ix) * c + j];
        }
        auto idx = std::make_shared<std::vector<int>>(std::move(indices));
        return make("embed", std::move(Y), {table}, [table, idx, c](Tape& t, Node& n) {
            if (!t.needs(table)) return;
            double* d = t.grad_buf(table);
            for (std::size_t i = 0; i < idx->size(); ++i) {
                std::size_t row = static_cast<std::size_t>((*idx)[i]);
                for (int j = 0; j < c; ++j) d[row * c + j] += n.grad[i * static_cast<std::size_t>(c) + j];
            }
        });
    }

    NodeId concat_rows(const std::vector<NodeId>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat_rows: empty part list");
        int c = val2d(parts[0], "concat part").cols();
        int total = 0;
        for (NodeId p : parts) {
            const Tensor& t = val2d(p, "concat part");
            if (t.cols() != c) throw std::invalid_argument("concat_rows: column mismatch");
            total += t.rows();
        }
        Tensor Y = Tensor::zeros({total, c});
        std::size_t off = 0;
        for (NodeId p : parts) {
            const Tensor& t = nodes_[p].value;
            std::copy(t.data.begin(), t.data.end(), Y.data.begin() + static_cast<std::ptrdiff_t>(off));
            off += t.data.size();
        }
        auto ps = std::make_shared<std::vector<NodeId>>(parts);
        return make("concat_rows", std::move(Y), parts, [ps](Tape& t, Node& n) {
            std::size_t off = 0;
            for (NodeId p : *ps) {
                std::size_t sz = t.nodes_[p].value.data.size();
                if (t.needs(p)) {
                    double* d = t.grad_buf(p);
                    for (std::size_t i = 0; i < sz; ++i) d[i] += n.grad[off + i];
                }
                off += sz;
            }
        });
    }

    // Rows [r0, r1) of x.
    NodeId slice_rows(NodeId x, int r0, int r1) {
        const Tensor& X = val2d(x, "slice input");
        if (r0 < 0 || r1 < r0 || r1 > X.rows())
            throw std::out_of_range("slice_rows: [" + std::to_string(r0) + "," + std::to_string(r1) + ") of " + shape_str(X.shape));
        int c = X.cols();
        Tensor Y = Tensor::zeros({r1 - r0, c});
        std::copy(X.data.begin() + static_cast<std::ptrdiff_t>(r0) * c,
                  X.data.begin() + static_cast<std::ptrdiff_t>(r1) * c, Y.data.begin());
        return make("slice_rows", std::move(Y), {x}, [x, r0, c](Tape& t, Node& n) {
            if (!t.needs(x)) return;
            double* d = t.grad_buf(x) + static_cast<std::size_t>(r0) * c;
            for (std::size_t i = 0; i < n.grad.size(); ++i) d[i] += n.grad[i];
        });
    }

    // Full mean reduction to a scalar [1].
    NodeId mean(NodeId x) {
        const Tensor& X = nodes_[x].value;
        double s = 0.0;
        for (double v : X.data) s += v;
        std::size_t n = X.data.size();
        Tensor Y({1}, {s / static_cast<double>(n)});
        return make("mean", std::move(Y), {x}, [x, n](Tape& t, Node& nd) {
            if (!t.needs(x)) return;
            double g = nd.grad[0] / static_cast<double>(n);
            double* d = t.grad_buf(x);
            for (std::size_t i = 0; i < n; ++i) d[i] += g;
        });
    }

    // Mean negative log-softmax of the target entries. Saves the softmax.
    NodeId cross_entropy(NodeId logits, std::vector<int> targets) {
        const Tensor& X = val2d(logits, "cross_entropy logits");
        int n = X.rows(), v = X.cols();
        if (static_cast<int>(targets.size()) != n) throw std::invalid_argument("cross_entropy: target count != rows");
        auto probs = std::make_shared<std::vector<double>>(X.data.size());
        double loss = 0.0;
        for (int i = 0; i < n; ++i) {
            int tgt = targets[static_cast<std::size_t>(i)];
            if (tgt < 0 || tgt >= v)
                throw std::out_of_range("cross_entropy: target " + std::to_string(tgt) + " outside vocab of " + std::to_string(v));
            const double* xr = &X.data[static_cast<std::size_t>(i) * v];
            double* pr = probs->data() + static_cast<std::size_t>(i) * v;
            double mx = xr[0];
            for (int j = 1; j < v; ++j) mx = std::max(mx, xr[j]);
            double sum = 0.0;
            for (int j = 0; j < v; ++j) {
                pr[j] = std::exp(xr[j] - mx);
                sum += pr[j];
            }
            for (int j = 0; j < v; ++j) pr[j] /= sum;
            loss -= std::log(pr[tgt]);
        }
        Tensor Y({1}, {loss / n});
        auto tgts = std::make_shared<std::vector<int>>(std::move(targets));
        return make("cross_entropy", std::move(Y), {logits}, [logits, probs, tgts, n, v](Tape& t, Node& nd) {
            if (!t.needs(logits)) return;
            double g = nd.grad[0] / n;
            double* d = t.grad_buf(logits);
            for (int i = 0; i < n; ++i) {
                std::size_t off = static_cast<std::size_t>(i) * v;
                for (int j = 0; j < v; ++j) d[off + j] += g * (*probs)[off + j];
                d[off + (*tgts)[static_cast<std::size_t>(i)]] -= g;
            }
        });
    }

    // ---- backward ----

    // Seeds the root (scalar or full tensor) and walks the tape once in
    // reverse. Deterministic: node order and kernel loops are fixed.
    void backward(NodeId root, double seed = 1.0) {
        Node& r = nodes_[root];
        if (r.grad.empty()) r.grad.assign(r.value.numel(), 0.0);
        for (double& g : r.grad) g = seed;
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.needs_grad || !n.back || n.grad.empty()) continue;
            n.back(*this, n);
        }
    }

    // Adds every param node's tape gradient into its Parameter accumulator.
    // Callers invoke this serially, in a fixed order across tapes.
    void add_grads_to_params() {
        for (NodeId id : param_nodes_) {
            Node& n = nodes_[id];
            if (n.grad.empty()) continue;
            for (std::size_t i = 0; i < n.grad.size(); ++i) n.param->grad[i] += n.grad[i];
        }
    }

    bool needs(NodeId id) const { return nodes_[id].needs_grad; }

    double* grad_buf(NodeId id) {
        Node& n = nodes_[id];
        if (n.grad.empty()) n.grad.assign(n.value.numel(), 0.0);
        return n.grad.data();
    }

private:
    const Tensor& val2d(NodeId id, const char* what) const {
        const Tensor& t = nodes_[id].value;
        if (t.shape.size() > 2) throw std::invalid_argument(std::string(what) + ": rank > 2 unsupported");
        return t;
    }

    NodeId push(Node n) {
        nodes_.push_back(std::move(n));
        if (nodes_.back().param) param_nodes_.push_back(nodes_.size() - 1);
        return nodes_.size() - 1;
    }

    NodeId make(const char* op, Tensor value, const std::vector<NodeId>& inputs,
                std::function<void(Tape&, Node&)> back) {
        Node n;
        n.op = op;
        n.value = std::move(value);
        for (NodeId in : inputs) n.needs_grad = n.needs_grad || nodes_[in].needs_grad;
        if (n.needs_grad) n.back = std::move(back);
        return push(std::move(n));
    }

    std::vector<Node> nodes_;
    std::vector<NodeId> param_nodes_;
};

}  // namespace navmem::ad
