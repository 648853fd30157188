#pragma once

#include <Eigen/Dense>

#if defined(__GLIBC__) || defined(__linux__)
#include <malloc.h>
#endif

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrvit/rng.hpp"
#include "amrvit/tensor.hpp"

namespace amrvit {

namespace detail {
inline void check(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Tape buffers are released and reallocated every batch; keeping them out of
// mmap and holding freed arenas avoids a page-fault per allocation.
inline void tune_allocator() {
#if defined(__GLIBC__) || defined(__linux__)
    static const bool done = [] {
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, -1);
        return true;
    }();
    (void)done;
#endif
}
}  // namespace detail

// Reverse-mode autodiff over a tape. A graph is built per batch: leaves are
// added with input()/param(), ops append nodes in creation order, and
// backward() walks the tape in reverse, so gradient accumulation order is
// fixed and runs are reproducible. Heavy matrix products go through Eigen.
template <typename T>
class Graph {
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using MapM = Eigen::Map<Mat>;
    using CMapM = Eigen::Map<const Mat>;
    using MapV = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
    using CMapV = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

public:
    Graph() { detail::tune_allocator(); }

    // ---- leaves ----

    int input(Tensor<T> val) { return push(std::move(val), false, nullptr); }

    int param(Tensor<T> val) { return push(std::move(val), true, nullptr); }

    // ---- access ----

    const Tensor<T>& value(int id) const { return nodes_[id].val; }
    const Tensor<T>& grad(int id) const {
        detail::check(!nodes_[id].grad.v.empty(), "grad: not computed for node");
        return nodes_[id].grad;
    }
    size_t size() const { return nodes_.size(); }

    // ---- elementwise / shape ----

    int add(int a, int b) {
        detail::check(val(a).same_shape(val(b)), "add: shape mismatch");
        Tensor<T> out = val(a);
        const T* pb = val(b).data();
        for (int64_t k = 0; k < out.numel(); ++k) out.v[k] += pb[k];
        return push(std::move(out), needs(a) || needs(b), [a, b](Graph& g, int self) {
            const Tensor<T>& dy = g.nodes_[self].grad;
            if (Tensor<T>* da = g.accum(a))
                for (int64_t k = 0; k < dy.numel(); ++k) da->v[k] += dy.v[k];
            if (Tensor<T>* db = g.accum(b))
                for (int64_t k = 0; k < dy.numel(); ++k) db->v[k] += dy.v[k];
        });
    }

    // x[B, n, d] + pos[n, d], broadcast over the leading axis
    int add_tokens(int x, int pos) {
        detail::check(val(x).ndim() == 3 && val(pos).ndim() == 2 && val(x).dim(1) == val(pos).dim(0) &&
                          val(x).dim(2) == val(pos).dim(1),
                      "add_tokens: shape mismatch");
        Tensor<T> out = val(x);
        const int64_t bsz = out.dim(0), rest = out.numel() / bsz;
        for (int64_t b = 0; b < bsz; ++b)
            for (int64_t k = 0; k < rest; ++k) out.v[b * rest + k] += val(pos).v[k];
        return push(std::move(out), needs(x) || needs(pos), [x, pos, bsz, rest](Graph& g, int self) {
            const Tensor<T>& dy = g.nodes_[self].grad;
            if (Tensor<T>* dx = g.accum(x))
                for (int64_t k = 0; k < dy.numel(); ++k) dx->v[k] += dy.v[k];
            if (Tensor<T>* dp = g.accum(pos))
                for (int64_t b = 0; b < bsz; ++b)
                    for (int64_t k = 0; k < rest; ++k) dp->v[k] += dy.v[b * rest + k];
        });
    }

    int scale_const(int a, T c) {
        Tensor<T> out = val(a);
        for (auto& x : out.v) x *= c;
        return push(std::move(out), needs(a), [a, c](Graph& g, int self) {
            const Tensor<T>& dy = g.nodes_[self].grad;
            if (Tensor<T>* da = g.accum(a))
                for (int64_t k = 0; k < dy.numel(); ++k) da->v[k] += c * dy.v[k];
        });
    }

    // adds a constant tensor (no gradient to the constant)
    int add_const(int a, const Tensor<T>& c) {
        detail::check(val(a).same_shape(c), "add_const: shape mismatch");
        Tensor<T> out = val(a);
        for (int64_t k = 0; k < out.numel(); ++k) out.v[k] += c.v[k];
        return push(std::move(out), needs(a), [a](Graph& g, int self) {
            const Tensor<T>& dy = g.nodes_[self].grad;
            if (Tensor<T>* da = g.accum(a))
                for (int64_t k = 0; k < dy.numel(); ++k) da->v[k] += dy.v[k];
        });
    }

    int reshape(int a, std::vector<int64_t> shape) {
        detail::check(Tensor<T>::count(shape) == val(a).numel(), "reshape: element count mismatch");
        Tensor<T> out(std::move(shape), val(a).v);
        return push(std::move(out), needs(a), [a](Graph& g, int self) {
            const Tensor<T>& dy = g.nodes_[self].grad;
            if (Tensor<T>* da = g.accum(a))
                for (int64_t k = 0; k < dy.numel(); ++k) da->v[k] += dy.v[k];
        });
    }

    // [B, n, d] -> [B, d, n]
    int transpose_12(int a) {
        detail::check(val(a).ndim() == 3, "transpose_12: need rank 3");
        const int64_t bsz = val(a).dim(0), n = val(a).dim(1), d = val(a).dim(2);
        Tensor<T> out({bsz, d, n});
        const T* px = val(a).data();
        for (int64_t b = 0; b < bsz; ++b)
            for (int64_t t = 0; t < n; ++t)
                for (int64_t j = 0; j < d; ++j) out.v[(b * d + j) * n + t] = px[(b * n + t) * d + j];
        return push(std::move(out), needs(a), [a, bsz, n, d](Graph& g, int self) {
            const Tensor<T>& dy = g.nodes_[self].grad;
            if (Tensor<T>* da = g.accum(a))
                for (int64_t b = 0; b < bsz; ++b)
                    for (int64_t t = 0; t < n; ++t)
                        for (int64_t j = 0; j < d; ++j)
                            da->v[(b * n + t) * d + j] += dy.v[(b * d + j) * n + t];
        });
    }

    int concat_rows(int a, int b) {
        detail::check(val(a).ndim() == val(b).ndim() && val(a).ndim() >= 1, "concat_rows: rank mismatch");
        for (int k = 1; k < val(a).ndim(); ++k)
            detail::check(val(a).dim(k) == val(b).dim(k), "concat_rows: trailing shape mismatch");
        std::vector<int64_t> shape = val(a).shape;
        shape[0] += val(b).dim(0);
        Tensor<T> out(shape);
        std::copy(val(a).v.begin(), val(a).v.end(), out.v.begin());
        std::copy(val(b).v.begin(), val(b).v.end(), out.v.begin() + val(a).numel());
        const int64_t na = val(a).numel();
        return push(std::move(out), needs(a) || needs(b), [a, b, na](Graph& g, int self) {
            const Tensor<T>& dy = g.nodes_[self].grad;
            if (Tensor<T>* da = g.accum(a))
                for (int64_t k = 0; k < na; ++k) da->v[k] += dy.v[k];
            if (Tensor<T>* db = g.accum(b))
                for (int64_t k = na; k < dy.numel(); ++k) db->v[k - na] += dy.v[k];
        });
    }

    // ---- dense / matmul ----

    // y[..., out] = x[..., in] * W[in, out] (+ b[out]); leading axes folded
    int dense(int x, int w, int b = -1) {
        detail::check(val(w).ndim() == 2, "dense: W must be rank 2");
        const int64_t in = val(w).dim(0), out_dim = val(w).dim(1);
        detail::check(val(x).dim(val(x).ndim() - 1) == in, "dense: input width " + val(x).shape_str() +
                                                               " does not match W " + val(w).shape_str());
        if (b >= 0)
            detail::check(val(b).numel() == out_dim, "dense: bias length mismatch");
        const int64_t rows = val(x).numel() / in;
        std::vector<int64_t> oshape = val(x).shape;
        oshape.back() = out_dim;
        Tensor<T> out(oshape);
        CMapM mx(val(x).data(), rows, in), mw(val(w).data(), in, out_dim);
        MapM my(out.data(), rows, out_dim);
        my.noalias() = mx * mw;
        if (b >= 0) my.rowwise() += CMapV(val(b).data(), out_dim).transpose();
        return push(std::move(out), needs(x) || needs(w) || (b >= 0 && needs(b)),
                    [x, w, b, rows, in, out_dim](Graph& g, int self) {
                        CMapM dy(g.nodes_[self].grad.data(), rows, out_dim);
                        if (Tensor<T>* dx = g.accum(x)) {
                            MapM m(dx->data(), rows, in);
                            m.noalias() += dy * CMapM(g.val(w).data(), in, out_dim).transpose();
                        }
                        if (Tensor<T>* dw = g.accum(w)) {
                            MapM m(dw->data(), in, out_dim);
                            m.noalias() += CMapM(g.val(x).data(), rows, in).transpose() * dy;
                        }
                        if (b >= 0)
                            if (Tensor<T>* db = g.accum(b)) {
                                MapV m(db->data(), out_dim);
                                m.noalias() += dy.colwise().sum().transpose();
                            }
                    });
    }

    // y[m, n] = alpha * a[m, k] * b[n, k]^T; a and b may be the same node
    int matmul_nt(int a, int b, T alpha = T{1}) {
        detail::check(val(a).ndim() == 2 && val(b).ndim() == 2 && val(a).dim(1) == val(b).dim(1),
                      "matmul_nt: shape mismatch");
        const int64_t m = val(a).dim(0), n = val(b).dim(0), k = val(a).dim(1);
        Tensor<T> out({m, n});
        CMapM ma(val(a).data(), m, k), mb(val(b).data(), n, k);
        MapM my(out.data(), m, n);
        my.noalias() = alpha * (ma * mb.transpose());
        return push(std::move(out), needs(a) || needs(b), [a, b, alpha, m, n, k](Graph& g, int self) {
            CMapM dy(g.nodes_[self].grad.data(), m, n);
            if (Tensor<T>* da = g.accum(a)) {
                MapM mda(da->data(), m, k);
                mda.noalias() += alpha * (dy * CMapM(g.val(b).data(), n, k));
            }
            if (Tensor<T>* db = g.accum(b)) {
                MapM mdb(db->data(), n, k);
                mdb.noalias() += alpha * (dy.transpose() * CMapM(g.val(a).data(), m, k));
            }
        });
    }

    // batched y[i] = a[i] * b[i] over the leading axis. Slices are tiny
    // per-head attention matrices, so contiguous FMA loops beat a general
    // GEMM call here.
    int bmm(int a, int b) {
        detail::check(val(a).ndim() == 3 && val(b).ndim() == 3 && val(a).dim(0) == val(b).dim(0) &&
                          val(a).dim(2) == val(b).dim(1),
                      "bmm: shape mismatch");
        const int64_t bsz = val(a).dim(0), m = val(a).dim(1), k = val(a).dim(2), n = val(b).dim(2);
        Tensor<T> out({bsz, m, n});
        for (int64_t i = 0; i < bsz; ++i)
            kernel_ab(val(a).data() + i * m * k, val(b).data() + i * k * n, out.data() + i * m * n, m, k, n,
                      T{1});
        return push(std::move(out), needs(a) || needs(b), [a, b, bsz, m, k, n](Graph& g, int self) {
            const T* pdy = g.nodes_[self].grad.data();
            Tensor<T>* da = g.accum(a);
            Tensor<T>* db = g.accum(b);
            for (int64_t i = 0; i < bsz; ++i) {
                const T* dy = pdy + i * m * n;
                // dA += dY * B^T ; dB += A^T * dY
                if (da) kernel_abt(dy, g.val(b).data() + i * k * n, da->data() + i * m * k, m, n, k, T{1});
                if (db) kernel_atb(g.val(a).data() + i * m * k, dy, db->data() + i * k * n, m, k, n, T{1});
            }
        });
    }

    // batched y[i] = alpha * a[i] * b[i]^T (attention scores)
    int bmm_nt(int a, int b, T alpha = T{1}) {
        detail::check(val(a).ndim() == 3 && val(b).ndim() == 3 && val(a).dim(0) == val(b).dim(0) &&
                          val(a).dim(2) == val(b).dim(2),
                      "bmm_nt: shape mismatch");
        const int64_t bsz = val(a).dim(0), m = val(a).dim(1), k = val(a).dim(2), n = val(b).dim(1);
        Tensor<T> out({bsz, m, n});
        for (int64_t i = 0; i < bsz; ++i)
            kernel_abt(val(a).data() + i * m * k, val(b).data() + i * n * k, out.data() + i * m * n, m, k, n,
                       alpha);
        return push(std::move(out), needs(a) || needs(b), [a, b, alpha, bsz, m, k, n](Graph& g, int self) {
            const T* pdy = g.nodes_[self].grad.data();
            Tensor<T>* da = g.accum(a);
            Tensor<T>* db = g.accum(b);
            for (int64_t i = 0; i < bsz; ++i) {
                const T* dy = pdy + i * m * n;
                // dA += alpha * dY * B ; dB += alpha * dY^T * A
                if (da) kernel_ab(dy, g.val(b).data() + i * n * k, da->data() + i * m * k, m, n, k, alpha);
                if (db) kernel_atb(dy, g.val(a).data() + i * m * k, db->data() + i * n * k, m, n, k, alpha);
            }
        });
    }

    // ---- attention head plumbing ----

    // slice one of q/k/v out of a fused qkv tensor [B, n, 3*d] into [B*h, n, d/h]
    int qkv_head_slice(int qkv, int heads, int which) {
        detail::check(val(qkv).ndim() == 3 && val(qkv).dim(2) % 3 == 0, "qkv_head_slice: bad qkv shape");
        const int64_t bsz = val(qkv).dim(0), n = val(qkv).dim(1), d = val(qkv).dim(2) / 3;
        detail::check(d % heads == 0, "qkv_head_slice: embed dim not divisible by heads");
        const int64_t dh = d / heads, w3 = 3 * d;
        Tensor<T> out({bsz * heads, n, dh});
        const T* px = val(qkv).data();
        for (int64_t b = 0; b < bsz; ++b)
            for (int64_t h = 0; h < heads; ++h)
                for (int64_t t = 0; t < n; ++t) {
                    const T* src = px + (b * n + t) * w3 + which * d + h * dh;
                    T* dst = out.data() + ((b * heads + h) * n + t) * dh;
                    std::copy(src, src + dh, dst);
                }
        return push(std::move(out), needs(qkv), [qkv, heads, which, bsz, n, dh, w3](Graph& g, int self) {
            const Tensor<T>& dy = g.nodes_[self].grad;
            Tensor<T>* dq = g.accum(qkv);
            if (!dq) return;
            const int64_t d = dh * heads;
            for (int64_t b = 0; b < bsz; ++b)
                for (int64_t h = 0; h < heads; ++h)
                    for (int64_t t = 0; t < n; ++t) {
                        const T* src = dy.data() + ((b * heads + h) * n + t) * dh;
                        T* dst = dq->data() + (b * n + t) * w3 + which * d + h * dh;
                        for (int64_t j = 0; j < dh; ++j) dst[j] += src[j];
                    }
        });
    }

    // [B*h, n, dh] -> [B, n, h*dh]
    int merge_heads(int x, int heads) {
        detail::check(val(x).ndim() == 3 && val(x).dim(0) % heads == 0, "merge_heads: bad shape");
        const int64_t bsz = val(x).dim(0) / heads, n = val(x).dim(1), dh = val(x).dim(2);
        Tensor<T> out({bsz, n, heads * dh});
        const T* px = val(x).data();
        for (int64_t b = 0; b < bsz; ++b)
            for (int64_t h = 0; h < heads; ++h)
                for (int64_t t = 0; t < n; ++t) {
                    const T* src = px + ((b * heads + h) * n + t) * dh;
                    T* dst = out.data() + (b * n + t) * heads * dh + h * dh;
                    std::copy(src, src + dh, dst);
                }
        return push(std::move(out), needs(x), [x, heads, bsz, n, dh](Graph& g, int self) {
            const Tensor<T>& dy = g.nodes_[self].grad;
            Tensor<T>* dx = g.accum(x);
            if (!dx) return;
            for (int64_t b = 0; b < bsz; ++b)
                for (int64_t h = 0; h < heads; ++h)
                    for (int64_t t = 0; t < n; ++t) {
                        const T* src = dy.data() + (b * n + t) * heads * dh + h * dh;
                        T* dst = dx->data() + ((b * heads + h) * n + t) * dh;
                        for (int64_t j = 0; j < dh; ++j) dst[j] += src[j];
                    }
        });
    }

    // ---- nonlinearities / norms ----

    int relu(int a) {
        Tensor<T> out = val(a);
        for (auto& x : out.v) x = x > T{0} ? x : T{0};
        return push(std::move(out), needs(a), [a](Graph& g, int self) {
            const Tensor<T>& dy = g.nodes_[self].grad;
            if (Tensor<T>* da = g.accum(a)) {
                const Tensor<T>& x = g.val(a);
                for (int64_t k = 0; k < dy.numel(); ++k)
                    if (x.v[k] > T{0}) da->v[k] += dy.v[k];
            }
        });
    }

    int gelu(int a) {
        Tensor<T> out = val(a);
        for (auto& x : out.v) x = gelu_fwd(x);
        return push(std::move(out), needs(a), [a](Graph& g, int self) {
            const Tensor<T>& dy = g.nodes_[self].grad;
            if (Tensor<T>* da = g.accum(a)) {
                const Tensor<T>& x = g.val(a);
                for (int64_t k = 0; k < dy.numel(); ++k) da->v[k] += dy.v[k] * gelu_bwd(x.v[k]);
            }
        });
    }

    // standardize over the last axis, then affine with gamma/beta
    int layer_norm(int x, int gamma, int beta, T eps = static_cast<T>(1e-5)) {
        const int64_t d = val(x).dim(val(x).ndim() - 1);
        detail::check(val(gamma).numel() == d && val(beta).numel() == d, "layer_norm: gamma/beta size mismatch");
        const int64_t rows = val(x).numel() / d;
        Tensor<T> out(val(x).shape);
        auto cache = std::make_shared<Tensor<T>>(std::vector<int64_t>{rows, d + 1});  // xhat rows + inv_std
        for (int64_t r = 0; r < rows; ++r) {
            const T* px = val(x).data() + r * d;
            T mean = 0;
            for (int64_t j = 0; j < d; ++j) mean += px[j];
            mean /= static_cast<T>(d);
            T var = 0;
            for (int64_t j = 0; j < d; ++j) var += (px[j] - mean) * (px[j] - mean);
            var /= static_cast<T>(d);
            const T inv = T{1} / std::sqrt(var + eps);
            T* pc = cache->data() + r * (d + 1);
            for (int64_t j = 0; j < d; ++j) {
                const T xh = (px[j] - mean) * inv;
                pc[j] = xh;
                out.v[r * d + j] = val(gamma).v[j] * xh + val(beta).v[j];
            }
            pc[d] = inv;
        }
        return push(std::move(out), needs(x) || needs(gamma) || needs(beta),
                    [x, gamma, beta, rows, d, cache](Graph& g, int self) {
                        const Tensor<T>& dy = g.nodes_[self].grad;
                        Tensor<T>* dx = g.accum(x);
                        Tensor<T>* dg = g.accum(gamma);
                        Tensor<T>* db = g.accum(beta);
                        const T* pgam = g.val(gamma).data();
                        for (int64_t r = 0; r < rows; ++r) {
                            const T* pc = cache->data() + r * (d + 1);
                            const T inv = pc[d];
                            const T* pdy = dy.data() + r * d;
                            if (dg)
                                for (int64_t j = 0; j < d; ++j) dg->v[j] += pdy[j] * pc[j];
                            if (db)
                                for (int64_t j = 0; j < d; ++j) db->v[j] += pdy[j];
                            if (dx) {
                                T s1 = 0, s2 = 0;
                                for (int64_t j = 0; j < d; ++j) {
                                    const T dxh = pdy[j] * pgam[j];
                                    s1 += dxh;
                                    s2 += dxh * pc[j];
                                }
                                s1 /= static_cast<T>(d);
                                s2 /= static_cast<T>(d);
                                T* pdx = dx->data() + r * d;
                                for (int64_t j = 0; j < d; ++j) {
                                    const T dxh = pdy[j] * pgam[j];
                                    pdx[j] += inv * (dxh - s1 - pc[j] * s2);
                                }
                            }
                        }
                    });
    }

    int softmax_last(int a) {
        const int64_t d = val(a).dim(val(a).ndim() - 1);
        const int64_t rows = val(a).numel() / d;
        Tensor<T> out(val(a).shape);
        for (int64_t r = 0; r < rows; ++r) {
            const T* px = val(a).data() + r * d;
            T* py = out.data() + r * d;
            T mx = px[0];
            for (int64_t j = 1; j < d; ++j) mx = std::max(mx, px[j]);
            T sum = 0;
            for (int64_t j = 0; j < d; ++j) {
                py[j] = std::exp(px[j] - mx);
                sum += py[j];
            }
            const T inv = T{1} / sum;
            for (int64_t j = 0; j < d; ++j) py[j] *= inv;
        }
        return push(std::move(out), needs(a), [a, rows, d](Graph& g, int self) {
            const Tensor<T>& dy = g.nodes_[self].grad;
            const Tensor<T>& y = g.nodes_[self].val;
            if (Tensor<T>* da = g.accum(a))
                for (int64_t r = 0; r < rows; ++r) {
                    const T* py = y.data() + r * d;
                    const T* pdy = dy.data() + r * d;
                    T dot = 0;
                    for (int64_t j = 0; j < d; ++j) dot += py[j] * pdy[j];
                    T* pda = da->data() + r * d;
                    for (int64_t j = 0; j < d; ++j) pda[j] += py[j] * (pdy[j] - dot);
                }
        });
    }

    // training-mode inverted dropout; call sites skip the op entirely in
    // inference mode so the tape stays identity-free
    int dropout(int a, double p, Rng& rng) {
        detail::check(p >= 0.0 && p < 1.0, "dropout: p must be in [0, 1)");
        if (p == 0.0) return a;
        const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
        // drop when the raw draw falls below p * 2^64 (one integer compare per element)
        const uint64_t threshold = static_cast<uint64_t>(p * 0x1.0p64);
        auto mask = std::make_shared<std::vector<uint8_t>>(val(a).v.size());
        Tensor<T> out = val(a);
        for (size_t k = 0; k < out.v.size(); ++k) {
            const bool keep = rng.next_u64() >= threshold;
            (*mask)[k] = keep;
            out.v[k] = keep ? out.v[k] * keep_scale : T{0};
        }
        return push(std::move(out), needs(a), [a, mask, keep_scale](Graph& g, int self) {
            const Tensor<T>& dy = g.nodes_[self].grad;
            if (Tensor<T>* da = g.accum(a))
                for (int64_t k = 0; k < dy.numel(); ++k)
                    if ((*mask)[k]) da->v[k] += dy.v[k] * keep_scale;
        });
    }

    // ---- pooling / reductions ----

    // mean over axis 1 of [B, n, d] -> [B, d]
    int mean_tokens(int a) {
        detail::check(val(a).ndim() == 3, "mean_tokens: need rank 3");
        const int64_t bsz = val(a).dim(0), n = val(a).dim(1), d = val(a).dim(2);
        Tensor<T> out({bsz, d});
        const T inv = T{1} / static_cast<T>(n);
        for (int64_t b = 0; b < bsz; ++b)
            for (int64_t t = 0; t < n; ++t)
                for (int64_t j = 0; j < d; ++j) out.v[b * d + j] += val(a).v[(b * n + t) * d + j] * inv;
        return push(std::move(out), needs(a), [a, bsz, n, d, inv](Graph& g, int self) {
            const Tensor<T>& dy = g.nodes_[self].grad;
            if (Tensor<T>* da = g.accum(a))
                for (int64_t b = 0; b < bsz; ++b)
                    for (int64_t t = 0; t < n; ++t)
                        for (int64_t j = 0; j < d; ++j)
                            da->v[(b * n + t) * d + j] += dy.v[b * d + j] * inv;
        });
    }

    // row-wise unit normalization with an epsilon floor on the norm
    int l2norm_rows(int a, T eps = static_cast<T>(1e-12)) {
        detail::check(val(a).ndim() == 2, "l2norm_rows: need rank 2");
        const int64_t rows = val(a).dim(0), d = val(a).dim(1);
        Tensor<T> out(val(a).shape);
        auto norms = std::make_shared<std::vector<T>>(rows);
        for (int64_t r = 0; r < rows; ++r) {
            const T* px = val(a).data() + r * d;
            T s = 0;
            for (int64_t j = 0; j < d; ++j) s += px[j] * px[j];
            const T nr = std::max(std::sqrt(s), eps);
            (*norms)[r] = nr;
            for (int64_t j = 0; j < d; ++j) out.v[r * d + j] = px[j] / nr;
        }
        return push(std::move(out), needs(a), [a, rows, d, norms](Graph& g, int self) {
            const Tensor<T>& dy = g.nodes_[self].grad;
            const Tensor<T>& y = g.nodes_[self].val;
            if (Tensor<T>* da = g.accum(a))
                for (int64_t r = 0; r < rows; ++r) {
                    const T* py = y.data() + r * d;
                    const T* pdy = dy.data() + r * d;
                    T dot = 0;
                    for (int64_t j = 0; j < d; ++j) dot += py[j] * pdy[j];
                    const T inv = T{1} / (*norms)[r];
                    T* pda = da->data() + r * d;
                    for (int64_t j = 0; j < d; ++j) pda[j] += (pdy[j] - py[j] * dot) * inv;
                }
        });
    }

    // ---- convolution / pooling ----

    // cross-correlation, NCHW, kernel [F, C, kh, kw]
    int conv2d(int x, int kernel, int bias, int sh, int sw, int ph, int pw) {
        detail::check(val(x).ndim() == 4 && val(kernel).ndim() == 4, "conv2d: need rank-4 input and kernel");
        const int64_t bsz = val(x).dim(0), c = val(x).dim(1), h = val(x).dim(2), w = val(x).dim(3);
        const int64_t f = val(kernel).dim(0), kc = val(kernel).dim(1), kh = val(kernel).dim(2), kw = val(kernel).dim(3);
        detail::check(c == kc, "conv2d: channel mismatch");
        const int64_t oh = (h + 2 * ph - kh) / sh + 1;
        const int64_t ow = (w + 2 * pw - kw) / sw + 1;
        detail::check(oh > 0 && ow > 0, "conv2d: non-positive output size for input " + val(x).shape_str());
        if (bias >= 0) detail::check(val(bias).numel() == f, "conv2d: bias size mismatch");

        const int64_t patch = c * kh * kw, npos = oh * ow;
        auto col = std::make_shared<Tensor<T>>(std::vector<int64_t>{bsz * npos, patch});
        im2col(val(x), *col, bsz, c, h, w, kh, kw, sh, sw, ph, pw, oh, ow);

        Tensor<T> out({bsz, f, oh, ow});
        Mat prod(bsz * npos, f);
        prod.noalias() = CMapM(col->data(), bsz * npos, patch) * CMapM(val(kernel).data(), f, patch).transpose();
        for (int64_t b = 0; b < bsz; ++b)
            for (int64_t ff = 0; ff < f; ++ff)
                for (int64_t p = 0; p < npos; ++p) {
                    T v = prod(b * npos + p, ff);
                    if (bias >= 0) v += val(bias).v[ff];
                    out.v[(b * f + ff) * npos + p] = v;
                }
        return push(std::move(out), needs(x) || needs(kernel) || (bias >= 0 && needs(bias)),
                    [x, kernel, bias, bsz, c, h, w, f, kh, kw, sh, sw, ph, pw, oh, ow, patch, npos,
                     col](Graph& g, int self) {
                        const Tensor<T>& dy = g.nodes_[self].grad;
                        Mat dout(bsz * npos, f);
                        for (int64_t b = 0; b < bsz; ++b)
                            for (int64_t ff = 0; ff < f; ++ff)
                                for (int64_t p = 0; p < npos; ++p)
                                    dout(b * npos + p, ff) = dy.v[(b * f + ff) * npos + p];
                        if (Tensor<T>* dk = g.accum(kernel)) {
                            MapM m(dk->data(), f, patch);
                            m.noalias() += dout.transpose() * CMapM(col->data(), bsz * npos, patch);
                        }
                        if (bias >= 0)
                            if (Tensor<T>* db = g.accum(bias)) {
                                MapV m(db->data(), f);
                                m.noalias() += dout.colwise().sum().transpose();
                            }
                        if (Tensor<T>* dx = g.accum(x)) {
                            Mat dcol(bsz * npos, patch);
                            dcol.noalias() = dout * CMapM(g.val(kernel).data(), f, patch);
                            col2im(dcol, *dx, bsz, c, h, w, kh, kw, sh, sw, ph, pw, oh, ow);
                        }
                    });
    }

    // transposed convolution, kernel [C, F, kh, kw], no padding
    int conv_transpose2d(int x, int kernel, int bias, int sh, int sw) {
        detail::check(val(x).ndim() == 4 && val(kernel).ndim() == 4, "conv_transpose2d: need rank 4");
        const int64_t bsz = val(x).dim(0), c = val(x).dim(1), h = val(x).dim(2), w = val(x).dim(3);
        detail::check(val(kernel).dim(0) == c, "conv_transpose2d: channel mismatch");
        const int64_t f = val(kernel).dim(1), kh = val(kernel).dim(2), kw = val(kernel).dim(3);
        if (sh == kh && sw == kw) return conv_transpose2d_block(x, kernel, bias, bsz, c, h, w, f, kh, kw);
        const int64_t oh = (h - 1) * sh + kh, ow = (w - 1) * sw + kw;
        if (bias >= 0) detail::check(val(bias).numel() == f, "conv_transpose2d: bias size mismatch");
        Tensor<T> out({bsz, f, oh, ow});
        if (bias >= 0)
            for (int64_t b = 0; b < bsz; ++b)
                for (int64_t ff = 0; ff < f; ++ff)
                    std::fill_n(out.data() + (b * f + ff) * oh * ow, oh * ow, val(bias).v[ff]);
        const T* pk = val(kernel).data();
        for (int64_t b = 0; b < bsz; ++b)
            for (int64_t cc = 0; cc < c; ++cc)
                for (int64_t i = 0; i < h; ++i)
                    for (int64_t j = 0; j < w; ++j) {
                        const T xv = val(x).v[((b * c + cc) * h + i) * w + j];
                        for (int64_t ff = 0; ff < f; ++ff) {
                            const T* pkk = pk + ((cc * f + ff) * kh) * kw;
                            T* po = out.data() + ((b * f + ff) * oh + i * sh) * ow + j * sw;
                            for (int64_t ki = 0; ki < kh; ++ki)
                                for (int64_t kj = 0; kj < kw; ++kj) po[ki * ow + kj] += xv * pkk[ki * kw + kj];
                        }
                    }
        return push(std::move(out), needs(x) || needs(kernel) || (bias >= 0 && needs(bias)),
                    [x, kernel, bias, bsz, c, h, w, f, kh, kw, sh, sw, oh, ow](Graph& g, int self) {
                        const Tensor<T>& dy = g.nodes_[self].grad;
                        Tensor<T>* dx = g.accum(x);
                        Tensor<T>* dk = g.accum(kernel);
                        const T* pk = g.val(kernel).data();
                        const T* px = g.val(x).data();
                        for (int64_t b = 0; b < bsz; ++b)
                            for (int64_t cc = 0; cc < c; ++cc)
                                for (int64_t i = 0; i < h; ++i)
                                    for (int64_t j = 0; j < w; ++j) {
                                        const int64_t xi = ((b * c + cc) * h + i) * w + j;
                                        for (int64_t ff = 0; ff < f; ++ff) {
                                            const T* pdy = dy.data() + ((b * f + ff) * oh + i * sh) * ow + j * sw;
                                            const T* pkk = pk + ((cc * f + ff) * kh) * kw;
                                            if (dx) {
                                                T acc = 0;
                                                for (int64_t ki = 0; ki < kh; ++ki)
                                                    for (int64_t kj = 0; kj < kw; ++kj)
                                                        acc += pdy[ki * ow + kj] * pkk[ki * kw + kj];
                                                dx->v[xi] += acc;
                                            }
                                            if (dk) {
                                                T* pdk = dk->data() + ((cc * f + ff) * kh) * kw;
                                                for (int64_t ki = 0; ki < kh; ++ki)
                                                    for (int64_t kj = 0; kj < kw; ++kj)
                                                        pdk[ki * kw + kj] += pdy[ki * ow + kj] * px[xi];
                                            }
                                        }
                                    }
                        if (bias >= 0)
                            if (Tensor<T>* db = g.accum(bias))
                                for (int64_t b = 0; b < bsz; ++b)
                                    for (int64_t ff = 0; ff < f; ++ff) {
                                        const T* pdy = dy.data() + (b * f + ff) * oh * ow;
                                        T acc = 0;
                                        for (int64_t p = 0; p < oh * ow; ++p) acc += pdy[p];
                                        db->v[ff] += acc;
                                    }
                    });
    }

    int maxpool2d(int x, int kh, int kw, int sh, int sw) {
        detail::check(val(x).ndim() == 4, "maxpool2d: need rank 4");
        const int64_t bsz = val(x).dim(0), c = val(x).dim(1), h = val(x).dim(2), w = val(x).dim(3);
        detail::check(kh <= h && kw <= w, "maxpool2d: kernel larger than input " + val(x).shape_str());
        const int64_t oh = (h - kh) / sh + 1, ow = (w - kw) / sw + 1;
        Tensor<T> out({bsz, c, oh, ow});
        auto argmax = std::make_shared<std::vector<int64_t>>(out.v.size());
        for (int64_t b = 0; b < bsz; ++b)
            for (int64_t cc = 0; cc < c; ++cc)
                for (int64_t oi = 0; oi < oh; ++oi)
                    for (int64_t oj = 0; oj < ow; ++oj) {
                        int64_t best = ((b * c + cc) * h + oi * sh) * w + oj * sw;
                        T bv = val(x).v[best];
                        for (int64_t ki = 0; ki < kh; ++ki)
                            for (int64_t kj = 0; kj < kw; ++kj) {
                                const int64_t idx = ((b * c + cc) * h + oi * sh + ki) * w + oj * sw + kj;
                                if (val(x).v[idx] > bv) {
                                    bv = val(x).v[idx];
                                    best = idx;
                                }
                            }
                        const int64_t o = ((b * c + cc) * oh + oi) * ow + oj;
                        out.v[o] = bv;
                        (*argmax)[o] = best;
                    }
        return push(std::move(out), needs(x), [x, argmax](Graph& g, int self) {
            const Tensor<T>& dy = g.nodes_[self].grad;
            if (Tensor<T>* dx = g.accum(x))
                for (int64_t k = 0; k < dy.numel(); ++k) dx->v[(*argmax)[k]] += dy.v[k];
        });
    }

    // ---- losses ----

    // mean squared error against a constant target
    int mse(int pred, const Tensor<T>& target) {
        detail::check(val(pred).same_shape(target), "mse: shape mismatch " + val(pred).shape_str());
        const int64_t n = target.numel();
        T acc = 0;
        for (int64_t k = 0; k < n; ++k) {
            const T d = val(pred).v[k] - target.v[k];
            acc += d * d;
        }
        Tensor<T> out = Tensor<T>::scalar(acc / static_cast<T>(n));
        auto tgt = std::make_shared<Tensor<T>>(target);
        return push(std::move(out), needs(pred), [pred, tgt, n](Graph& g, int self) {
            const T gy = g.nodes_[self].grad.v[0];
            if (Tensor<T>* dp = g.accum(pred)) {
                const T c = T{2} * gy / static_cast<T>(n);
                for (int64_t k = 0; k < n; ++k) dp->v[k] += c * (g.val(pred).v[k] - tgt->v[k]);
            }
        });
    }

    // weighted cross-entropy with stable log-softmax:
    //   loss = sum_i w_i * ce_i / divisor
    // empty weights = all ones with divisor B (plain mean).
    int cross_entropy(int logits, std::vector<int> labels, std::vector<T> weights = {}, T divisor = T{0}) {
        detail::check(val(logits).ndim() == 2, "cross_entropy: logits must be rank 2");
        const int64_t bsz = val(logits).dim(0), k = val(logits).dim(1);
        detail::check(static_cast<int64_t>(labels.size()) == bsz, "cross_entropy: label count mismatch");
        for (int lb : labels)
            detail::check(lb >= 0 && lb < k, "cross_entropy: label out of range: " + std::to_string(lb));
        if (weights.empty()) {
            weights.assign(bsz, T{1});
            if (divisor == T{0}) divisor = static_cast<T>(bsz);
        }
        detail::check(divisor > T{0}, "cross_entropy: divisor must be positive");

        auto probs = std::make_shared<Tensor<T>>(val(logits).shape);
        T loss = 0;
        for (int64_t r = 0; r < bsz; ++r) {
            const T* px = val(logits).data() + r * k;
            T mx = px[0];
            for (int64_t j = 1; j < k; ++j) mx = std::max(mx, px[j]);
            T sum = 0;
            for (int64_t j = 0; j < k; ++j) sum += std::exp(px[j] - mx);
            const T lse = mx + std::log(sum);
            for (int64_t j = 0; j < k; ++j) probs->v[r * k + j] = std::exp(px[j] - lse);
            loss += weights[r] * (lse - px[labels[r]]);
        }
        Tensor<T> out = Tensor<T>::scalar(loss / divisor);
        auto lbl = std::make_shared<std::vector<int>>(std::move(labels));
        auto wts = std::make_shared<std::vector<T>>(std::move(weights));
        return push(std::move(out), needs(logits), [logits, probs, lbl, wts, divisor, bsz, k](Graph& g, int self) {
            const T gy = g.nodes_[self].grad.v[0];
            if (Tensor<T>* dl = g.accum(logits))
                for (int64_t r = 0; r < bsz; ++r) {
                    const T c = gy * (*wts)[r] / divisor;
                    if (c == T{0}) continue;
                    for (int64_t j = 0; j < k; ++j)
                        dl->v[r * k + j] += c * (probs->v[r * k + j] - (j == (*lbl)[r] ? T{1} : T{0}));
                }
        });
    }

    // weighted sum of scalar nodes
    int wsum(const std::vector<std::pair<int, T>>& terms) {
        detail::check(!terms.empty(), "wsum: empty term list");
        T acc = 0;
        bool any = false;
        for (const auto& [id, c] : terms) {
            detail::check(val(id).numel() == 1, "wsum: non-scalar term");
            acc += c * val(id).v[0];
            any = any || needs(id);
        }
        auto t = terms;
        return push(Tensor<T>::scalar(acc), any, [t](Graph& g, int self) {
            const T gy = g.nodes_[self].grad.v[0];
            for (const auto& [id, c] : t)
                if (Tensor<T>* d = g.accum(id)) d->v[0] += c * gy;
        });
    }

    // ---- backward ----

    void backward(int loss) {
        detail::check(loss >= 0 && loss < static_cast<int>(nodes_.size()), "backward: bad node id");
        detail::check(nodes_[loss].val.numel() == 1, "backward: loss must be scalar");
        for (int id = 0; id <= loss; ++id)
            if (nodes_[id].needs_grad) {
                nodes_[id].grad = Tensor<T>(nodes_[id].val.shape);
            }
        if (!nodes_[loss].needs_grad) return;  // constant loss; nothing to do
        nodes_[loss].grad.v[0] = T{1};
        for (int id = loss; id >= 0; --id) {
            auto& n = nodes_[id];
            if (n.needs_grad && n.back) n.back(*this, id);
        }
    }

private:
    struct Node {
        Tensor<T> val;
        Tensor<T> grad;
        std::function<void(Graph&, int)> back;
        bool needs_grad = false;
    };

    std::vector<Node> nodes_;

    const Tensor<T>& val(int id) const { return nodes_[id].val; }
    bool needs(int id) const { return nodes_[id].needs_grad; }

    Tensor<T>* accum(int id) { return nodes_[id].needs_grad ? &nodes_[id].grad : nullptr; }

    int push(Tensor<T> val, bool needs_grad, std::function<void(Graph&, int)> back) {
        nodes_.push_back(Node{std::move(val), Tensor<T>{}, std::move(back), needs_grad});
        return static_cast<int>(nodes_.size()) - 1;
    }

    // stride == kernel case: blocks never overlap, so both passes collapse to
    // one GEMM plus a gather/scatter relayout
    int conv_transpose2d_block(int x, int kernel, int bias, int64_t bsz, int64_t c, int64_t h, int64_t w,
                               int64_t f, int64_t kh, int64_t kw) {
        const int64_t oh = h * kh, ow = w * kw;
        if (bias >= 0) detail::check(val(bias).numel() == f, "conv_transpose2d: bias size mismatch");
        const int64_t p = h * w, fk = f * kh * kw, kk2 = kh * kw;

        auto x2 = std::make_shared<Tensor<T>>(std::vector<int64_t>{bsz * p, c});
        for (int64_t b = 0; b < bsz; ++b)
            for (int64_t cc = 0; cc < c; ++cc) {
                const T* src = val(x).data() + (b * c + cc) * p;
                T* dst = x2->data() + b * p * c + cc;
                for (int64_t pos = 0; pos < p; ++pos) dst[pos * c] = src[pos];
            }
        Mat blocks(bsz * p, fk);
        blocks.noalias() = CMapM(x2->data(), bsz * p, c) * CMapM(val(kernel).data(), c, fk);

        Tensor<T> out({bsz, f, oh, ow});
        for (int64_t b = 0; b < bsz; ++b)
            for (int64_t i = 0; i < h; ++i)
                for (int64_t j = 0; j < w; ++j) {
                    const int64_t row = b * p + i * w + j;
                    for (int64_t ff = 0; ff < f; ++ff) {
                        const T bv = bias >= 0 ? val(bias).v[ff] : T{0};
                        for (int64_t di = 0; di < kh; ++di) {
                            T* po = out.data() + ((b * f + ff) * oh + i * kh + di) * ow + j * kw;
                            const T* pb = blocks.data() + row * fk + ff * kk2 + di * kw;
                            for (int64_t dj = 0; dj < kw; ++dj) po[dj] = pb[dj] + bv;
                        }
                    }
                }
        return push(std::move(out), needs(x) || needs(kernel) || (bias >= 0 && needs(bias)),
                    [x, kernel, bias, bsz, c, h, w, f, kh, kw, oh, ow, p, fk, kk2, x2](Graph& g, int self) {
                        const Tensor<T>& dy = g.nodes_[self].grad;
                        Mat dblocks(bsz * p, fk);
                        for (int64_t b = 0; b < bsz; ++b)
                            for (int64_t i = 0; i < h; ++i)
                                for (int64_t j = 0; j < w; ++j) {
                                    const int64_t row = b * p + i * w + j;
                                    for (int64_t ff = 0; ff < f; ++ff)
                                        for (int64_t di = 0; di < kh; ++di) {
                                            const T* pdy =
                                                dy.data() + ((b * f + ff) * oh + i * kh + di) * ow + j * kw;
                                            T* pb = dblocks.data() + row * fk + ff * kk2 + di * kw;
                                            for (int64_t dj = 0; dj < kw; ++dj) pb[dj] = pdy[dj];
                                        }
                                }
                        if (Tensor<T>* dk = g.accum(kernel)) {
                            MapM m(dk->data(), c, fk);
                            m.noalias() += CMapM(x2->data(), bsz * p, c).transpose() * dblocks;
                        }
                        if (Tensor<T>* dx = g.accum(x)) {
                            Mat dx2(bsz * p, c);
                            dx2.noalias() = dblocks * CMapM(g.val(kernel).data(), c, fk).transpose();
                            for (int64_t b = 0; b < bsz; ++b)
                                for (int64_t cc = 0; cc < c; ++cc) {
                                    T* dst = dx->data() + (b * c + cc) * p;
                                    const T* src = dx2.data() + b * p * c + cc;
                                    for (int64_t pos = 0; pos < p; ++pos) dst[pos] += src[pos * c];
                                }
                        }
                        if (bias >= 0)
                            if (Tensor<T>* db = g.accum(bias))
                                for (int64_t b = 0; b < bsz; ++b)
                                    for (int64_t ff = 0; ff < f; ++ff) {
                                        const T* pdy = dy.data() + (b * f + ff) * oh * ow;
                                        T acc = 0;
                                        for (int64_t q = 0; q < oh * ow; ++q) acc += pdy[q];
                                        db->v[ff] += acc;
                                    }
                    });
    }

    // Small-matrix accumulate kernels for the per-head attention slices.
    // Row accumulators live on the stack and every inner loop runs over the
    // contiguous axis, so the compiler vectorizes them; a plain fallback
    // covers dimensions beyond the tile size.
    static constexpr int64_t kTile = 64;

    // C[m,n] += alpha * A[m,k] * B[k,n]
    static void kernel_ab(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, T alpha) {
        if (n <= kTile) {
            for (int64_t i = 0; i < m; ++i) {
                T acc[kTile] = {};
                const T* ai = a + i * k;
                for (int64_t kk = 0; kk < k; ++kk) {
                    const T av = ai[kk];
                    const T* bk = b + kk * n;
                    for (int64_t j = 0; j < n; ++j) acc[j] += av * bk[j];
                }
                T* ci = c + i * n;
                for (int64_t j = 0; j < n; ++j) ci[j] += alpha * acc[j];
            }
            return;
        }
        for (int64_t i = 0; i < m; ++i)
            for (int64_t kk = 0; kk < k; ++kk) {
                const T av = alpha * a[i * k + kk];
                const T* bk = b + kk * n;
                T* ci = c + i * n;
                for (int64_t j = 0; j < n; ++j) ci[j] += av * bk[j];
            }
    }

    // C[m,n] += alpha * A[m,k] * B[n,k]^T
    static void kernel_abt(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, T alpha) {
        if (k <= kTile && n <= kTile) {
            T bt[kTile * kTile];  // B transposed to [k][n]
            for (int64_t j = 0; j < n; ++j)
                for (int64_t kk = 0; kk < k; ++kk) bt[kk * n + j] = b[j * k + kk];
            for (int64_t i = 0; i < m; ++i) {
                T acc[kTile] = {};
                const T* ai = a + i * k;
                for (int64_t kk = 0; kk < k; ++kk) {
                    const T av = ai[kk];
                    const T* btk = bt + kk * n;
                    for (int64_t j = 0; j < n; ++j) acc[j] += av * btk[j];
                }
                T* ci = c + i * n;
                for (int64_t j = 0; j < n; ++j) ci[j] += alpha * acc[j];
            }
            return;
        }
        for (int64_t i = 0; i < m; ++i) {
            const T* ai = a + i * k;
            T* ci = c + i * n;
            for (int64_t j = 0; j < n; ++j) {
                const T* bj = b + j * k;
                T acc = 0;
                for (int64_t kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
                ci[j] += alpha * acc;
            }
        }
    }

    // C[k,n] += alpha * A[m,k]^T * B[m,n]
    static void kernel_atb(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, T alpha) {
        if (k <= kTile && n <= kTile) {
            T acc[kTile * kTile];
            std::fill_n(acc, k * n, T{0});
            for (int64_t i = 0; i < m; ++i) {
                const T* ai = a + i * k;
                const T* bi = b + i * n;
                for (int64_t kk = 0; kk < k; ++kk) {
                    const T av = ai[kk];
                    T* ak = acc + kk * n;
                    for (int64_t j = 0; j < n; ++j) ak[j] += av * bi[j];
                }
            }
            for (int64_t kk = 0; kk < k; ++kk)
                for (int64_t j = 0; j < n; ++j) c[kk * n + j] += alpha * acc[kk * n + j];
            return;
        }
        for (int64_t i = 0; i < m; ++i) {
            const T* bi = b + i * n;
            for (int64_t kk = 0; kk < k; ++kk) {
                const T av = alpha * a[i * k + kk];
                T* ck = c + kk * n;
                for (int64_t j = 0; j < n; ++j) ck[j] += av * bi[j];
            }
        }
    }

    static T gelu_fwd(T x) {
        return static_cast<T>(0.5) * x * (T{1} + std::erf(x * static_cast<T>(M_SQRT1_2)));
    }
    static T gelu_bwd(T x) {
        const T cdf = static_cast<T>(0.5) * (T{1} + std::erf(x * static_cast<T>(M_SQRT1_2)));
        const T pdf = std::exp(static_cast<T>(-0.5) * x * x) * static_cast<T>(0.3989422804014327);
        return cdf + x * pdf;
    }

    static void im2col(const Tensor<T>& x, Tensor<T>& col, int64_t bsz, int64_t c, int64_t h, int64_t w,
                       int64_t kh, int64_t kw, int64_t sh, int64_t sw, int64_t ph, int64_t pw, int64_t oh,
                       int64_t ow) {
        const int64_t patch = c * kh * kw;
        std::fill(col.v.begin(), col.v.end(), T{0});
        for (int64_t b = 0; b < bsz; ++b)
            for (int64_t oi = 0; oi < oh; ++oi)
                for (int64_t oj = 0; oj < ow; ++oj) {
                    T* dst = col.data() + ((b * oh + oi) * ow + oj) * patch;
                    for (int64_t cc = 0; cc < c; ++cc)
                        for (int64_t ki = 0; ki < kh; ++ki) {
                            const int64_t ii = oi * sh - ph + ki;
                            if (ii < 0 || ii >= h) continue;
                            for (int64_t kj = 0; kj < kw; ++kj) {
                                const int64_t jj = oj * sw - pw + kj;
                                if (jj < 0 || jj >= w) continue;
                                dst[(cc * kh + ki) * kw + kj] = x.v[((b * c + cc) * h + ii) * w + jj];
                            }
                        }
                }
    }

    static void col2im(const Mat& dcol, Tensor<T>& dx, int64_t bsz, int64_t c, int64_t h, int64_t w,
                       int64_t kh, int64_t kw, int64_t sh, int64_t sw, int64_t ph, int64_t pw, int64_t oh,
                       int64_t ow) {
        const int64_t patch = c * kh * kw;
        for (int64_t b = 0; b < bsz; ++b)
            for (int64_t oi = 0; oi < oh; ++oi)
                for (int64_t oj = 0; oj < ow; ++oj) {
                    const int64_t row = (b * oh + oi) * ow + oj;
                    for (int64_t cc = 0; cc < c; ++cc)
                        for (int64_t ki = 0; ki < kh; ++ki) {
                            const int64_t ii = oi * sh - ph + ki;
                            if (ii < 0 || ii >= h) continue;
                            for (int64_t kj = 0; kj < kw; ++kj) {
                                const int64_t jj = oj * sw - pw + kj;
                                if (jj < 0 || jj >= w) continue;
                                dx.v[((b * c + cc) * h + ii) * w + jj] += dcol(row, (cc * kh + ki) * kw + kj);
                            }
                        }
                }
    }
};

using GraphF = Graph<float>;
using GraphD = Graph<double>;

}  // namespace amrvit
