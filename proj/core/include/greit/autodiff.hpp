#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "greit/ops.hpp"
#include "greit/tensor.hpp"

namespace greit {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid as long as the tape lives.
struct Var {
    Tape* tape = nullptr;
    int id = -1;
    const Tensor<double>& value() const;
};

// Append-only reverse-mode tape, 64-bit, used only for gradient verification.
// Node ids are topologically ordered by construction: every input id precedes
// its consumer. One builder, one backward pass; not thread-safe.
class Tape {
public:
    Var leaf(Tensor<double> v) { return push(std::move(v)); }

    Var push(Tensor<double> v) {
        nodes_.push_back(Node{std::move(v), Tensor<double>(), nullptr});
        return Var{this, static_cast<int>(nodes_.size()) - 1};
    }

    void set_backprop(int id, std::function<void(Tape&)> fn) { node(id).backprop = std::move(fn); }

    const Tensor<double>& value(int id) const { return node(id).value; }

    // Gradient buffer of a node, allocated (zero) on first access.
    Tensor<double>& grad_ref(int id) {
        Node& n = node(id);
        if (n.grad.size() == 0) n.grad = Tensor<double>(n.value.shape());
        return n.grad;
    }

    const Tensor<double>& grad(int id) const {
        const Node& n = node(id);
        if (n.grad.size() == 0) throw ValueError("gradient not populated; run backward first");
        return n.grad;
    }

    void backward(int output_id) {
        const auto& v = value(output_id);
        if (v.size() != 1) throw ValueError("backward without seed requires a scalar output");
        backward(output_id, Tensor<double>(v.shape(), 1.0));
    }

    void backward(int output_id, const Tensor<double>& seed) {
        if (output_id < 0 || output_id >= static_cast<int>(nodes_.size())) {
            throw ValueError("backward: unknown node id");
        }
        if (seed.shape() != value(output_id).shape()) throw ShapeError("backward: seed shape mismatch");
        for (auto& n : nodes_) n.grad = Tensor<double>();
        grad_ref(output_id);
        for (std::int64_t i = 0; i < seed.size(); ++i) node(output_id).grad[i] = seed[i];
        for (int id = output_id; id >= 0; --id) {
            Node& n = node(id);
            if (n.backprop && n.grad.size() != 0) n.backprop(*this);
        }
        // Nodes the sweep never reached still report zero gradients of their shape.
        for (std::size_t id = 0; id < nodes_.size(); ++id) (void)grad_ref(static_cast<int>(id));
    }

    int size() const { return static_cast<int>(nodes_.size()); }

private:
    struct Node {
        Tensor<double> value;
        Tensor<double> grad;
        std::function<void(Tape&)> backprop;
    };

    Node& node(int id) {
        if (id < 0 || id >= static_cast<int>(nodes_.size())) throw ValueError("unknown tape node id");
        return nodes_[static_cast<std::size_t>(id)];
    }
    const Node& node(int id) const {
        if (id < 0 || id >= static_cast<int>(nodes_.size())) throw ValueError("unknown tape node id");
        return nodes_[static_cast<std::size_t>(id)];
    }

    std::vector<Node> nodes_;
};

inline const Tensor<double>& Var::value() const { return tape->value(id); }

inline int batch(const Var& v) { return v.value().dim(0); }
inline int channels(const Var& v) { return v.value().dim(1); }
inline int height(const Var& v) { return v.value().dim(2); }
inline int width(const Var& v) { return v.value().dim(3); }

namespace detail {

// Sum `g` down to `target` over dims where target has size 1.
inline Tensor<double> reduce_to_shape(const Tensor<double>& g, const Shape& target) {
    if (g.shape() == target) return g;
    Tensor<double> out(target);
    const auto gst = strides_of(g.shape());
    const auto ost = broadcast_strides(g.shape(), target);
    for (std::int64_t i = 0; i < g.size(); ++i) {
        std::int64_t oi = 0, rem = i;
        for (std::size_t d = 0; d < gst.size(); ++d) {
            const std::int64_t c = rem / gst[d];
            rem -= c * gst[d];
            oi += c * ost[d];
        }
        out[oi] += g[i];
    }
    return out;
}

inline void accumulate(Tensor<double>& dst, const Tensor<double>& src) {
    if (dst.shape() != src.shape()) throw ShapeError("gradient accumulate shape mismatch");
    for (std::int64_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace detail

inline Var reshape(const Var& x, Shape new_shape) {
    Tape& t = *x.tape;
    Var out = t.push(reshape(x.value(), std::move(new_shape)));
    t.set_backprop(out.id, [xid = x.id, oid = out.id, old = x.value().shape()](Tape& tp) {
        detail::accumulate(tp.grad_ref(xid), reshape(tp.grad(oid), old));
    });
    return out;
}

inline Var elem_mul(const Var& a, const Var& b) {
    Tape& t = *a.tape;
    Var out = t.push(elem_mul(a.value(), b.value()));
    t.set_backprop(out.id, [aid = a.id, bid = b.id, oid = out.id](Tape& tp) {
        const auto& g = tp.grad(oid);
        detail::accumulate(tp.grad_ref(aid),
                           detail::broadcast_binary(g, tp.value(bid), [](double x, double y) { return x * y; }));
        auto ga = elem_mul(g, tp.value(aid));
        detail::accumulate(tp.grad_ref(bid), detail::reduce_to_shape(ga, tp.value(bid).shape()));
    });
    return out;
}

inline Var add(const Var& a, const Var& b) {
    Tape& t = *a.tape;
    Var out = t.push(add(a.value(), b.value()));
    t.set_backprop(out.id, [aid = a.id, bid = b.id, oid = out.id](Tape& tp) {
        const auto& g = tp.grad(oid);
        detail::accumulate(tp.grad_ref(aid), g);
        detail::accumulate(tp.grad_ref(bid), detail::reduce_to_shape(g, tp.value(bid).shape()));
    });
    return out;
}

inline Var matmul(const Var& a, const Var& b) {
    Tape& t = *a.tape;
    Var out = t.push(matmul(a.value(), b.value()));
    t.set_backprop(out.id, [aid = a.id, bid = b.id, oid = out.id](Tape& tp) {
        const auto& g = tp.grad(oid);
        const auto& av = tp.value(aid);
        const auto& bv = tp.value(bid);
        const int nb = g.dim(0), m = av.dim(1), k = av.dim(2), n = bv.dim(2);
        auto& da = tp.grad_ref(aid);
        auto& db = tp.grad_ref(bid);
        for (int bi = 0; bi < nb; ++bi) {
            const double* gp = g.data() + static_cast<std::int64_t>(bi) * m * n;
            const double* ap = av.data() + static_cast<std::int64_t>(av.dim(0) == 1 ? 0 : bi) * m * k;
            const double* bp = bv.data() + static_cast<std::int64_t>(bv.dim(0) == 1 ? 0 : bi) * k * n;
            double* dap = da.data() + static_cast<std::int64_t>(av.dim(0) == 1 ? 0 : bi) * m * k;
            double* dbp = db.data() + static_cast<std::int64_t>(bv.dim(0) == 1 ? 0 : bi) * k * n;
            for (int i = 0; i < m; ++i) {
                for (int kk = 0; kk < k; ++kk) {
                    double acc = 0;
                    for (int j = 0; j < n; ++j) {
                        acc += gp[i * n + j] * bp[kk * n + j];
                        dbp[kk * n + j] += ap[i * k + kk] * gp[i * n + j];
                    }
                    dap[i * k + kk] += acc;
                }
            }
        }
    });
    return out;
}

inline Var concat_channels(const std::vector<Var>& xs) {
    if (xs.empty()) throw ValueError("concat_channels: empty input list");
    Tape& t = *xs.front().tape;
    std::vector<Tensor<double>> vals;
    std::vector<int> ids;
    for (const auto& x : xs) {
        vals.push_back(x.value());
        ids.push_back(x.id);
    }
    Var out = t.push(concat_channels(vals));
    t.set_backprop(out.id, [ids, oid = out.id](Tape& tp) {
        const auto& g = tp.grad(oid);
        std::vector<int> sizes;
        for (int id : ids) sizes.push_back(tp.value(id).dim(1));
        auto parts = split_channels(g, sizes);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            detail::accumulate(tp.grad_ref(ids[i]), parts[i]);
        }
    });
    return out;
}

inline std::vector<Var> split_channels(const Var& x, const std::vector<int>& sizes) {
    Tape& t = *x.tape;
    auto parts = split_channels(x.value(), sizes);
    std::vector<Var> out;
    int off = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        Var v = t.push(std::move(parts[i]));
        t.set_backprop(v.id, [xid = x.id, oid = v.id, off](Tape& tp) {
            const auto& g = tp.grad(oid);
            auto& dx = tp.grad_ref(xid);
            const int ctot = dx.dim(1), cpart = g.dim(1);
            const std::int64_t hw = static_cast<std::int64_t>(g.dim(2)) * g.dim(3);
            for (int n = 0; n < g.dim(0); ++n) {
                for (int c = 0; c < cpart; ++c) {
                    const double* src = g.data() + (static_cast<std::int64_t>(n) * cpart + c) * hw;
                    double* dst = dx.data() + (static_cast<std::int64_t>(n) * ctot + off + c) * hw;
                    for (std::int64_t j = 0; j < hw; ++j) dst[j] += src[j];
                }
            }
        });
        out.push_back(v);
        off += sizes[i];
    }
    return out;
}

inline Var shuffle_channels(const Var& x, int groups) {
    Tape& t = *x.tape;
    Var out = t.push(shuffle_channels(x.value(), groups));
    t.set_backprop(out.id, [xid = x.id, oid = out.id, groups](Tape& tp) {
        const auto& g = tp.grad(oid);
        // The inverse of a group transpose is the transpose with C/groups groups.
        detail::accumulate(tp.grad_ref(xid), shuffle_channels(g, g.dim(1) / groups));
    });
    return out;
}

inline Var activation(const Var& x, Act kind) {
    Tape& t = *x.tape;
    Var out = t.push(activation(x.value(), kind));
    t.set_backprop(out.id, [xid = x.id, oid = out.id, kind](Tape& tp) {
        const auto& g = tp.grad(oid);
        const auto& xv = tp.value(xid);
        const auto& ov = tp.value(oid);
        auto& dx = tp.grad_ref(xid);
        if (kind == Act::Relu) {
            for (std::int64_t i = 0; i < g.size(); ++i) dx[i] += xv[i] > 0 ? g[i] : 0.0;
        } else {
            for (std::int64_t i = 0; i < g.size(); ++i) dx[i] += g[i] * ov[i] * (1.0 - ov[i]);
        }
    });
    return out;
}

inline Var conv2d(const Var& x, const Conv2dParams<Var>& p) {
    Tape& t = *x.tape;
    Conv2dParams<Tensor<double>> pv{p.weight.value(), std::nullopt, p.stride_h, p.stride_w,
                                    p.pad_h,          p.pad_w,      p.dil_h,    p.dil_w,
                                    p.groups};
    if (p.bias) pv.bias = p.bias->value();
    Var out = t.push(conv2d(x.value(), pv));
    const int wid = p.weight.id;
    const int bid = p.bias ? p.bias->id : -1;
    t.set_backprop(out.id, [xid = x.id, wid, bid, oid = out.id, p](Tape& tp) {
        const auto& g = tp.grad(oid);
        const auto& xv = tp.value(xid);
        const auto& wv = tp.value(wid);
        auto& dx = tp.grad_ref(xid);
        auto& dw = tp.grad_ref(wid);
        const int n = xv.dim(0), h = xv.dim(2), w = xv.dim(3);
        const int oc_total = wv.dim(0), icg = wv.dim(1), kh = wv.dim(2), kw = wv.dim(3);
        const int ocg = oc_total / p.groups;
        for (int ni = 0; ni < n; ++ni) {
            for (int gidx = 0; gidx < p.groups; ++gidx) {
                for (int ocl = 0; ocl < ocg; ++ocl) {
                    const int oc = gidx * ocg + ocl;
                    for (int oy = 0; oy < g.dim(2); ++oy) {
                        for (int ox = 0; ox < g.dim(3); ++ox) {
                            const double gv = g.at4(ni, oc, oy, ox);
                            if (gv == 0.0) continue;
                            for (int icl = 0; icl < icg; ++icl) {
                                const int ic = gidx * icg + icl;
                                for (int ky = 0; ky < kh; ++ky) {
                                    const int iy = oy * p.stride_h - p.pad_h + ky * p.dil_h;
                                    if (iy < 0 || iy >= h) continue;
                                    for (int kx = 0; kx < kw; ++kx) {
                                        const int ix = ox * p.stride_w - p.pad_w + kx * p.dil_w;
                                        if (ix < 0 || ix >= w) continue;
                                        const std::int64_t widx =
                                            ((static_cast<std::int64_t>(oc) * icg + icl) * kh + ky) * kw + kx;
                                        dx.at4(ni, ic, iy, ix) += gv * wv[widx];
                                        dw[widx] += gv * xv.at4(ni, ic, iy, ix);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        if (bid >= 0) {
            auto& db = tp.grad_ref(bid);
            for (int ni = 0; ni < n; ++ni) {
                for (int oc = 0; oc < oc_total; ++oc) {
                    double acc = 0;
                    for (int oy = 0; oy < g.dim(2); ++oy) {
                        for (int ox = 0; ox < g.dim(3); ++ox) acc += g.at4(ni, oc, oy, ox);
                    }
                    db[oc] += acc;
                }
            }
        }
    });
    return out;
}

inline Var batchnorm_infer(const Var& x, const BatchNormParams<Var>& p) {
    Tape& t = *x.tape;
    BatchNormParams<Tensor<double>> pv{p.gamma.value(), p.beta.value(), p.running_mean.value(),
                                       p.running_var.value(), p.epsilon};
    Var out = t.push(batchnorm_infer(x.value(), pv));
    t.set_backprop(out.id, [xid = x.id, gid = p.gamma.id, bid = p.beta.id, mid = p.running_mean.id,
                            vid = p.running_var.id, oid = out.id, eps = p.epsilon](Tape& tp) {
        const auto& g = tp.grad(oid);
        const auto& xv = tp.value(xid);
        const auto& gamma = tp.value(gid);
        const auto& mean = tp.value(mid);
        const auto& var = tp.value(vid);
        auto& dx = tp.grad_ref(xid);
        auto& dgamma = tp.grad_ref(gid);
        auto& dbeta = tp.grad_ref(bid);
        auto& dmean = tp.grad_ref(mid);
        auto& dvar = tp.grad_ref(vid);
        const int c = xv.dim(1);
        const std::int64_t hw = static_cast<std::int64_t>(xv.dim(2)) * xv.dim(3);
        for (int n = 0; n < xv.dim(0); ++n) {
            for (int ci = 0; ci < c; ++ci) {
                const double inv = 1.0 / std::sqrt(var[ci] + eps);
                const double* gp = g.data() + (static_cast<std::int64_t>(n) * c + ci) * hw;
                const double* xp = xv.data() + (static_cast<std::int64_t>(n) * c + ci) * hw;
                double* dxp = dx.data() + (static_cast<std::int64_t>(n) * c + ci) * hw;
                for (std::int64_t i = 0; i < hw; ++i) {
                    const double centered = xp[i] - mean[ci];
                    dxp[i] += gp[i] * gamma[ci] * inv;
                    dgamma[ci] += gp[i] * centered * inv;
                    dbeta[ci] += gp[i];
                    dmean[ci] -= gp[i] * gamma[ci] * inv;
                    dvar[ci] += gp[i] * centered * gamma[ci] * (-0.5) * inv * inv * inv;
                }
            }
        }
    });
    return out;
}

inline Var global_avg_pool(const Var& x) {
    Tape& t = *x.tape;
    Var out = t.push(global_avg_pool(x.value()));
    t.set_backprop(out.id, [xid = x.id, oid = out.id](Tape& tp) {
        const auto& g = tp.grad(oid);
        auto& dx = tp.grad_ref(xid);
        const std::int64_t hw = static_cast<std::int64_t>(dx.dim(2)) * dx.dim(3);
        for (int n = 0; n < dx.dim(0); ++n) {
            for (int c = 0; c < dx.dim(1); ++c) {
                const double gv = g.at4(n, c, 0, 0) / static_cast<double>(hw);
                double* dst = dx.data() + (static_cast<std::int64_t>(n) * dx.dim(1) + c) * hw;
                for (std::int64_t i = 0; i < hw; ++i) dst[i] += gv;
            }
        }
    });
    return out;
}

inline Var adaptive_avg_pool(const Var& x, int oh, int ow) {
    Tape& t = *x.tape;
    Var out = t.push(adaptive_avg_pool(x.value(), oh, ow));
    t.set_backprop(out.id, [xid = x.id, oid = out.id, oh, ow](Tape& tp) {
        const auto& g = tp.grad(oid);
        auto& dx = tp.grad_ref(xid);
        const int h = dx.dim(2), w = dx.dim(3);
        for (int n = 0; n < dx.dim(0); ++n) {
            for (int c = 0; c < dx.dim(1); ++c) {
                for (int i = 0; i < oh; ++i) {
                    const int y0 = (i * h) / oh, y1 = ((i + 1) * h + oh - 1) / oh;
                    for (int j = 0; j < ow; ++j) {
                        const int x0 = (j * w) / ow, x1 = ((j + 1) * w + ow - 1) / ow;
                        const double gv = g.at4(n, c, i, j) / static_cast<double>((y1 - y0) * (x1 - x0));
                        for (int y = y0; y < y1; ++y) {
                            for (int xx = x0; xx < x1; ++xx) dx.at4(n, c, y, xx) += gv;
                        }
                    }
                }
            }
        }
    });
    return out;
}

inline Var upsample_nearest(const Var& x, int scale) {
    Tape& t = *x.tape;
    Var out = t.push(upsample_nearest(x.value(), scale));
    if (scale == 1) {
        t.set_backprop(out.id, [xid = x.id, oid = out.id](Tape& tp) {
            detail::accumulate(tp.grad_ref(xid), tp.grad(oid));
        });
        return out;
    }
    t.set_backprop(out.id, [xid = x.id, oid = out.id, scale](Tape& tp) {
        const auto& g = tp.grad(oid);
        auto& dx = tp.grad_ref(xid);
        for (int n = 0; n < g.dim(0); ++n) {
            for (int c = 0; c < g.dim(1); ++c) {
                for (int y = 0; y < g.dim(2); ++y) {
                    for (int xx = 0; xx < g.dim(3); ++xx) {
                        dx.at4(n, c, y / scale, xx / scale) += g.at4(n, c, y, xx);
                    }
                }
            }
        }
    });
    return out;
}

inline Var sum(const Var& x) {
    Tape& t = *x.tape;
    Var out = t.push(Tensor<double>({1}, std::vector<double>{sum(x.value())}));
    t.set_backprop(out.id, [xid = x.id, oid = out.id](Tape& tp) {
        const double g = tp.grad(oid)[0];
        auto& dx = tp.grad_ref(xid);
        for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] += g;
    });
    return out;
}

}  // namespace greit
