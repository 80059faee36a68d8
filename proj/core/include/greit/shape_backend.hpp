#pragma once

#include <map>
#include <string>

#include "greit/ops.hpp"

namespace greit {

// Accumulates multiply-accumulate counts (1 MAC = 1 FLOP) per named scope
// while a shape-only forward pass runs.
struct CostSink {
    std::map<std::string, std::int64_t> by_scope;
    std::vector<std::string> order;  // scopes in first-touched (forward) order
    std::vector<std::string> stack;
    std::int64_t total = 0;

    std::string scope() const {
        std::string s;
        for (const auto& part : stack) {
            if (!s.empty()) s += '.';
            s += part;
        }
        return s.empty() ? std::string("(top)") : s;
    }

    void add(std::int64_t flops) {
        total += flops;
        auto [it, fresh] = by_scope.try_emplace(scope(), 0);
        if (fresh) order.push_back(it->first);
        it->second += flops;
    }
};

// Shape-propagation stand-in for a Tensor: carries only the shape and a cost
// sink. Running the network forward with this type yields exact FLOP counts
// without touching any data.
struct ShapeTensor {
    Shape shape_;
    CostSink* sink = nullptr;

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return numel(shape_); }
};

inline int batch(const ShapeTensor& t) { return t.dim(0); }
inline int channels(const ShapeTensor& t) { return t.dim(1); }
inline int height(const ShapeTensor& t) { return t.dim(2); }
inline int width(const ShapeTensor& t) { return t.dim(3); }

namespace detail {
inline void sink_add(const ShapeTensor& any, std::int64_t flops) {
    if (any.sink) any.sink->add(flops);
}
}  // namespace detail

inline ShapeTensor reshape(const ShapeTensor& x, Shape new_shape) {
    if (numel(new_shape) != x.size()) {
        throw ShapeError("reshape " + shape_str(x.shape_) + " -> " + shape_str(new_shape) +
                         " changes element count");
    }
    return {std::move(new_shape), x.sink};
}

inline ShapeTensor elem_mul(const ShapeTensor& a, const ShapeTensor& b) {
    detail::check_broadcast(a.shape_, b.shape_);
    detail::sink_add(a, a.size());
    return {a.shape_, a.sink};
}

inline ShapeTensor add(const ShapeTensor& a, const ShapeTensor& b) {
    detail::check_broadcast(a.shape_, b.shape_);
    detail::sink_add(a, a.size());
    return {a.shape_, a.sink};
}

inline ShapeTensor matmul(const ShapeTensor& a, const ShapeTensor& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(2) != b.dim(1)) {
        throw ShapeError("matmul shape mismatch: " + shape_str(a.shape_) + " vs " + shape_str(b.shape_));
    }
    const int nb = std::max(a.dim(0), b.dim(0));
    detail::sink_add(a, static_cast<std::int64_t>(nb) * a.dim(1) * a.dim(2) * b.dim(2));
    return {{nb, a.dim(1), b.dim(2)}, a.sink};
}

inline ShapeTensor concat_channels(const std::vector<ShapeTensor>& xs) {
    if (xs.empty()) throw ValueError("concat_channels: empty input list");
    int c = 0;
    for (const auto& x : xs) {
        if (x.dim(0) != xs[0].dim(0) || x.dim(2) != xs[0].dim(2) || x.dim(3) != xs[0].dim(3)) {
            throw ShapeError("concat_channels: incompatible shape " + shape_str(x.shape_));
        }
        c += x.dim(1);
    }
    return {{xs[0].dim(0), c, xs[0].dim(2), xs[0].dim(3)}, xs[0].sink};
}

inline std::vector<ShapeTensor> split_channels(const ShapeTensor& x, const std::vector<int>& sizes) {
    int total = 0;
    for (int s : sizes) total += s;
    if (total != x.dim(1)) throw ShapeError("split sizes do not sum to channel count");
    std::vector<ShapeTensor> out;
    for (int s : sizes) out.push_back({{x.dim(0), s, x.dim(2), x.dim(3)}, x.sink});
    return out;
}

inline ShapeTensor shuffle_channels(const ShapeTensor& x, int groups) {
    if (x.dim(1) % groups != 0) throw ShapeError("shuffle_channels: channels not divisible by groups");
    return x;
}

inline ShapeTensor conv2d(const ShapeTensor& x, const Conv2dParams<Tensor<float>>& p) {
    const auto d = detail::conv_output_dims(x.shape_, p);
    const std::int64_t out_elems = static_cast<std::int64_t>(x.dim(0)) * d.out_ch * d.oh * d.ow;
    std::int64_t macs = out_elems * d.kh * d.kw * (d.in_ch / p.groups);
    if (p.bias) macs += out_elems;
    detail::sink_add(x, macs);
    return {{x.dim(0), d.out_ch, d.oh, d.ow}, x.sink};
}

inline ShapeTensor batchnorm_infer(const ShapeTensor& x, const BatchNormParams<Tensor<float>>& p) {
    if (p.gamma.size() != x.dim(1)) throw ShapeError("batchnorm_infer: channel mismatch");
    detail::sink_add(x, x.size());
    return x;
}

inline ShapeTensor activation(const ShapeTensor& x, Act) {
    detail::sink_add(x, x.size());
    return x;
}

inline ShapeTensor global_avg_pool(const ShapeTensor& x) {
    detail::sink_add(x, x.size());
    return {{x.dim(0), x.dim(1), 1, 1}, x.sink};
}

inline ShapeTensor adaptive_avg_pool(const ShapeTensor& x, int oh, int ow) {
    if (oh > x.dim(2) || ow > x.dim(3)) throw ShapeError("adaptive_avg_pool: output larger than input");
    detail::sink_add(x, x.size());
    return {{x.dim(0), x.dim(1), oh, ow}, x.sink};
}

inline ShapeTensor upsample_nearest(const ShapeTensor& x, int scale) {
    detail::sink_add(x, x.size() * scale * scale);
    return {{x.dim(0), x.dim(1), x.dim(2) * scale, x.dim(3) * scale}, x.sink};
}

// Scope guard: pushes a cost scope for ShapeTensor runs, no-op otherwise.
struct CostScopeGuard {
    CostSink* sink = nullptr;
    CostScopeGuard() = default;
    CostScopeGuard(CostSink* s, std::string name) : sink(s) {
        if (sink) sink->stack.push_back(std::move(name));
    }
    ~CostScopeGuard() {
        if (sink) sink->stack.pop_back();
    }
    CostScopeGuard(const CostScopeGuard&) = delete;
    CostScopeGuard& operator=(const CostScopeGuard&) = delete;
    CostScopeGuard(CostScopeGuard&& o) noexcept : sink(o.sink) { o.sink = nullptr; }
};

inline CostScopeGuard cost_scope(const ShapeTensor& x, std::string name) {
    return CostScopeGuard(x.sink, std::move(name));
}

template <typename X>
inline CostScopeGuard cost_scope(const X&, std::string) {
    return CostScopeGuard();
}

}  // namespace greit
