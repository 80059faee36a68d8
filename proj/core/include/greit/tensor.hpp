#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "greit/error.hpp"

namespace greit {

using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

// Dense row-major tensor. Layout is (batch, channel, height, width) for all
// rank-4 data in this project. Immutable by convention once an op returns it.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
        check_shape();
        data_.assign(static_cast<std::size_t>(numel(shape_)), fill);
    }

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_shape();
        if (static_cast<std::int64_t>(data_.size()) != numel(shape_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
        }
    }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // Rank-4 accessor, no bounds checks on the hot path.
    T& at4(int n, int c, int h, int w) {
        return data_[static_cast<std::size_t>(((static_cast<std::int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    const T& at4(int n, int c, int h, int w) const {
        return data_[static_cast<std::size_t>(((static_cast<std::int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }

private:
    void check_shape() const {
        for (int d : shape_) {
            if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape_));
        }
    }

    Shape shape_;
    std::vector<T> data_;
};

template <typename T>
int batch(const Tensor<T>& t) { return t.dim(0); }
template <typename T>
int channels(const Tensor<T>& t) { return t.dim(1); }
template <typename T>
int height(const Tensor<T>& t) { return t.dim(2); }
template <typename T>
int width(const Tensor<T>& t) { return t.dim(3); }

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape new_shape) {
    if (numel(new_shape) != x.size()) {
        throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(new_shape) +
                         " changes element count");
    }
    return Tensor<T>(std::move(new_shape), std::vector<T>(x.data(), x.data() + x.size()));
}

namespace detail {

// b must have the same rank as a, with every dim equal to a's or 1.
inline void check_broadcast(const Shape& a, const Shape& b) {
    if (a.size() != b.size()) {
        throw ShapeError("broadcast rank mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (b[i] != a[i] && b[i] != 1) {
            throw ShapeError("shape " + shape_str(b) + " not broadcastable to " + shape_str(a));
        }
    }
}

inline std::vector<std::int64_t> strides_of(const Shape& s) {
    std::vector<std::int64_t> st(s.size(), 1);
    for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) {
        st[static_cast<std::size_t>(i)] = st[static_cast<std::size_t>(i + 1)] * s[static_cast<std::size_t>(i + 1)];
    }
    return st;
}

// Strides for indexing b with coordinates of a; broadcast dims get stride 0.
inline std::vector<std::int64_t> broadcast_strides(const Shape& a, const Shape& b) {
    auto st = strides_of(b);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (b[i] == 1 && a[i] != 1) st[i] = 0;
    }
    return st;
}

template <typename T, typename F>
Tensor<T> broadcast_binary(const Tensor<T>& a, const Tensor<T>& b, F&& f) {
    check_broadcast(a.shape(), b.shape());
    Tensor<T> out(a.shape());
    if (a.shape() == b.shape()) {
        for (std::int64_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
        return out;
    }
    const auto bst = broadcast_strides(a.shape(), b.shape());
    const auto ast = strides_of(a.shape());
    const int r = a.rank();
    std::vector<int> idx(static_cast<std::size_t>(r), 0);
    for (std::int64_t i = 0; i < a.size(); ++i) {
        std::int64_t bi = 0;
        std::int64_t rem = i;
        for (int d = 0; d < r; ++d) {
            const std::int64_t c = rem / ast[static_cast<std::size_t>(d)];
            rem -= c * ast[static_cast<std::size_t>(d)];
            bi += c * bst[static_cast<std::size_t>(d)];
        }
        out[i] = f(a[i], b[bi]);
    }
    return out;
}

}  // namespace detail

template <typename T>
Tensor<T> elem_mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::broadcast_binary(a, b, [](T x, T y) { return x * y; });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::broadcast_binary(a, b, [](T x, T y) { return x + y; });
}

// Batched matrix product: (B,m,k) x (B,k,n) -> (B,m,n). Either batch dim may be 1.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 3 || b.rank() != 3) {
        throw ShapeError("matmul expects rank-3 tensors, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    if (a.dim(2) != b.dim(1)) {
        throw ShapeError("matmul inner dims differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    if (a.dim(0) != b.dim(0) && a.dim(0) != 1 && b.dim(0) != 1) {
        throw ShapeError("matmul batch dims differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    const int nb = std::max(a.dim(0), b.dim(0));
    const int m = a.dim(1), k = a.dim(2), n = b.dim(2);
    Tensor<T> out({nb, m, n});
    for (int bi = 0; bi < nb; ++bi) {
        const T* ap = a.data() + static_cast<std::int64_t>(a.dim(0) == 1 ? 0 : bi) * m * k;
        const T* bp = b.data() + static_cast<std::int64_t>(b.dim(0) == 1 ? 0 : bi) * k * n;
        T* op = out.data() + static_cast<std::int64_t>(bi) * m * n;
        for (int i = 0; i < m; ++i) {
            for (int kk = 0; kk < k; ++kk) {
                const T av = ap[i * k + kk];
                for (int j = 0; j < n; ++j) op[i * n + j] += av * bp[kk * n + j];
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
    if (xs.empty()) throw ValueError("concat_channels: empty input list");
    const auto& s0 = xs.front().shape();
    if (s0.size() != 4) throw ShapeError("concat_channels expects rank-4 tensors");
    int c_total = 0;
    for (const auto& x : xs) {
        if (x.rank() != 4 || x.dim(0) != s0[0] || x.dim(2) != s0[2] || x.dim(3) != s0[3]) {
            throw ShapeError("concat_channels: incompatible shape " + shape_str(x.shape()));
        }
        c_total += x.dim(1);
    }
    Tensor<T> out({s0[0], c_total, s0[2], s0[3]});
    const std::int64_t hw = static_cast<std::int64_t>(s0[2]) * s0[3];
    for (int n = 0; n < s0[0]; ++n) {
        std::int64_t off = 0;
        for (const auto& x : xs) {
            const std::int64_t block = static_cast<std::int64_t>(x.dim(1)) * hw;
            const T* src = x.data() + static_cast<std::int64_t>(n) * block;
            T* dst = out.data() + (static_cast<std::int64_t>(n) * c_total) * hw + off * hw;
            std::copy(src, src + block, dst);
            off += x.dim(1);
        }
    }
    return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, const std::vector<int>& sizes) {
    if (x.rank() != 4) throw ShapeError("split_channels expects a rank-4 tensor");
    int total = 0;
    for (int s : sizes) {
        if (s <= 0) throw ValueError("split_channels: non-positive split size");
        total += s;
    }
    if (total != x.dim(1)) {
        throw ShapeError("split sizes sum to " + std::to_string(total) + ", tensor has " +
                         std::to_string(x.dim(1)) + " channels");
    }
    std::vector<Tensor<T>> out;
    out.reserve(sizes.size());
    const std::int64_t hw = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
    int off = 0;
    for (int s : sizes) {
        Tensor<T> part({x.dim(0), s, x.dim(2), x.dim(3)});
        for (int n = 0; n < x.dim(0); ++n) {
            const T* src = x.data() + (static_cast<std::int64_t>(n) * x.dim(1) + off) * hw;
            T* dst = part.data() + static_cast<std::int64_t>(n) * s * hw;
            std::copy(src, src + static_cast<std::int64_t>(s) * hw, dst);
        }
        out.push_back(std::move(part));
        off += s;
    }
    return out;
}

// Group-transpose permutation: channel c moves to (c % g) * (C/g) + c / g.
template <typename T>
Tensor<T> shuffle_channels(const Tensor<T>& x, int groups) {
    if (x.rank() != 4) throw ShapeError("shuffle_channels expects a rank-4 tensor");
    const int c = x.dim(1);
    if (groups <= 0 || c % groups != 0) {
        throw ShapeError("channel count " + std::to_string(c) + " not divisible by groups " +
                         std::to_string(groups));
    }
    Tensor<T> out(x.shape());
    const std::int64_t hw = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
    const int per = c / groups;
    for (int n = 0; n < x.dim(0); ++n) {
        for (int ci = 0; ci < c; ++ci) {
            const int co = (ci % groups) * per + ci / groups;
            const T* src = x.data() + (static_cast<std::int64_t>(n) * c + ci) * hw;
            T* dst = out.data() + (static_cast<std::int64_t>(n) * c + co) * hw;
            std::copy(src, src + hw, dst);
        }
    }
    return out;
}

template <typename T>
T sum(const Tensor<T>& x) {
    T s{};
    for (std::int64_t i = 0; i < x.size(); ++i) s += x[i];
    return s;
}

template <typename T, typename Rng>
void fill_uniform(Tensor<T>& x, Rng& rng, T lo, T hi) {
    std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
    for (std::int64_t i = 0; i < x.size(); ++i) x[i] = static_cast<T>(dist(rng));
}

}  // namespace greit
