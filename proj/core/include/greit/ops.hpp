#pragma once

#include <cmath>
#include <optional>

#include "greit/tensor.hpp"

namespace greit {

// Parameters for a 2-d convolution. The weight layout is
// (out_ch, in_ch / groups, kH, kW); cross-correlation semantics (no flip).
template <class TT>
struct Conv2dParams {
    TT weight;
    std::optional<TT> bias;
    int stride_h = 1, stride_w = 1;
    int pad_h = 0, pad_w = 0;
    int dil_h = 1, dil_w = 1;
    int groups = 1;
};

template <class TT>
struct BatchNormParams {
    TT gamma, beta, running_mean, running_var;
    double epsilon = 1e-5;
};

enum class Act { Relu, Sigmoid };

namespace detail {

struct ConvDims {
    int out_ch, in_ch, kh, kw, oh, ow;
};

template <class TT>
inline ConvDims conv_output_dims(const Shape& x, const Conv2dParams<TT>& p) {
    const Shape& w = p.weight.shape();
    if (x.size() != 4 || w.size() != 4) throw ShapeError("conv2d expects rank-4 input and weight");
    ConvDims d;
    d.out_ch = w[0];
    d.kh = w[2];
    d.kw = w[3];
    d.in_ch = w[1] * p.groups;
    if (x[1] != d.in_ch) {
        throw ShapeError("conv2d channel mismatch: input has " + std::to_string(x[1]) +
                         ", weight expects " + std::to_string(d.in_ch));
    }
    if (d.in_ch % p.groups != 0 || d.out_ch % p.groups != 0) {
        throw ShapeError("conv2d channels not divisible by groups");
    }
    if (p.stride_h < 1 || p.stride_w < 1 || p.dil_h < 1 || p.dil_w < 1 || p.pad_h < 0 || p.pad_w < 0) {
        throw ValueError("conv2d: invalid stride/dilation/padding");
    }
    d.oh = (x[2] + 2 * p.pad_h - p.dil_h * (d.kh - 1) - 1) / p.stride_h + 1;
    d.ow = (x[3] + 2 * p.pad_w - p.dil_w * (d.kw - 1) - 1) / p.stride_w + 1;
    if (x[2] + 2 * p.pad_h < p.dil_h * (d.kh - 1) + 1 || x[3] + 2 * p.pad_w < p.dil_w * (d.kw - 1) + 1 ||
        d.oh <= 0 || d.ow <= 0) {
        throw ShapeError("conv2d: empty output for input " + shape_str(x));
    }
    return d;
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Conv2dParams<Tensor<T>>& p) {
    const auto d = detail::conv_output_dims(x.shape(), p);
    if (p.bias && (p.bias->rank() != 1 || p.bias->dim(0) != d.out_ch)) {
        throw ShapeError("conv2d: bias shape mismatch");
    }
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int icg = d.in_ch / p.groups, ocg = d.out_ch / p.groups;
    Tensor<T> out({n, d.out_ch, d.oh, d.ow});
    for (int ni = 0; ni < n; ++ni) {
        for (int g = 0; g < p.groups; ++g) {
            for (int ocl = 0; ocl < ocg; ++ocl) {
                const int oc = g * ocg + ocl;
                const T bias = p.bias ? (*p.bias)[oc] : T{};
                for (int oy = 0; oy < d.oh; ++oy) {
                    for (int ox = 0; ox < d.ow; ++ox) {
                        T acc = bias;
                        for (int icl = 0; icl < icg; ++icl) {
                            const int ic = g * icg + icl;
                            const T* wrow = p.weight.data() +
                                            ((static_cast<std::int64_t>(oc) * icg + icl) * d.kh) * d.kw;
                            for (int ky = 0; ky < d.kh; ++ky) {
                                const int iy = oy * p.stride_h - p.pad_h + ky * p.dil_h;
                                if (iy < 0 || iy >= h) continue;
                                const T* xrow = x.data() +
                                                ((static_cast<std::int64_t>(ni) * d.in_ch + ic) * h + iy) * w;
                                for (int kx = 0; kx < d.kw; ++kx) {
                                    const int ix = ox * p.stride_w - p.pad_w + kx * p.dil_w;
                                    if (ix < 0 || ix >= w) continue;
                                    acc += wrow[ky * d.kw + kx] * xrow[ix];
                                }
                            }
                        }
                        out.at4(ni, oc, oy, ox) = acc;
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> batchnorm_infer(const Tensor<T>& x, const BatchNormParams<Tensor<T>>& p) {
    const int c = channels(x);
    if (p.gamma.size() != c || p.beta.size() != c || p.running_mean.size() != c || p.running_var.size() != c) {
        throw ShapeError("batchnorm_infer: parameter length does not match channel count");
    }
    Tensor<T> out(x.shape());
    const std::int64_t hw = static_cast<std::int64_t>(height(x)) * width(x);
    for (int n = 0; n < batch(x); ++n) {
        for (int ci = 0; ci < c; ++ci) {
            const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(p.running_var[ci]) + p.epsilon));
            const T scale = p.gamma[ci] * inv;
            const T shift = p.beta[ci] - p.running_mean[ci] * scale;
            const T* src = x.data() + (static_cast<std::int64_t>(n) * c + ci) * hw;
            T* dst = out.data() + (static_cast<std::int64_t>(n) * c + ci) * hw;
            for (std::int64_t i = 0; i < hw; ++i) dst[i] = src[i] * scale + shift;
        }
    }
    return out;
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Act kind) {
    Tensor<T> out(x.shape());
    if (kind == Act::Relu) {
        for (std::int64_t i = 0; i < x.size(); ++i) out[i] = x[i] > T{} ? x[i] : T{};
    } else {
        for (std::int64_t i = 0; i < x.size(); ++i) out[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x[i]))));
    }
    return out;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
    const std::int64_t hw = static_cast<std::int64_t>(height(x)) * width(x);
    Tensor<T> out({batch(x), channels(x), 1, 1});
    for (int n = 0; n < batch(x); ++n) {
        for (int c = 0; c < channels(x); ++c) {
            const T* src = x.data() + (static_cast<std::int64_t>(n) * channels(x) + c) * hw;
            double acc = 0;
            for (std::int64_t i = 0; i < hw; ++i) acc += static_cast<double>(src[i]);
            out.at4(n, c, 0, 0) = static_cast<T>(acc / static_cast<double>(hw));
        }
    }
    return out;
}

// Output cell (i,j) averages the input bin [floor(i*H/oH), ceil((i+1)*H/oH)).
template <typename T>
Tensor<T> adaptive_avg_pool(const Tensor<T>& x, int oh, int ow) {
    if (oh <= 0 || ow <= 0) throw ValueError("adaptive_avg_pool: output dims must be positive");
    const int h = height(x), w = width(x);
    if (oh > h || ow > w) throw ShapeError("adaptive_avg_pool: output larger than input");
    Tensor<T> out({batch(x), channels(x), oh, ow});
    for (int n = 0; n < batch(x); ++n) {
        for (int c = 0; c < channels(x); ++c) {
            for (int i = 0; i < oh; ++i) {
                const int y0 = (i * h) / oh;
                const int y1 = ((i + 1) * h + oh - 1) / oh;
                for (int j = 0; j < ow; ++j) {
                    const int x0 = (j * w) / ow;
                    const int x1 = ((j + 1) * w + ow - 1) / ow;
                    double acc = 0;
                    for (int y = y0; y < y1; ++y) {
                        for (int xx = x0; xx < x1; ++xx) acc += static_cast<double>(x.at4(n, c, y, xx));
                    }
                    out.at4(n, c, i, j) = static_cast<T>(acc / static_cast<double>((y1 - y0) * (x1 - x0)));
                }
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& x, int scale) {
    if (scale < 1) throw ValueError("upsample_nearest: scale must be >= 1");
    if (scale == 1) return x;
    const int h = height(x), w = width(x);
    Tensor<T> out({batch(x), channels(x), h * scale, w * scale});
    for (int n = 0; n < batch(x); ++n) {
        for (int c = 0; c < channels(x); ++c) {
            for (int y = 0; y < h * scale; ++y) {
                for (int xx = 0; xx < w * scale; ++xx) {
                    out.at4(n, c, y, xx) = x.at4(n, c, y / scale, xx / scale);
                }
            }
        }
    }
    return out;
}

}  // namespace greit
