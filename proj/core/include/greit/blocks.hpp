#pragma once

#include <optional>
#include <vector>

#include "greit/autodiff.hpp"
#include "greit/ops.hpp"
#include "greit/probe.hpp"
#include "greit/shape_backend.hpp"

namespace greit {

// ---------------------------------------------------------------------------
// Parameter bundles. TT is the stored tensor type: Tensor<float> for the
// inference network, Var for gradient checks.
// ---------------------------------------------------------------------------

// Squeeze-and-excitation pair: 1x1 reduce (C -> C/r) and 1x1 expand back.
// Both carry biases; these are the weight-producing convolutions, so no BN.
template <class TT>
struct SEParams {
    Conv2dParams<TT> reduce, expand;
};

template <class TT>
struct GSWParams {
    Conv2dParams<TT> to_cprime;  // 1x1, C -> C'
    Conv2dParams<TT> to_one;     // 1x1, C' -> 1
    SEParams<TT> se;             // over the C-vector produced by the matmul
};

template <class TT>
struct LKAParams {
    Conv2dParams<TT> dw;   // depthwise k_dw x k_dw
    Conv2dParams<TT> dwd;  // depthwise dilated k_dwd x k_dwd
    Conv2dParams<TT> pw;   // pointwise
};

template <class TT>
struct ConvBn {
    Conv2dParams<TT> conv;
    BatchNormParams<TT> bn;
};

template <class TT>
struct TransitionParams {
    ConvBn<TT> dw;  // 3x3 stride-2 depthwise
    ConvBn<TT> pw;  // 1x1, doubling width; followed by ReLU
};

template <class TT>
struct GreitBranchParams {
    ConvBn<TT> dw;  // 3x3 depthwise separable conv (depthwise + BN, no pointwise)
    std::optional<GSWParams<TT>> gsw;
    std::optional<SEParams<TT>> gap_se;  // Lite-HRNet style GAP spatial weighting
};

// One Greit block: the 1-2 branches of a resolution group, sharing a channel
// weighting over their active halves, each with its own conv + spatial gate.
template <class TT>
struct GreitBlockParams {
    SEParams<TT> gcw_se;  // over the concatenated active halves of the group
    std::vector<GreitBranchParams<TT>> branch;
};

template <class TT>
struct FuseDownStep {
    ConvBn<TT> dw;  // 3x3 stride-2 depthwise
    ConvBn<TT> pw;  // 1x1 pointwise
};

template <class TT>
struct FusePath {
    std::vector<FuseDownStep<TT>> down;  // i < j
    std::optional<ConvBn<TT>> up_pw;     // i > j: 1x1 then nearest upsample
    int up_scale = 1;
};

template <class TT>
struct FuseParams {
    // path[j][i]: how input branch i reaches output branch j (empty when i == j).
    std::vector<std::vector<std::optional<FusePath<TT>>>> path;
    bool is_last = false;
    std::vector<ConvBn<TT>> post;  // 3x3 depthwise + BN + ReLU per output branch
};

template <class TT>
struct LKSParams {
    ConvBn<TT> in;  // 3x3 stride-2, 3 -> stem width; ReLU
    std::optional<LKAParams<TT>> lka;
    ConvBn<TT> a_dw;       // 3x3 stride-2 depthwise
    ConvBn<TT> a_pw;       // 1x1 -> w0/2; ReLU
    ConvBn<TT> b_expand;   // 1x1 expand; ReLU
    ConvBn<TT> b_dw;       // 3x3 stride-2 depthwise
    ConvBn<TT> b_restore;  // 1x1 -> w0/2; ReLU
};

// High/low resolution grouping of branch indices.
struct GroupAssignment {
    std::vector<int> high, low;

    // Branches 1-2 form the high group, 3-4 the low group (1-based in the
    // source convention; 0-based indices here).
    static GroupAssignment two_groups(int n_branches) {
        GroupAssignment ga;
        for (int i = 0; i < n_branches && i < 2; ++i) ga.high.push_back(i);
        for (int i = 2; i < n_branches && i < 4; ++i) ga.low.push_back(i);
        return ga;
    }

    static GroupAssignment single_group(int n_branches) {
        GroupAssignment ga;
        for (int i = 0; i < n_branches; ++i) ga.high.push_back(i);
        return ga;
    }
};

// ---------------------------------------------------------------------------
// Block forward functions. X is the value backend (Tensor<float>, Var, or
// ShapeTensor); overload resolution picks the matching primitive set.
// ---------------------------------------------------------------------------

template <class X, class TT>
X conv_bn(const X& x, const ConvBn<TT>& p, bool relu = false) {
    X y = batchnorm_infer(conv2d(x, p.conv), p.bn);
    return relu ? activation(y, Act::Relu) : y;
}

// sigmoid(expand(relu(reduce(x)))) -- the weight map, not yet applied.
template <class X, class TT>
X se_weights(const X& x, const SEParams<TT>& p) {
    return activation(conv2d(activation(conv2d(x, p.reduce), Act::Relu), p.expand), Act::Sigmoid);
}

template <class X, class TT>
X se_weighting(const X& x, const SEParams<TT>& p) {
    X w = se_weights(x, p);
    probe::record("se", w);
    return elem_mul(x, w);
}

// Conditional channel weighting across a branch set: pool everything to the
// lowest resolution, concat, SE, split, redistribute per branch.
template <class X, class TT>
std::vector<X> ccw_forward(const std::vector<X>& bs, const SEParams<TT>& p) {
    if (bs.empty()) throw ValueError("ccw_forward: empty branch set");
    const int lh = height(bs.back()), lw = width(bs.back());
    std::vector<X> pooled;
    std::vector<int> sizes;
    for (const auto& b : bs) {
        if (height(b) % lh != 0 || width(b) % lw != 0 || height(b) / lh != width(b) / lw) {
            throw ShapeError("ccw_forward: branch resolutions are not power-of-two multiples");
        }
        pooled.push_back(adaptive_avg_pool(b, lh, lw));
        sizes.push_back(channels(b));
    }
    X z = concat_channels(pooled);
    X w = se_weights(z, p);
    auto per_branch = split_channels(w, sizes);
    std::vector<X> out;
    for (std::size_t i = 0; i < bs.size(); ++i) {
        X wi = upsample_nearest(per_branch[i], height(bs[i]) / lh);
        probe::record("ccw", wi);
        out.push_back(elem_mul(bs[i], wi));
    }
    return out;
}

// Grouped channel weighting: CCW independently within each group.
template <class X, class TT>
std::vector<X> gcw_forward(const std::vector<X>& bs, const GroupAssignment& ga,
                           const SEParams<TT>& p_high, const SEParams<TT>& p_low) {
    if (bs.empty()) throw ValueError("gcw_forward: empty branch set");
    std::vector<X> out(bs.begin(), bs.end());
    const auto apply = [&](const std::vector<int>& idx, const SEParams<TT>& p) {
        if (idx.empty()) return;
        std::vector<X> group;
        for (int i : idx) group.push_back(bs[static_cast<std::size_t>(i)]);
        auto weighted = ccw_forward(group, p);
        for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<std::size_t>(idx[k])] = weighted[k];
    };
    apply(ga.high, p_high);
    apply(ga.low, p_low);
    return out;
}

// Global spatial weighting: a learned single-channel saliency map contracts
// the flattened feature map to a C-vector, which an SE stage turns into
// per-channel weights.
template <class X, class TT>
X gsw_forward(const X& x, const GSWParams<TT>& p) {
    const int n = batch(x), c = channels(x), h = height(x), w = width(x);
    X sal = activation(conv2d(activation(conv2d(x, p.to_cprime), Act::Relu), p.to_one), Act::Sigmoid);
    X xp = reshape(x, {n, c, h * w});
    X z = reshape(sal, {n, h * w, 1});
    X y = reshape(matmul(xp, z), {n, c, 1, 1});
    X weights = se_weights(y, p.se);
    probe::record("gsw", weights);
    return elem_mul(x, weights);
}

// GAP-based spatial weighting (the Lite-HRNet baseline form).
template <class X, class TT>
X gap_se_weighting(const X& x, const SEParams<TT>& p) {
    X weights = se_weights(global_avg_pool(x), p);
    probe::record("gap_se", weights);
    return elem_mul(x, weights);
}

// Large kernel attention: depthwise, depthwise dilated, pointwise; the result
// multiplies the input directly (no sigmoid in this operator).
template <class X, class TT>
X lka_forward(const X& x, const LKAParams<TT>& p) {
    X z = conv2d(conv2d(conv2d(x, p.dw), p.dwd), p.pw);
    return elem_mul(x, z);
}

// Large kernel stem: 4x total downsampling from the input image.
template <class X, class TT>
X lks_forward(const X& x, const LKSParams<TT>& p) {
    X t = conv_bn(x, p.in, /*relu=*/true);
    const int c = channels(t);
    if (c % 2 != 0) throw ShapeError("lks_forward: stem width must be even");
    auto halves = split_channels(t, {c / 2, c / 2});
    X a = halves[0];
    if (p.lka) a = lka_forward(a, *p.lka);
    a = conv_bn(a, p.a_dw);
    a = conv_bn(a, p.a_pw, /*relu=*/true);
    X b = conv_bn(halves[1], p.b_expand, /*relu=*/true);
    b = conv_bn(b, p.b_dw);
    b = conv_bn(b, p.b_restore, /*relu=*/true);
    return shuffle_channels(concat_channels(std::vector<X>{a, b}), 2);
}

// One Greit block over the 1-2 branches of a group. Per branch: channel
// split, identity half kept, active half through shared GCW, depthwise conv,
// spatial weighting; concat and shuffle.
template <class X, class TT>
std::vector<X> greit_block_forward(const std::vector<X>& pair, const GreitBlockParams<TT>& p) {
    if (pair.empty()) throw ValueError("greit_block_forward: expects at least one branch");
    if (pair.size() != p.branch.size()) throw ShapeError("greit_block_forward: branch/param count mismatch");
    std::vector<X> identity, active;
    for (const auto& b : pair) {
        const int c = channels(b);
        if (c % 2 != 0) throw ShapeError("greit_block_forward: branch width must be even");
        auto halves = split_channels(b, {c / 2, c / 2});
        identity.push_back(halves[0]);
        active.push_back(halves[1]);
    }
    active = ccw_forward(active, p.gcw_se);
    std::vector<X> out;
    for (std::size_t i = 0; i < pair.size(); ++i) {
        X y = conv_bn(active[i], p.branch[i].dw);
        if (p.branch[i].gsw) {
            y = gsw_forward(y, *p.branch[i].gsw);
        } else if (p.branch[i].gap_se) {
            y = gap_se_weighting(y, *p.branch[i].gap_se);
        }
        out.push_back(shuffle_channels(concat_channels(std::vector<X>{identity[i], y}), 2));
    }
    return out;
}

// Multi-resolution fusion: every input branch is resampled to every output
// branch's shape and added. The last stage follows each sum with a conv.
template <class X, class TT>
std::vector<X> fuse_branches(const std::vector<X>& bs, const FuseParams<TT>& p) {
    const std::size_t n = bs.size();
    if (n < 2) throw ValueError("fuse_branches: needs at least 2 branches");
    if (p.path.size() != n) throw ShapeError("fuse_branches: path table does not match branch count");
    std::vector<X> out;
    for (std::size_t j = 0; j < n; ++j) {
        std::optional<X> acc;
        for (std::size_t i = 0; i < n; ++i) {
            X contrib = bs[i];
            if (i != j) {
                const auto& path = p.path[j][i];
                if (!path) throw ShapeError("fuse_branches: missing path");
                if (i < j) {
                    for (const auto& step : path->down) {
                        contrib = conv_bn(contrib, step.dw);
                        contrib = conv_bn(contrib, step.pw);
                    }
                } else {
                    contrib = conv_bn(contrib, *path->up_pw);
                    contrib = upsample_nearest(contrib, path->up_scale);
                }
            }
            acc = acc ? add(*acc, contrib) : contrib;
        }
        X y = *acc;
        if (p.is_last) y = conv_bn(y, p.post[j], /*relu=*/true);
        out.push_back(y);
    }
    return out;
}

// Appends one branch: stride-2 depthwise + pointwise from the lowest branch,
// doubling its width.
template <class X, class TT>
std::vector<X> make_transition(const std::vector<X>& bs, const TransitionParams<TT>& p) {
    if (bs.empty()) throw ValueError("make_transition: empty branch set");
    if (bs.size() >= 4) throw ValueError("make_transition: already at 4 branches");
    std::vector<X> out(bs.begin(), bs.end());
    X nb = conv_bn(conv_bn(bs.back(), p.dw), p.pw, /*relu=*/true);
    out.push_back(nb);
    return out;
}

}  // namespace greit
